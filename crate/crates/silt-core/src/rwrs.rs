//! Random walk in random scenery on `Z`, and its deviation exponents.
//!
//! The scenery attaches to each site an i.i.d. symmetric value whose
//! magnitude has tail `P(|eta| > t) = exp(-c t^alpha)`; the observable is
//! the walk-sampled sum `X_n = sum_k eta(S_k) = sum_x eta(x) l_n(x)`. The
//! deviation `P(X_n > y n^beta)` decays like `n^zeta` in the exponent, with
//! `zeta` piecewise in `(alpha, beta)`: a Gaussian-dominated phase, a
//! single-heavy-site phase, and an intermediate phase driven by walk
//! confinement, where the walk pays to fold itself into a ball of radius
//! `n^(u/...)` and the scenery pays a Gaussian factor on the inflated local
//! times. The probe at the end of the module prices those two factors
//! separately on simulated conditioned walks.
//!
//! Site values are derived by a keyed integer hash of `(seed, site)`, so a
//! scenery is a pure function: any site can be evaluated lazily, in any
//! order, on any worker, with no storage.

use rand::RngCore;

use crate::error::{Result, SiltError};
use crate::field::LocalTimeField;
use crate::rare_event::{build_confined_sampler, chunked_hits, chunked_values, TailEstimate};
use crate::rng::RngStream;
use crate::walk::{check_trajectory_budget, walk_with_rng, BallSpec, Norm, Site, Trajectory};

/// Walk dimension for all scenery experiments in this module.
const WALK_DIM: usize = 1;

/// Tail shape of the scenery magnitude: `P(|eta| > t) = exp(-c t^alpha)`.
#[derive(Clone, Copy, Debug)]
pub struct SceneryParams {
    alpha: f64,
    c: f64,
}

impl SceneryParams {
    /// Requires `alpha >= 1` (tails no heavier than exponential) and
    /// `c > 0`.
    pub fn new(alpha: f64, c: f64) -> Result<SceneryParams> {
        if !(alpha.is_finite() && alpha >= 1.0) {
            return Err(SiltError::InvalidParameter(format!(
                "scenery tail exponent alpha must be >= 1, got {alpha}"
            )));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(SiltError::InvalidParameter(format!(
                "scenery tail scale c must be positive, got {c}"
            )));
        }
        Ok(SceneryParams { alpha, c })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn scale(&self) -> f64 {
        self.c
    }
}

/// 64-bit finalizer with full avalanche; the standard splitmix constants.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A frozen random scenery: one symmetric value per site, a deterministic
/// function of `(seed, site)`.
#[derive(Clone, Copy, Debug)]
pub struct Scenery {
    seed: u64,
    params: SceneryParams,
}

impl Scenery {
    pub fn new(seed: u64, params: SceneryParams) -> Scenery {
        Scenery { seed, params }
    }

    fn site_hash(&self, site: &Site) -> u64 {
        let mut h = mix(self.seed ^ 0x5349_4C54_9E37_79B9);
        for &c in site.coords() {
            h = mix(h ^ (c as u64));
        }
        h
    }

    /// The scenery value at `site`.
    ///
    /// An independent fair sign times `(E / c)^(1/alpha)` for a unit
    /// exponential `E`, which gives exactly the advertised magnitude tail.
    pub fn value(&self, site: &Site) -> f64 {
        let h = self.site_hash(site);
        let sign = mix(h ^ 0x0123_4567_89AB_CDEF) & 1;
        let ubits = mix(h ^ 0xFEDC_BA98_7654_3210) >> 11;
        let u = ubits as f64 * 2f64.powi(-53);
        let e = -(1.0 - u).ln();
        let mag = (e / self.params.c).powf(1.0 / self.params.alpha);
        if sign == 0 {
            mag
        } else {
            -mag
        }
    }
}

/// The scenery sum `X_n = sum_{k=0}^{n} eta(S_k)`, accumulated in time
/// order.
pub fn rwrs_sum(traj: &Trajectory, scenery: &Scenery) -> f64 {
    traj.sites().iter().map(|s| scenery.value(s)).sum()
}

/// The scenery sum by both routes: in time order, and as
/// `sum_x eta(x) l_n(x)` over the local-time field in site order. The two
/// must agree up to f64 reassociation; callers use the pair as a cheap
/// audit that local times and trajectory agree.
pub fn rwrs_sum_audited(traj: &Trajectory, scenery: &Scenery) -> (f64, f64) {
    let by_time = rwrs_sum(traj, scenery);
    let field = LocalTimeField::from_trajectory(traj);
    let by_site = field
        .sorted_entries()
        .iter()
        .map(|(site, l)| scenery.value(site) * *l as f64)
        .sum();
    (by_time, by_site)
}

/// Phase of the deviation `P(X_n > y n^beta)` in the `(alpha, beta)` plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    /// `1/2 < beta <= 2/3`: Gaussian fluctuations dominate.
    I,
    /// Heavy single site dominates (`alpha < 3/2`, large `beta`).
    II,
    /// Walk confinement and collective scenery deviation dominate.
    III,
    /// `beta >= 1`: outside the moderate-deviation regime treated here.
    IvOutOfScope,
    /// On the II/III phase boundary, where the exponent formulas meet.
    Boundary,
    /// Parameters outside the admissible `alpha >= 1`, `beta > 1/2` domain.
    Invalid,
}

/// The phase and its deviation exponent.
#[derive(Clone, Copy, Debug)]
pub struct RegionResult {
    pub region: Region,
    /// `zeta` with `P(X_n > y n^beta) = exp(-Theta(n^zeta))`; `None` when
    /// the phase has no single formula (boundary, invalid, out of scope).
    pub zeta: Option<f64>,
}

/// Classify `(alpha, beta)` and return the deviation exponent `zeta`.
///
/// The phases partition `alpha >= 1`, `1/2 < beta < 1`:
/// region I (`beta <= 2/3`) has `zeta = 2 beta - 1`; region II
/// (`alpha < 3/2` and `beta > (1 + alpha)/(4 - alpha)`) has
/// `zeta = beta alpha / (1 + alpha)`; region III (the rest) has
/// `zeta = (4/5) beta - 1/5`. The formulas agree where phases meet.
pub fn zeta_exponent(alpha: f64, beta: f64) -> RegionResult {
    if !alpha.is_finite() || !beta.is_finite() || alpha < 1.0 || beta <= 0.5 {
        return RegionResult {
            region: Region::Invalid,
            zeta: None,
        };
    }
    if beta >= 1.0 {
        return RegionResult {
            region: Region::IvOutOfScope,
            zeta: None,
        };
    }
    if beta <= 2.0 / 3.0 {
        return RegionResult {
            region: Region::I,
            zeta: Some(2.0 * beta - 1.0),
        };
    }
    if alpha < 1.5 {
        let split = (1.0 + alpha) / (4.0 - alpha);
        if beta > split {
            return RegionResult {
                region: Region::II,
                zeta: Some(beta * alpha / (1.0 + alpha)),
            };
        }
        if beta == split {
            return RegionResult {
                region: Region::Boundary,
                zeta: None,
            };
        }
    }
    RegionResult {
        region: Region::III,
        zeta: Some(0.8 * beta - 0.2),
    }
}

/// Monte Carlo estimate of `P(X_n > y n^beta)` with a fresh scenery and a
/// fresh walk per sample.
pub fn mc_tail_rwrs(
    n: usize,
    beta: f64,
    y: f64,
    params: SceneryParams,
    samples: u64,
    base: RngStream,
) -> Result<TailEstimate> {
    check_trajectory_budget(n)?;
    if n == 0 {
        return Err(SiltError::InvalidParameter("n must be positive".into()));
    }
    if samples == 0 {
        return Err(SiltError::InvalidParameter(
            "sample count must be positive".into(),
        ));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(SiltError::InvalidParameter(format!(
            "scaling exponent beta must be positive, got {beta}"
        )));
    }
    if !(y.is_finite() && y > 0.0) {
        return Err(SiltError::InvalidParameter(format!(
            "deviation level y must be positive, got {y}"
        )));
    }
    let threshold = y * (n as f64).powf(beta);
    let hits = chunked_hits(samples, base, |rng| {
        let scenery = Scenery::new(rng.next_u64(), params);
        let traj = walk_with_rng(WALK_DIM, n, rng);
        rwrs_sum(&traj, &scenery) > threshold
    });
    Ok(TailEstimate::from_hits(
        hits,
        samples,
        format!("scenery sum of {n}-step walk exceeds {threshold}"),
    ))
}

/// Draw `samples` independent values of `X_n`, each from a fresh scenery
/// and walk, in sample order.
pub fn sample_rwrs_sums(
    n: usize,
    params: SceneryParams,
    samples: u64,
    base: RngStream,
) -> Result<Vec<f64>> {
    check_trajectory_budget(n)?;
    if n == 0 || samples == 0 {
        return Err(SiltError::InvalidParameter(
            "n and samples must be positive".into(),
        ));
    }
    Ok(chunked_values(samples, base, |rng| {
        let scenery = Scenery::new(rng.next_u64(), params);
        let traj = walk_with_rng(WALK_DIM, n, rng);
        rwrs_sum(&traj, &scenery)
    }))
}

/// Empirical pricing of the region-III deviation scenario.
#[derive(Clone, Debug)]
pub struct RegionProbe {
    pub n: usize,
    pub beta: f64,
    /// Ball-size exponent: the walk is confined to `~ n^u` sites.
    pub u: f64,
    /// Local-time exponent: inflated occupation is `~ n^v`, `v = 1 - u`.
    pub v: f64,
    /// Deviation exponent `(4/5) beta - 1/5` the scenario prices.
    pub zeta: f64,
    pub ball_card: u64,
    /// Local-time threshold `delta0 n^v` defining the inflated set `G`.
    pub level_threshold: f64,
    /// Cardinality target `eps0 n^u` for `G`.
    pub target_card: f64,
    /// Frequency of `|G| > eps0 n^u` under the confined law.
    pub freq: TailEstimate,
    /// `ln P(walk stays in the ball n steps)`: the confinement cost.
    pub confinement_log_prob: f64,
    /// Order `n^zeta / (delta0^2 eps0)` of the scenery's Gaussian cost
    /// exponent on the inflated set.
    pub scenery_exponent: f64,
}

/// Simulate the region-III lower-bound scenario at `beta` in `(2/3, 1)`:
/// confine the walk to a ball of about `n^u` sites (`u = 9/5 - 6 beta / 5`),
/// then measure how often the confined walk inflates its local times past
/// `delta0 n^v` on more than `eps0 n^u` sites. The two costs of the
/// scenario, confinement and scenery deviation, are reported separately.
pub fn region_iii_lower_bound_probe(
    n: usize,
    beta: f64,
    delta0: f64,
    eps0: f64,
    samples: u64,
    base: RngStream,
    budget: u64,
) -> Result<RegionProbe> {
    check_trajectory_budget(n)?;
    if n < 2 {
        return Err(SiltError::InvalidParameter(
            "probe horizon must be at least 2".into(),
        ));
    }
    if samples == 0 {
        return Err(SiltError::InvalidParameter(
            "sample count must be positive".into(),
        ));
    }
    if !(beta > 2.0 / 3.0 && beta < 1.0) {
        return Err(SiltError::InvalidParameter(format!(
            "probe requires 2/3 < beta < 1, got {beta}"
        )));
    }
    for (name, v) in [("delta0", delta0), ("eps0", eps0)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(SiltError::InvalidParameter(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    let u = 1.8 - 1.2 * beta;
    let v = 1.0 - u;
    let nf = n as f64;
    let target_sites = nf.powf(u).ceil() as usize;
    let ball = BallSpec::with_card_at_least(WALK_DIM, target_sites, Norm::Sup)?;
    let sampler = build_confined_sampler(WALK_DIM, n, &ball, budget)?;
    let level_threshold = delta0 * nf.powf(v);
    let target_card = eps0 * nf.powf(u);
    let hits = chunked_hits(samples, base, |rng| {
        let traj = sampler.sample(rng);
        let field = LocalTimeField::from_trajectory(&traj);
        field.level_count(level_threshold) as f64 > target_card
    });
    let zeta = 0.8 * beta - 0.2;
    Ok(RegionProbe {
        n,
        beta,
        u,
        v,
        zeta,
        ball_card: sampler.lattice().card() as u64,
        level_threshold,
        target_card,
        freq: TailEstimate::from_hits(
            hits,
            samples,
            format!(
                "confined walk inflates local time past {level_threshold:.4} \
                 on more than {target_card:.2} sites"
            ),
        ),
        confinement_log_prob: sampler.log_survival(),
        scenery_exponent: nf.powf(zeta) / (delta0 * delta0 * eps0),
    })
}
