//! Reproducible Monte Carlo estimation of rare walk events.
//!
//! All estimators here share one sampling discipline: sample `j` draws from
//! the counter-based stream `floor(j / SAMPLE_CHUNK)` relative to a caller
//! supplied base stream, chunks are farmed out to worker threads, and
//! per-chunk results are integers (hit counts, integer sums) combined by
//! exact arithmetic. Estimates are therefore bit-identical across reruns and
//! across worker counts, which the test suite checks rather than assumes.
//!
//! The heavy hitter is [`ConfinedSampler`], which draws walk paths exactly
//! from the conditional law given survival in a ball, by the backward
//! survival-function transform of the killed walk. Everything it needs is
//! precomputed once; sampling is then a cumulative-sum scan per step.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Result, SiltError};
use crate::field::LocalTimeField;
use crate::oracle::BallLattice;
use crate::rng::{RngStream, SAMPLE_CHUNK};
use crate::walk::{check_dim, check_trajectory_budget, walk_with_rng, BallSpec, Trajectory};

/// A Monte Carlo tail probability with its binomial standard error.
#[derive(Clone, Debug)]
pub struct TailEstimate {
    /// Human-readable description of the event being estimated.
    pub event: String,
    pub p_hat: f64,
    pub stderr: f64,
    pub samples: u64,
    pub hits: u64,
}

impl TailEstimate {
    pub(crate) fn from_hits(hits: u64, samples: u64, event: String) -> TailEstimate {
        let p = hits as f64 / samples as f64;
        TailEstimate {
            event,
            p_hat: p,
            stderr: (p * (1.0 - p) / samples as f64).sqrt(),
            samples,
            hits,
        }
    }
}

fn chunk_lengths(samples: u64) -> impl Iterator<Item = (u64, u64)> {
    let chunks = samples.div_ceil(SAMPLE_CHUNK);
    (0..chunks).map(move |c| {
        let len = SAMPLE_CHUNK.min(samples - c * SAMPLE_CHUNK);
        (c, len)
    })
}

/// Count event hits over `samples` draws, chunk by chunk in parallel.
pub(crate) fn chunked_hits<F>(samples: u64, base: RngStream, event: F) -> u64
where
    F: Fn(&mut ChaCha8Rng) -> bool + Sync,
{
    chunk_lengths(samples)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(c, len)| {
            let mut rng = base.offset(c).rng();
            (0..len).filter(|_| event(&mut rng)).count() as u64
        })
        .sum()
}

/// Evaluate a per-sample statistic for every sample, in sample order.
pub(crate) fn chunked_values<T, F>(samples: u64, base: RngStream, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync,
{
    chunk_lengths(samples)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(c, len)| {
            let mut rng = base.offset(c).rng();
            (0..len).map(|_| f(&mut rng)).collect::<Vec<T>>()
        })
        .collect::<Vec<Vec<T>>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Fold integer-valued per-sample statistics over chunks. `accum` maps one
/// sample's draw into the accumulator; accumulators combine by exact
/// element-wise addition, so the result is independent of scheduling.
pub(crate) fn chunked_sums<A, F>(samples: u64, base: RngStream, zero: A, accum: F) -> A
where
    A: Clone + Send + Sync + Combine,
    F: Fn(&mut ChaCha8Rng, &mut A) + Sync,
{
    chunk_lengths(samples)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(c, len)| {
            let mut rng = base.offset(c).rng();
            let mut acc = zero.clone();
            for _ in 0..len {
                accum(&mut rng, &mut acc);
            }
            acc
        })
        .reduce(|| zero.clone(), |a, b| a.combine(b))
}

/// Exact, commutative combination of partial integer accumulators.
pub(crate) trait Combine {
    fn combine(self, other: Self) -> Self;
}

impl Combine for Vec<[u128; 5]> {
    fn combine(mut self, other: Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.iter_mut().zip(other.into_iter()) {
            for (x, y) in a.iter_mut().zip(b.into_iter()) {
                *x += y;
            }
        }
        self
    }
}

fn check_samples(samples: u64) -> Result<()> {
    if samples == 0 {
        return Err(SiltError::InvalidParameter(
            "sample count must be positive".into(),
        ));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(SiltError::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )));
    }
    Ok(())
}

/// Monte Carlo estimate of `P(silt > y * n)` for an `n`-step walk.
pub fn mc_tail_silt(
    dim: usize,
    n: usize,
    y: f64,
    samples: u64,
    base: RngStream,
) -> Result<TailEstimate> {
    check_dim(dim)?;
    check_trajectory_budget(n)?;
    check_samples(samples)?;
    check_positive("y", y)?;
    if n == 0 {
        return Err(SiltError::InvalidParameter("n must be positive".into()));
    }
    let threshold = y * n as f64;
    let hits = chunked_hits(samples, base, |rng| {
        let traj = walk_with_rng(dim, n, rng);
        let field = LocalTimeField::from_trajectory(&traj);
        field.silt() as f64 > threshold
    });
    Ok(TailEstimate::from_hits(
        hits,
        samples,
        format!("silt of {n}-step walk in d={dim} exceeds {threshold}"),
    ))
}

/// Monte Carlo estimate of `P(range < n / y)` for `y > 1`.
///
/// Each hit is audited on the spot: a path with few distinct sites must have
/// a large self-intersection local time (the two statistics are tied by
/// Cauchy-Schwarz), and a violation panics rather than producing an estimate
/// from inconsistent counts.
pub fn mc_tail_range(
    dim: usize,
    n: usize,
    y: f64,
    samples: u64,
    base: RngStream,
) -> Result<TailEstimate> {
    check_dim(dim)?;
    check_trajectory_budget(n)?;
    check_samples(samples)?;
    if !(y.is_finite() && y > 1.0) {
        return Err(SiltError::InvalidParameter(format!(
            "range contraction y must exceed 1, got {y}"
        )));
    }
    if n == 0 {
        return Err(SiltError::InvalidParameter("n must be positive".into()));
    }
    let threshold = n as f64 / y;
    let silt_floor = y * n as f64;
    let hits = chunked_hits(samples, base, |rng| {
        let traj = walk_with_rng(dim, n, rng);
        let field = LocalTimeField::from_trajectory(&traj);
        let hit = (field.range() as f64) < threshold;
        if hit {
            let mass = (n as u128 + 1) * (n as u128 + 1);
            assert!(
                field.silt() as u128 * field.range() as u128 >= mass,
                "contracted range without inflated silt: silt={} range={}",
                field.silt(),
                field.range()
            );
            assert!(
                field.silt() as f64 > silt_floor,
                "range hit inconsistent with silt tail: silt={} floor={silt_floor}",
                field.silt()
            );
        }
        hit
    });
    Ok(TailEstimate::from_hits(
        hits,
        samples,
        format!("range of {n}-step walk in d={dim} falls below {threshold}"),
    ))
}

/// Exact sampler for the walk conditioned to stay in a ball for `n` steps.
///
/// Built from the backward survival functions `h_k(x) = P_x(alive for the
/// remaining n - k steps)`, each slice rescaled by its maximum so that
/// horizons far past f64 underflow still sample correctly; the rescaling
/// cancels from every conditional step law.
pub struct ConfinedSampler {
    lattice: BallLattice,
    /// `slices[k]` = rescaled `h_k` on the ball's site arena.
    slices: Vec<Vec<f64>>,
    log_survival: f64,
    horizon: usize,
}

/// Precompute a [`ConfinedSampler`], refusing to allocate more than
/// `budget` bytes of slice data.
pub fn build_confined_sampler(
    dim: usize,
    n: usize,
    ball: &BallSpec,
    budget: u64,
) -> Result<ConfinedSampler> {
    let lattice = BallLattice::new(dim, ball)?;
    let bytes = (lattice.card() as u64)
        .saturating_mul(n as u64 + 1)
        .saturating_mul(8);
    if bytes > budget {
        return Err(SiltError::BudgetExceeded {
            required: bytes,
            budget,
        });
    }
    let mut slices = vec![Vec::new(); n + 1];
    slices[n] = vec![1.0; lattice.card()];
    let mut log_scale = 0.0f64;
    for k in (0..n).rev() {
        let mut raw = vec![0.0; lattice.card()];
        lattice.killed_step(&slices[k + 1], &mut raw);
        let sup = raw.iter().cloned().fold(0.0f64, f64::max);
        if sup == 0.0 {
            return Err(SiltError::InvalidParameter(
                "no site in the ball survives the requested horizon".into(),
            ));
        }
        let inv = 1.0 / sup;
        for v in raw.iter_mut() {
            *v *= inv;
        }
        log_scale += sup.ln();
        slices[k] = raw;
    }
    let at_origin = slices[0][lattice.origin_index()];
    if at_origin == 0.0 {
        return Err(SiltError::InvalidParameter(
            "the origin cannot survive the requested horizon in this ball".into(),
        ));
    }
    Ok(ConfinedSampler {
        log_survival: at_origin.ln() + log_scale,
        lattice,
        slices,
        horizon: n,
    })
}

impl ConfinedSampler {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn lattice(&self) -> &BallLattice {
        &self.lattice
    }

    /// `ln P(walk stays in the ball for all n steps)`, exact in log domain.
    pub fn log_survival(&self) -> f64 {
        self.log_survival
    }

    /// Survival probability; underflows to zero when below `~1e-308`.
    pub fn survival(&self) -> f64 {
        self.log_survival.exp()
    }

    /// Draw one path of the conditioned walk.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Trajectory {
        let mut sites = Vec::with_capacity(self.horizon + 1);
        let mut idx = self.lattice.origin_index();
        sites.push(self.lattice.sites()[idx]);
        for k in 1..=self.horizon {
            let weights = &self.slices[k];
            let nbrs = self.lattice.neighbors_of(idx);
            let mut total = 0.0f64;
            for &j in nbrs {
                if j != u32::MAX {
                    total += weights[j as usize];
                }
            }
            debug_assert!(total > 0.0, "sampler reached a dead site");
            let u: f64 = rng.random::<f64>() * total;
            let mut cum = 0.0f64;
            let mut chosen = usize::MAX;
            for &j in nbrs {
                if j == u32::MAX {
                    continue;
                }
                let w = weights[j as usize];
                if w == 0.0 {
                    continue;
                }
                cum += w;
                chosen = j as usize;
                if u < cum {
                    break;
                }
            }
            // Rounding can leave u marginally at or past the final cum; the
            // last positive-weight neighbor absorbs that sliver.
            idx = chosen;
            sites.push(self.lattice.sites()[idx]);
        }
        Trajectory::from_sites_trusted(self.lattice.dim(), sites)
    }
}

/// Outcome of the confined occupation experiment: how often the conditioned
/// walk spreads at least `eps0 |B|` sites each visited more than
/// `delta0 n / |B|` times.
#[derive(Clone, Debug)]
pub struct VisitedFractionReport {
    pub estimate: TailEstimate,
    pub ball_card: u64,
    /// Local-time threshold `delta0 n / |B|` defining a heavily visited site.
    pub level_threshold: f64,
    /// Site-count target `eps0 |B|` the level set must reach.
    pub target_card: f64,
}

/// Estimate how often the ball-confined walk visits a positive fraction of
/// the ball heavily: the event that more than `eps0 |B|` sites have local
/// time above `delta0 n / |B|`.
pub fn visited_fraction_experiment(
    sampler: &ConfinedSampler,
    delta0: f64,
    eps0: f64,
    samples: u64,
    base: RngStream,
) -> Result<VisitedFractionReport> {
    check_samples(samples)?;
    check_positive("delta0", delta0)?;
    check_positive("eps0", eps0)?;
    let card = sampler.lattice().card() as f64;
    let threshold = delta0 * sampler.horizon() as f64 / card;
    let target = eps0 * card;
    let hits = chunked_hits(samples, base, |rng| {
        let traj = sampler.sample(rng);
        let field = LocalTimeField::from_trajectory(&traj);
        field.level_count(threshold) as f64 >= target
    });
    Ok(VisitedFractionReport {
        estimate: TailEstimate::from_hits(
            hits,
            samples,
            format!(
                "confined walk puts local time > {threshold:.4} on at least \
                 {target:.2} sites"
            ),
        ),
        ball_card: sampler.lattice().card() as u64,
        level_threshold: threshold,
        target_card: target,
    })
}

/// A sample mean with its standard error.
#[derive(Clone, Copy, Debug)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
}

impl MeanEstimate {
    fn from_sums(sum: u128, sum_sq: u128, samples: u64) -> MeanEstimate {
        let n = samples as f64;
        let mean = sum as f64 / n;
        let var = if samples > 1 {
            ((sum_sq as f64 / n) - mean * mean).max(0.0) * n / (n - 1.0)
        } else {
            0.0
        };
        MeanEstimate {
            mean,
            stderr: (var / n).sqrt(),
            samples,
        }
    }
}

/// Monte Carlo moments of the level set `D(z) = { x : l_n(x) > z }` of one
/// walk, probed by an independent second walk.
#[derive(Clone, Debug)]
pub struct LevelMomentEstimate {
    pub z: f64,
    /// `E |D(z)|`.
    pub card: MeanEstimate,
    /// `E [ l'_n(D(z)) ]`: the second walk's occupation of the first walk's
    /// level set.
    pub mass: MeanEstimate,
    /// `E [ l'_n(D(z))^2 ]`.
    pub mass_sq: MeanEstimate,
}

/// [`level_moment_sweep`] for a single threshold.
pub fn level_moment_mc(
    dim: usize,
    n: usize,
    z: f64,
    samples: u64,
    base: RngStream,
) -> Result<LevelMomentEstimate> {
    Ok(level_moment_sweep(dim, n, &[z], samples, base)?.remove(0))
}

/// Estimate level-set moments for every threshold in `zs` from one shared
/// set of walk pairs. Thresholds must be finite and strictly increasing.
///
/// Each sample draws two independent walks; for every `z`, the sample
/// contributes the cardinality of the first walk's level set and the second
/// walk's total local time on it. All accumulation is exact integer
/// arithmetic, so results do not depend on worker count.
pub fn level_moment_sweep(
    dim: usize,
    n: usize,
    zs: &[f64],
    samples: u64,
    base: RngStream,
) -> Result<Vec<LevelMomentEstimate>> {
    check_dim(dim)?;
    check_trajectory_budget(n)?;
    check_samples(samples)?;
    if zs.is_empty() {
        return Err(SiltError::InvalidParameter(
            "at least one level threshold is required".into(),
        ));
    }
    for pair in zs.windows(2) {
        if !(pair[0] < pair[1]) {
            return Err(SiltError::InvalidParameter(
                "level thresholds must be strictly increasing".into(),
            ));
        }
    }
    if !zs.iter().all(|z| z.is_finite()) {
        return Err(SiltError::InvalidParameter(
            "level thresholds must be finite".into(),
        ));
    }

    // acc[i] = [count, sum card, sum card^2, sum mass^2 (= sum of the
    // mass_sq statistic), sum mass^4] ... laid out as
    // [sum card, sum card^2, sum mass, sum mass^2, sum mass^4].
    let zero: Vec<[u128; 5]> = vec![[0; 5]; zs.len()];
    let sums = chunked_sums(samples, base, zero, |rng, acc| {
        let first = LocalTimeField::from_trajectory(&walk_with_rng(dim, n, rng));
        let second = LocalTimeField::from_trajectory(&walk_with_rng(dim, n, rng));
        // bucket[p] collects contributions of sites whose local time
        // exceeds exactly the first p thresholds.
        let mut card_bucket = vec![0u64; zs.len() + 1];
        let mut mass_bucket = vec![0u64; zs.len() + 1];
        for (site, l) in first.iter() {
            let lf = l as f64;
            let pos = zs.partition_point(|&z| z < lf);
            if pos > 0 {
                card_bucket[pos] += 1;
                mass_bucket[pos] += second.visits(site) as u64;
            }
        }
        let mut card_suffix = 0u64;
        let mut mass_suffix = 0u64;
        for i in (0..zs.len()).rev() {
            card_suffix += card_bucket[i + 1];
            mass_suffix += mass_bucket[i + 1];
            let card = card_suffix as u128;
            let mass = mass_suffix as u128;
            let row = &mut acc[i];
            row[0] += card;
            row[1] += card * card;
            row[2] += mass;
            row[3] += mass * mass;
            row[4] += mass * mass * mass * mass;
        }
    });

    Ok(zs
        .iter()
        .zip(sums.into_iter())
        .map(|(&z, row)| LevelMomentEstimate {
            z,
            card: MeanEstimate::from_sums(row[0], row[1], samples),
            mass: MeanEstimate::from_sums(row[2], row[3], samples),
            mass_sq: MeanEstimate::from_sums(row[3], row[4], samples),
        })
        .collect())
}

/// A fitted power law `y ~ coeff * x^exponent` over log-log least squares.
#[derive(Clone, Copy, Debug)]
pub struct ExponentFit {
    pub exponent: f64,
    /// `ln coeff` of the fitted law.
    pub log_coeff: f64,
    /// Coefficient of determination of the log-log regression.
    pub r_squared: f64,
}

/// Least-squares fit of `ln y` against `ln x`.
///
/// Requires at least three points with positive finite coordinates and at
/// least two distinct abscissas; a constant response is rejected as
/// degenerate rather than reported as a zero exponent, because downstream
/// growth-rate checks would misread it.
pub fn fit_exponent(points: &[(f64, f64)]) -> Result<ExponentFit> {
    if points.len() < 3 {
        return Err(SiltError::DegenerateFit(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    for &(x, y) in points {
        if !(x.is_finite() && x > 0.0 && y.is_finite() && y > 0.0) {
            return Err(SiltError::DegenerateFit(format!(
                "points must be positive and finite, got ({x}, {y})"
            )));
        }
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let m = logs.len() as f64;
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    if sxx == 0.0 {
        return Err(SiltError::DegenerateFit(
            "all abscissas coincide".into(),
        ));
    }
    let syy: f64 = logs.iter().map(|p| (p.1 - mean_y) * (p.1 - mean_y)).sum();
    if syy == 0.0 {
        return Err(SiltError::DegenerateFit("constant response".into()));
    }
    let slope = sxy / sxx;
    let ss_res: f64 = logs
        .iter()
        .map(|p| {
            let r = (p.1 - mean_y) - slope * (p.0 - mean_x);
            r * r
        })
        .sum();
    Ok(ExponentFit {
        exponent: slope,
        log_coeff: mean_y - slope * mean_x,
        r_squared: 1.0 - ss_res / syy,
    })
}
