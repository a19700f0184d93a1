//! The walk killed at the boundary of a lattice ball.
//!
//! A [`BallLattice`] flattens the ball's sites into a contiguous arena with
//! precomputed neighbor indices, so the killed transition operator becomes a
//! sparse matrix-vector product. On top of that sit exact survival
//! probabilities (raw and log-domain), full killed tables, and the principal
//! Dirichlet eigenpair obtained by power iteration on the lazy operator
//! `(I + K) / 2`, which is immune to the bipartite sign flip of the lattice.

use num_traits::Zero;
use rustc_hash::FxHashMap;

use crate::error::{Result, SiltError};
use crate::walk::{check_dim, BallSpec, Site};

/// Sentinel marking a neighbor outside the ball (mass moved there dies).
const OUTSIDE: u32 = u32::MAX;

/// Maximum power-iteration sweeps before giving up on eigen convergence.
const MAX_EIGEN_SWEEPS: usize = 2_000_000;

/// A lattice ball with flattened site indexing and neighbor tables.
pub struct BallLattice {
    dim: usize,
    sites: Vec<Site>,
    /// `nbrs[2 * dim * i .. 2 * dim * (i + 1)]` lists the in-ball neighbors
    /// of site `i` in fixed axis-major order (`+axis`, then `-axis`), with
    /// [`OUTSIDE`] for killed directions.
    nbrs: Vec<u32>,
    origin: u32,
}

impl BallLattice {
    pub fn new(dim: usize, ball: &BallSpec) -> Result<BallLattice> {
        check_dim(dim)?;
        let sites = ball.lattice_sites(dim)?;
        if sites.len() > OUTSIDE as usize {
            return Err(SiltError::EnumerationTooLarge(sites.len() as u128));
        }
        let index: FxHashMap<Site, u32> = sites
            .iter()
            .enumerate()
            .map(|(i, s)| (*s, i as u32))
            .collect();
        let mut nbrs = Vec::with_capacity(sites.len() * 2 * dim);
        for site in &sites {
            for axis in 0..dim {
                for delta in [1i64, -1] {
                    let nbr = site.shifted(axis, delta);
                    nbrs.push(index.get(&nbr).copied().unwrap_or(OUTSIDE));
                }
            }
        }
        let origin = *index
            .get(&Site::origin(dim)?)
            .expect("every nonempty ball contains the origin");
        Ok(BallLattice {
            dim,
            sites,
            nbrs,
            origin,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn card(&self) -> usize {
        self.sites.len()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn origin_index(&self) -> usize {
        self.origin as usize
    }

    pub(crate) fn neighbors_of(&self, i: usize) -> &[u32] {
        let deg = 2 * self.dim;
        &self.nbrs[deg * i..deg * (i + 1)]
    }

    /// One killed step: `dst[x] = (2 d)^{-1} sum_{y ~ x, y in ball} src[y]`.
    ///
    /// The operator is self-adjoint, so the same routine serves forward
    /// evolution of masses and backward evolution of survival functions.
    pub(crate) fn killed_step(&self, src: &[f64], dst: &mut [f64]) {
        let inv_deg = 1.0 / (2 * self.dim) as f64;
        for (i, cell) in dst.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &j in self.neighbors_of(i) {
                if j != OUTSIDE {
                    acc += src[j as usize];
                }
            }
            *cell = acc * inv_deg;
        }
    }
}

/// Dense killed law: slice `k` is the sub-probability vector of the walk
/// alive inside the ball after `k` steps.
pub struct KilledTable {
    lattice: BallLattice,
    slices: Vec<Vec<f64>>,
}

/// Evolve the killed walk from the origin for `n` steps, keeping all slices.
pub fn killed_table(dim: usize, n: usize, ball: &BallSpec, budget: u64) -> Result<KilledTable> {
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
    let mut slices = Vec::with_capacity(n + 1);
    let mut first = vec![0.0; lattice.card()];
    first[lattice.origin_index()] = 1.0;
    slices.push(first);
    for k in 1..=n {
        let mut next = vec![0.0; lattice.card()];
        lattice.killed_step(&slices[k - 1], &mut next);
        slices.push(next);
    }
    Ok(KilledTable { lattice, slices })
}

impl KilledTable {
    pub fn lattice(&self) -> &BallLattice {
        &self.lattice
    }

    pub fn horizon(&self) -> usize {
        self.slices.len() - 1
    }

    /// Probability of being at `site` after `k` steps without having left.
    pub fn prob(&self, k: usize, site: &Site) -> f64 {
        self.lattice
            .sites
            .binary_search(site)
            .map(|i| self.slices[k][i])
            .unwrap_or(0.0)
    }

    /// Survival probability through `k` steps (sum of slice `k`).
    pub fn survival(&self, k: usize) -> f64 {
        self.slices[k].iter().sum()
    }
}

/// Probability that the walk started at the origin stays inside `ball` for
/// all of the first `n` steps, by raw rolling evolution.
///
/// All arithmetic is plain f64; for small balls the slice values are dyadic
/// rationals and the result is exact.
pub fn survival_prob(dim: usize, n: usize, ball: &BallSpec) -> Result<f64> {
    let lattice = BallLattice::new(dim, ball)?;
    let mut cur = vec![0.0; lattice.card()];
    cur[lattice.origin_index()] = 1.0;
    let mut next = vec![0.0; lattice.card()];
    for _ in 0..n {
        lattice.killed_step(&cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(cur.iter().sum())
}

/// `ln` of the survival probability, stable far past f64 underflow.
///
/// Each step rescales the alive mass to total one and accumulates the log of
/// the per-step survival factor, so horizons with survival below `1e-308`
/// still come out with full relative accuracy. Returns `-inf` when the walk
/// cannot survive at all.
pub fn log_survival_prob(dim: usize, n: usize, ball: &BallSpec) -> Result<f64> {
    let lattice = BallLattice::new(dim, ball)?;
    let mut cur = vec![0.0; lattice.card()];
    cur[lattice.origin_index()] = 1.0;
    let mut next = vec![0.0; lattice.card()];
    let mut log_acc = 0.0f64;
    for _ in 0..n {
        lattice.killed_step(&cur, &mut next);
        let alive: f64 = next.iter().sum();
        if alive.is_zero() {
            return Ok(f64::NEG_INFINITY);
        }
        let inv = 1.0 / alive;
        for v in next.iter_mut() {
            *v *= inv;
        }
        log_acc += alive.ln();
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(log_acc)
}

/// Principal Dirichlet eigenpair of the killed transition operator.
pub struct EigenPair {
    /// Largest eigenvalue of the killed operator, in `(0, 1)`.
    pub lambda: f64,
    /// Eigenfunction sampled on the ball's sites, sup-normalized to 1,
    /// strictly positive inside.
    pub phi: Vec<(Site, f64)>,
}

/// Power iteration for the principal eigenpair, run on the lazy operator
/// `(I + K) / 2` whose spectrum is nonnegative, so the bipartite `-lambda`
/// eigenvalue of the lattice cannot stall convergence. Iterates until the
/// residual `max_x |(K phi)(x) - lambda phi(x)|` drops below `tol`.
pub fn principal_eigen(dim: usize, ball: &BallSpec, tol: f64) -> Result<EigenPair> {
    if !(tol > 0.0) {
        return Err(SiltError::InvalidParameter(format!(
            "eigen tolerance must be positive, got {tol}"
        )));
    }
    let lattice = BallLattice::new(dim, ball)?;
    let m = lattice.card();
    let mut v = vec![1.0f64; m];
    let mut kv = vec![0.0f64; m];
    for sweep in 0..MAX_EIGEN_SWEEPS {
        lattice.killed_step(&v, &mut kv);
        // Rayleigh quotient of K and residual in sup norm.
        let mut num = 0.0;
        let mut den = 0.0;
        for (a, b) in v.iter().zip(kv.iter()) {
            num += a * b;
            den += a * a;
        }
        let lambda = num / den;
        let mut residual = 0.0f64;
        for (a, b) in v.iter().zip(kv.iter()) {
            residual = residual.max((b - lambda * a).abs());
        }
        // Sup norm of v is maintained at 1, so the residual is relative.
        if residual < tol {
            if !(lambda > 0.0) {
                return Err(SiltError::NoConvergence(sweep));
            }
            let sup = v.iter().cloned().fold(0.0f64, f64::max);
            let phi = lattice
                .sites
                .iter()
                .zip(v.iter())
                .map(|(s, &x)| (*s, x / sup))
                .collect();
            return Ok(EigenPair { lambda, phi });
        }
        // Lazy step: w = (v + K v) / 2, then sup-normalize.
        let mut sup = 0.0f64;
        for (a, b) in v.iter_mut().zip(kv.iter()) {
            *a = 0.5 * (*a + b);
            sup = sup.max(a.abs());
        }
        if sup.is_zero() {
            // Everything died in one lazy step: no positive eigenpair.
            return Err(SiltError::NoConvergence(sweep));
        }
        let inv = 1.0 / sup;
        for a in v.iter_mut() {
            *a *= inv;
        }
    }
    Err(SiltError::NoConvergence(MAX_EIGEN_SWEEPS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::Norm;
    use approx::assert_abs_diff_eq;

    fn interval(radius: f64) -> BallSpec {
        BallSpec::new(radius, Norm::Euclidean).unwrap()
    }

    #[test]
    fn lattice_neighbors_point_back() {
        let lat = BallLattice::new(2, &interval(2.5)).unwrap();
        for i in 0..lat.card() {
            for &j in lat.neighbors_of(i) {
                if j == OUTSIDE {
                    continue;
                }
                assert!(lat
                    .neighbors_of(j as usize)
                    .contains(&(i as u32)));
                let a = lat.sites[i];
                let b = lat.sites[j as usize];
                let l1: i64 = (0..2).map(|ax| (a.coord(ax) - b.coord(ax)).abs()).sum();
                assert_eq!(l1, 1);
            }
        }
    }

    #[test]
    fn interval_survival_matches_closed_form() {
        // Radius-1 interval in d = 1: survival halves every other step,
        // exactly 2^(-floor(n/2)) in exact dyadic arithmetic.
        for n in 0..=30usize {
            let p = survival_prob(1, n, &interval(1.0)).unwrap();
            let expected = 0.5f64.powi((n / 2) as i32);
            assert!(p == expected, "n={n}: {p} vs {expected}");
        }
    }

    #[test]
    fn zero_radius_ball_kills_instantly() {
        let p = survival_prob(1, 1, &interval(0.0)).unwrap();
        assert_eq!(p, 0.0);
        let l = log_survival_prob(1, 3, &interval(0.0)).unwrap();
        assert_eq!(l, f64::NEG_INFINITY);
        assert_eq!(survival_prob(1, 0, &interval(0.0)).unwrap(), 1.0);
    }

    #[test]
    fn log_route_matches_raw_route() {
        for (dim, n, radius) in [(1usize, 12usize, 3.0f64), (2, 10, 2.5), (3, 8, 2.0)] {
            let ball = interval(radius);
            let raw = survival_prob(dim, n, &ball).unwrap();
            let log = log_survival_prob(dim, n, &ball).unwrap();
            assert_abs_diff_eq!(log, raw.ln(), epsilon = 1e-12);
        }
    }

    #[test]
    fn log_route_survives_underflow() {
        // Survival 2^(-2048) underflows f64; the log route reports it fine.
        let l = log_survival_prob(1, 4096, &interval(1.0)).unwrap();
        let expected = -2048.0 * std::f64::consts::LN_2;
        assert_abs_diff_eq!(l, expected, epsilon = 1e-9 * expected.abs());
    }

    #[test]
    fn killed_table_mass_decreases_and_matches_survival() {
        let ball = interval(2.0);
        let table = killed_table(2, 10, &ball, u64::MAX).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..=10usize {
            let s = table.survival(k);
            assert!(s <= prev + 1e-15);
            prev = s;
            assert_abs_diff_eq!(s, survival_prob(2, k, &ball).unwrap(), epsilon = 1e-14);
        }
        // Sign-flip symmetry of the ball and the start.
        let p = table.prob(10, &Site::new(&[1, 0]).unwrap());
        assert_eq!(p, table.prob(10, &Site::new(&[-1, 0]).unwrap()));
        assert_eq!(p, table.prob(10, &Site::new(&[0, 1]).unwrap()));
    }

    #[test]
    fn killed_table_budget() {
        assert!(matches!(
            killed_table(3, 1000, &interval(20.0), 1024),
            Err(SiltError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn interval_eigenpair_is_exact() {
        // Three-point interval: lambda = cos(pi/4) = 1/sqrt(2), eigenfunction
        // proportional to (1/sqrt(2), 1, 1/sqrt(2)).
        let pair = principal_eigen(1, &interval(1.0), 1e-13).unwrap();
        assert_abs_diff_eq!(pair.lambda, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-11);
        assert_eq!(pair.phi.len(), 3);
        assert_abs_diff_eq!(pair.phi[1].1, 1.0, epsilon = 0.0);
        assert_abs_diff_eq!(pair.phi[0].1, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-10);
        assert_abs_diff_eq!(pair.phi[2].1, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-10);
    }

    #[test]
    fn eigenvalue_grows_with_radius() {
        let mut last = 0.0;
        for radius in [2.0, 4.0, 8.0] {
            let pair = principal_eigen(2, &interval(radius), 1e-11).unwrap();
            assert!(pair.lambda > last && pair.lambda < 1.0);
            last = pair.lambda;
            for (_, value) in &pair.phi {
                assert!(*value > 0.0 && *value <= 1.0);
            }
        }
    }

    #[test]
    fn eigen_residual_is_certified() {
        // Re-verify the returned pair against a fresh operator application.
        let ball = interval(3.0);
        let pair = principal_eigen(2, &ball, 1e-12).unwrap();
        let lat = BallLattice::new(2, &ball).unwrap();
        let v: Vec<f64> = pair.phi.iter().map(|(_, x)| *x).collect();
        let mut kv = vec![0.0; v.len()];
        lat.killed_step(&v, &mut kv);
        for (a, b) in v.iter().zip(kv.iter()) {
            assert!((b - pair.lambda * a).abs() < 1e-10);
        }
    }
}
