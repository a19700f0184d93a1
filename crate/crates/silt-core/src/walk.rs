//! Lattice geometry and simple-random-walk simulation on `Z^d`.
//!
//! Coordinates are `i64`, so all site arithmetic used by the decomposition
//! (differences, reflections, squared norms) is exact for `|coord| <= 2^31`.
//! The walk convention throughout the crate: a trajectory of `n` steps visits
//! `n + 1` sites `S_0 = 0, S_1, ..., S_n`, and time `0` counts as a visit.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::rng::RngStream;
use crate::{Result, SiltError};

/// Largest supported dimension.
pub const MAX_DIM: usize = 8;

/// Hard cap on sites per trajectory (`~1.2 GiB` of `Site` storage). The
/// simulator refuses larger requests instead of swapping.
pub const MAX_TRAJECTORY_SITES: usize = 1 << 24;

/// A lattice point of `Z^d`, `d <= MAX_DIM`. Unused lanes are zero, so
/// derived equality, hashing and ordering are exact on the active prefix.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site {
    coords: [i64; MAX_DIM],
    dim: u8,
}

impl std::fmt::Debug for Site {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Site{:?}", self.coords())
    }
}

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        return Err(SiltError::DimensionOutOfRange(dim));
    }
    Ok(())
}

impl Site {
    pub fn origin(dim: usize) -> Result<Site> {
        check_dim(dim)?;
        Ok(Site { coords: [0; MAX_DIM], dim: dim as u8 })
    }

    pub fn new(coords: &[i64]) -> Result<Site> {
        check_dim(coords.len())?;
        let mut c = [0i64; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Site { coords: c, dim: coords.len() as u8 })
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.dim as usize]
    }

    pub fn coord(&self, axis: usize) -> i64 {
        self.coords[axis]
    }

    /// This site moved by `delta` along `axis`.
    pub fn shifted(&self, axis: usize, delta: i64) -> Site {
        debug_assert!(axis < self.dim());
        let mut out = *self;
        out.coords[axis] += delta;
        out
    }

    /// The reflection `anchor - self`, the change of frame used when a strand
    /// is split at its midpoint.
    pub fn reflect_through(&self, anchor: &Site) -> Site {
        debug_assert_eq!(self.dim, anchor.dim);
        let mut out = *anchor;
        for i in 0..self.dim as usize {
            out.coords[i] -= self.coords[i];
        }
        out
    }

    /// Squared euclidean norm, exact.
    pub fn norm_sq(&self) -> u128 {
        self.coords()
            .iter()
            .map(|&c| (c as i128 * c as i128) as u128)
            .sum()
    }

    /// `l^1` norm, exact.
    pub fn norm_l1(&self) -> u64 {
        self.coords().iter().map(|&c| c.unsigned_abs()).sum()
    }

    /// Sup norm, exact.
    pub fn norm_sup(&self) -> u64 {
        self.coords().iter().map(|&c| c.unsigned_abs()).max().unwrap_or(0)
    }
}

/// Norm used for ball membership. Euclidean is the default everywhere; sup is
/// exposed as an option.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Norm {
    #[default]
    Euclidean,
    Sup,
}

/// A centered ball `{ x : ||x|| <= radius }` on the lattice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallSpec {
    pub radius: f64,
    pub norm: Norm,
}

impl BallSpec {
    pub fn new(radius: f64, norm: Norm) -> Result<BallSpec> {
        if !radius.is_finite() || radius < 0.0 {
            return Err(SiltError::InvalidParameter(format!(
                "ball radius must be finite and >= 0, got {radius}"
            )));
        }
        Ok(BallSpec { radius, norm })
    }

    pub fn euclidean(radius: f64) -> Result<BallSpec> {
        BallSpec::new(radius, Norm::Euclidean)
    }

    pub fn sup(radius: f64) -> Result<BallSpec> {
        BallSpec::new(radius, Norm::Sup)
    }

    /// Membership test `||x|| <= radius`. Squared integer norms are compared
    /// against `radius^2`, so boundary sites are classified exactly whenever
    /// `radius^2` is representable (integers up to 2^53 are).
    pub fn contains(&self, site: &Site) -> bool {
        match self.norm {
            Norm::Euclidean => (site.norm_sq() as f64) <= self.radius * self.radius,
            Norm::Sup => (site.norm_sup() as f64) <= self.radius,
        }
    }

    /// All lattice sites of the ball in `dim` dimensions, sorted.
    pub fn lattice_sites(&self, dim: usize) -> Result<Vec<Site>> {
        check_dim(dim)?;
        let r = self.radius.floor() as i64;
        let mut out = Vec::new();
        let mut cur = vec![-r; dim];
        loop {
            let site = Site::new(&cur)?;
            if self.contains(&site) {
                out.push(site);
            }
            // odometer over the bounding box [-r, r]^dim
            let mut axis = dim;
            loop {
                if axis == 0 {
                    out.sort_unstable();
                    return Ok(out);
                }
                axis -= 1;
                if cur[axis] < r {
                    cur[axis] += 1;
                    for c in cur.iter_mut().skip(axis + 1) {
                        *c = -r;
                    }
                    break;
                }
            }
        }
    }

    /// Number of lattice sites of the ball.
    pub fn card(&self, dim: usize) -> Result<usize> {
        Ok(self.lattice_sites(dim)?.len())
    }

    /// Smallest ball of the given norm whose lattice point count reaches
    /// `target`. Radii grow through the discrete shells of the norm, so the
    /// result is exact and deterministic.
    pub fn with_card_at_least(dim: usize, target: usize, norm: Norm) -> Result<BallSpec> {
        check_dim(dim)?;
        if target == 0 {
            return BallSpec::new(0.0, norm);
        }
        match norm {
            Norm::Sup => {
                let mut k = 0u64;
                loop {
                    let side = 2 * k + 1;
                    if side.pow(dim as u32) as usize >= target {
                        return BallSpec::new(k as f64, norm);
                    }
                    k += 1;
                }
            }
            Norm::Euclidean => {
                // Enumerate squared norms inside growing boxes until the
                // target-th smallest shell is safely interior to the box.
                let mut r = (target as f64).powf(1.0 / dim as f64).ceil() as i64 + 1;
                loop {
                    let mut norms: Vec<u128> = Vec::new();
                    let mut cur = vec![-r; dim];
                    loop {
                        let nsq: u128 = cur.iter().map(|&c| (c * c) as u128).sum();
                        norms.push(nsq);
                        let mut axis = dim;
                        let mut done = true;
                        while axis > 0 {
                            axis -= 1;
                            if cur[axis] < r {
                                cur[axis] += 1;
                                for c in cur.iter_mut().skip(axis + 1) {
                                    *c = -r;
                                }
                                done = false;
                                break;
                            }
                        }
                        if done {
                            break;
                        }
                    }
                    norms.sort_unstable();
                    let m = norms[target - 1];
                    if m <= (r * r) as u128 {
                        // Radius covering shell m exactly: nudge up so that
                        // radius^2 >= m despite sqrt rounding; the next shell
                        // is at least m + 1, far beyond one ulp.
                        let mut radius = (m as f64).sqrt();
                        while radius * radius < m as f64 {
                            radius = f64::from_bits(radius.to_bits() + 1);
                        }
                        return BallSpec::new(radius, norm);
                    }
                    r *= 2;
                }
            }
        }
    }
}

/// Where a trajectory first leaves a ball, if it does.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitOutcome {
    /// Smallest time index `k` with `||S_k|| > radius`.
    Exit(usize),
    /// The whole trajectory stays inside the ball.
    Survived,
}

/// An `n`-step nearest-neighbor path started at the origin (or, for strands,
/// at a re-rooted origin). Holds the `n + 1` visited sites.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trajectory {
    dim: u8,
    sites: Vec<Site>,
}

impl Trajectory {
    /// Build from explicit sites, validating consistency and unit steps.
    pub fn from_sites(sites: Vec<Site>) -> Result<Trajectory> {
        if sites.is_empty() {
            return Err(SiltError::InvalidParameter("empty trajectory".into()));
        }
        let dim = sites[0].dim();
        check_dim(dim)?;
        for w in sites.windows(2) {
            if w[1].dim() != dim {
                return Err(SiltError::InvalidParameter("mixed dimensions".into()));
            }
            let step: u64 = (0..dim).map(|i| (w[1].coord(i) - w[0].coord(i)).unsigned_abs()).sum();
            if step != 1 {
                return Err(SiltError::InvalidParameter(format!(
                    "non-unit step from {:?} to {:?}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Trajectory { dim: dim as u8, sites })
    }

    /// Internal constructor for sites already known to be a valid path.
    pub(crate) fn from_sites_trusted(dim: usize, sites: Vec<Site>) -> Trajectory {
        debug_assert!(Trajectory::from_sites(sites.clone()).is_ok());
        Trajectory { dim: dim as u8, sites }
    }

    /// One-dimensional helper for literal paths in tests and docs.
    pub fn from_coords_1d(coords: &[i64]) -> Result<Trajectory> {
        let sites = coords.iter().map(|&c| Site::new(&[c])).collect::<Result<Vec<_>>>()?;
        Trajectory::from_sites(sites)
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    /// Number of steps `n`; the trajectory holds `n + 1` sites.
    pub fn steps(&self) -> usize {
        self.sites.len() - 1
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn site(&self, k: usize) -> &Site {
        &self.sites[k]
    }

    pub fn start(&self) -> &Site {
        &self.sites[0]
    }

    pub fn end(&self) -> &Site {
        &self.sites[self.sites.len() - 1]
    }
}

/// Simulate `n` steps of the simple symmetric walk on `Z^dim`, drawing from
/// the given stream. Each step is uniform over the `2 * dim` unit moves.
pub fn simulate_walk(dim: usize, n: usize, stream: RngStream) -> Result<Trajectory> {
    check_dim(dim)?;
    check_trajectory_budget(n)?;
    Ok(walk_with_rng(dim, n, &mut stream.rng()))
}

pub(crate) fn check_trajectory_budget(n: usize) -> Result<()> {
    if n + 1 > MAX_TRAJECTORY_SITES {
        return Err(SiltError::BudgetExceeded {
            required: ((n + 1) * std::mem::size_of::<Site>()) as u64,
            budget: (MAX_TRAJECTORY_SITES * std::mem::size_of::<Site>()) as u64,
        });
    }
    Ok(())
}

/// Walk generation from an already-positioned generator, for callers that
/// interleave walk steps with other draws from the same stream. Arguments
/// must be pre-validated.
pub(crate) fn walk_with_rng(dim: usize, n: usize, rng: &mut ChaCha8Rng) -> Trajectory {
    let mut sites = Vec::with_capacity(n + 1);
    let mut cur = Site {
        coords: [0; MAX_DIM],
        dim: dim as u8,
    };
    sites.push(cur);
    for _ in 0..n {
        let mv = rng.random_range(0..2 * dim);
        cur = cur.shifted(mv / 2, if mv % 2 == 0 { 1 } else { -1 });
        sites.push(cur);
    }
    Trajectory { dim: dim as u8, sites }
}

/// First exit of a trajectory from a ball: the smallest `k` with
/// `||S_k|| > radius`, or `Survived` if there is none.
pub fn exit_time(traj: &Trajectory, ball: &BallSpec) -> ExitOutcome {
    for (k, site) in traj.sites().iter().enumerate() {
        if !ball.contains(site) {
            return ExitOutcome::Exit(k);
        }
    }
    ExitOutcome::Survived
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_bounds_are_enforced() {
        assert!(matches!(Site::origin(0), Err(SiltError::DimensionOutOfRange(0))));
        assert!(matches!(Site::origin(9), Err(SiltError::DimensionOutOfRange(9))));
        assert!(simulate_walk(0, 4, RngStream::new(1, 0)).is_err());
        for d in 1..=MAX_DIM {
            assert!(simulate_walk(d, 16, RngStream::new(1, 0)).is_ok());
        }
    }

    #[test]
    fn walk_shape_and_steps() {
        let t = simulate_walk(3, 100, RngStream::new(42, 0)).unwrap();
        assert_eq!(t.steps(), 100);
        assert_eq!(t.sites().len(), 101);
        assert_eq!(t.start(), &Site::origin(3).unwrap());
        for w in t.sites().windows(2) {
            let l1: u64 = (0..3).map(|i| (w[1].coord(i) - w[0].coord(i)).unsigned_abs()).sum();
            assert_eq!(l1, 1);
        }
    }

    #[test]
    fn walk_is_reproducible_and_streams_differ() {
        let a = simulate_walk(2, 64, RngStream::new(5, 1)).unwrap();
        let b = simulate_walk(2, 64, RngStream::new(5, 1)).unwrap();
        let c = simulate_walk(2, 64, RngStream::new(5, 2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    /// Each of the 2d moves should appear with frequency 1/(2d).
    #[test]
    fn step_frequencies_are_uniform() {
        let d = 3;
        let n = 1_000_000usize;
        let t = simulate_walk(d, n, RngStream::new(7, 0)).unwrap();
        let mut counts = vec![0u64; 2 * d];
        for w in t.sites().windows(2) {
            for axis in 0..d {
                match w[1].coord(axis) - w[0].coord(axis) {
                    1 => counts[2 * axis] += 1,
                    -1 => counts[2 * axis + 1] += 1,
                    _ => {}
                }
            }
        }
        let p = 1.0 / (2.0 * d as f64);
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        for &c in &counts {
            let freq = c as f64 / n as f64;
            assert!(
                (freq - p).abs() <= 5.0 * sigma,
                "move frequency {freq} outside 5 sigma of {p}"
            );
        }
    }

    #[test]
    fn exit_time_hand_example() {
        // Walk 0 -> 1 -> 2 against radius 1: first site outside is index 2.
        let t = Trajectory::from_coords_1d(&[0, 1, 2]).unwrap();
        let ball = BallSpec::euclidean(1.0).unwrap();
        assert_eq!(exit_time(&t, &ball), ExitOutcome::Exit(2));
        let wide = BallSpec::euclidean(10.0).unwrap();
        assert_eq!(exit_time(&t, &wide), ExitOutcome::Survived);
    }

    #[test]
    fn origin_is_inside_every_ball() {
        for d in 1..=4 {
            let o = Site::origin(d).unwrap();
            for r in [0.0, 0.5, 1.0, 3.7] {
                assert!(BallSpec::euclidean(r).unwrap().contains(&o));
                assert!(BallSpec::sup(r).unwrap().contains(&o));
            }
        }
    }

    #[test]
    fn ball_cards_match_hand_counts() {
        // d=1 euclidean radius 1: {-1, 0, 1}
        assert_eq!(BallSpec::euclidean(1.0).unwrap().card(1).unwrap(), 3);
        // d=2 euclidean radius 1: origin + 4 neighbors
        assert_eq!(BallSpec::euclidean(1.0).unwrap().card(2).unwrap(), 5);
        // d=2 sup radius 1: 3x3 box
        assert_eq!(BallSpec::sup(1.0).unwrap().card(2).unwrap(), 9);
        // d=3 euclidean radius sqrt(2): 1 + 6 + 12
        let b = BallSpec::with_card_at_least(3, 8, Norm::Euclidean).unwrap();
        assert_eq!(b.card(3).unwrap(), 7, "radius 1 shell holds 7 < 8 sites");
    }

    #[test]
    fn smallest_ball_reaches_target_and_previous_shell_does_not() {
        for (dim, target) in [(1, 11), (2, 30), (3, 64), (3, 257)] {
            let b = BallSpec::with_card_at_least(dim, target, Norm::Euclidean).unwrap();
            let card = b.card(dim).unwrap();
            assert!(card >= target);
            // shrinking below the chosen shell must fall under the target
            let smaller = BallSpec::euclidean((b.radius * b.radius - 1.0).max(0.0).sqrt()).unwrap();
            assert!(smaller.card(dim).unwrap() < target);
            let s = BallSpec::with_card_at_least(dim, target, Norm::Sup).unwrap();
            assert!(s.card(dim).unwrap() >= target);
        }
    }

    #[test]
    fn reflection_is_involutive_and_exact() {
        let a = Site::new(&[3, -4, 5]).unwrap();
        let anchor = Site::new(&[1, 1, -2]).unwrap();
        let r = a.reflect_through(&anchor);
        assert_eq!(r.coords(), &[-2, 5, -7]);
        assert_eq!(r.reflect_through(&anchor), a);
    }
}
