//! Local-time fields and the functionals built on them: self-intersection
//! local time (SILT), range, level sets, bands and restricted sums.
//!
//! Conventions: `l_n(x)` counts visits at times `0..=n`, so the total mass of
//! a field is `n + 1`; SILT is `sum_x l_n(x)^2`; level sets are strict,
//! `D(z) = { x : l_n(x) > z }`; bands are half-open, `lo <= l_n(x) < hi`.

use std::collections::HashMap;

use rustc_hash::FxBuildHasher;

use crate::walk::{Site, Trajectory};

/// Sparse visit-count map of one trajectory (or strand).
#[derive(Clone, Debug)]
pub struct LocalTimeField {
    dim: u8,
    horizon: usize,
    counts: HashMap<Site, u32, FxBuildHasher>,
}

/// The two scalars of a field that the variational inequalities relate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SiltSummary {
    pub silt: u64,
    pub range: u64,
    /// Steps `n`; the walk carries `n + 1` units of local time.
    pub horizon: usize,
}

impl LocalTimeField {
    pub fn from_trajectory(traj: &Trajectory) -> LocalTimeField {
        Self::from_sites(traj.dim(), traj.sites())
    }

    pub(crate) fn from_sites(dim: usize, sites: &[Site]) -> LocalTimeField {
        let mut counts: HashMap<Site, u32, FxBuildHasher> =
            HashMap::with_capacity_and_hasher(sites.len(), FxBuildHasher);
        for site in sites {
            *counts.entry(*site).or_insert(0) += 1;
        }
        LocalTimeField { dim: dim as u8, horizon: sites.len() - 1, counts }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    /// Steps `n` of the underlying walk.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// `l_n(x)`; zero off the support.
    pub fn visits(&self, site: &Site) -> u32 {
        self.counts.get(site).copied().unwrap_or(0)
    }

    /// Unordered iteration over the support. Use [`sorted_entries`] whenever
    /// the order can reach an output or a floating-point accumulation.
    ///
    /// [`sorted_entries`]: LocalTimeField::sorted_entries
    pub fn iter(&self) -> impl Iterator<Item = (&Site, u32)> {
        self.counts.iter().map(|(s, &c)| (s, c))
    }

    /// Support entries in coordinate order; deterministic.
    pub fn sorted_entries(&self) -> Vec<(Site, u32)> {
        let mut v: Vec<(Site, u32)> = self.counts.iter().map(|(s, &c)| (*s, c)).collect();
        v.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        v
    }

    /// Range `|R_n|`: number of distinct visited sites.
    pub fn range(&self) -> u64 {
        self.counts.len() as u64
    }

    /// Self-intersection local time `sum_x l_n(x)^2`.
    pub fn silt(&self) -> u64 {
        self.counts.values().map(|&c| (c as u64) * (c as u64)).sum()
    }

    pub fn summary(&self) -> SiltSummary {
        SiltSummary { silt: self.silt(), range: self.range(), horizon: self.horizon }
    }

    /// Strict level set `D(z) = { x : l_n(x) > z }`, sorted.
    pub fn level_set(&self, z: f64) -> Vec<Site> {
        let mut v: Vec<Site> = self
            .counts
            .iter()
            .filter(|(_, &c)| c as f64 > z)
            .map(|(s, _)| *s)
            .collect();
        v.sort_unstable();
        v
    }

    /// `|D(z)|` without materializing the set.
    pub fn level_count(&self, z: f64) -> u64 {
        self.counts.values().filter(|&&c| c as f64 > z).count() as u64
    }

    /// Half-open band `{ x : lo <= l_n(x) < hi }`, sorted.
    pub fn level_band(&self, lo: f64, hi: f64) -> Vec<Site> {
        let mut v: Vec<Site> = self
            .counts
            .iter()
            .filter(|(_, &c)| {
                let l = c as f64;
                lo <= l && l < hi
            })
            .map(|(s, _)| *s)
            .collect();
        v.sort_unstable();
        v
    }

    /// `sum_{x in sites} l_n(x)^2` over an arbitrary site collection
    /// (duplicates in the input are summed as given).
    pub fn restricted_silt<'a>(&self, sites: impl IntoIterator<Item = &'a Site>) -> u64 {
        sites
            .into_iter()
            .map(|s| {
                let c = self.visits(s) as u64;
                c * c
            })
            .sum()
    }

    /// `sum_{x in sites} l_n(x)`.
    pub fn restricted_mass<'a>(&self, sites: impl IntoIterator<Item = &'a Site>) -> u64 {
        sites.into_iter().map(|s| self.visits(s) as u64).sum()
    }
}

/// The pointwise bound `silt * range >= (n + 1)^2` (Cauchy-Schwarz applied to
/// the local-time field); it holds for every trajectory, with equality iff
/// the field is flat on its support.
pub fn check_jensen(s: &SiltSummary) -> bool {
    let mass = (s.horizon as u128) + 1;
    (s.silt as u128) * (s.range as u128) >= mass * mass
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::walk::simulate_walk;

    /// Hand-counted field of the path 0,1,0,1,0.
    #[test]
    fn local_times_hand_example() {
        let t = Trajectory::from_coords_1d(&[0, 1, 0, 1, 0]).unwrap();
        let f = LocalTimeField::from_trajectory(&t);
        assert_eq!(f.visits(&Site::new(&[0]).unwrap()), 3);
        assert_eq!(f.visits(&Site::new(&[1]).unwrap()), 2);
        assert_eq!(f.visits(&Site::new(&[2]).unwrap()), 0);
        assert_eq!(f.range(), 2);
        assert_eq!(f.silt(), 13, "3^2 + 2^2");
    }

    #[test]
    fn total_mass_is_steps_plus_one() {
        for (d, n) in [(1usize, 37usize), (2, 100), (3, 257), (8, 64)] {
            let t = simulate_walk(d, n, RngStream::new(11, d as u64)).unwrap();
            let f = LocalTimeField::from_trajectory(&t);
            let mass: u64 = f.iter().map(|(_, c)| c as u64).sum();
            assert_eq!(mass, (n + 1) as u64);
        }
    }

    #[test]
    fn level_sets_and_bands_hand_example() {
        let t = Trajectory::from_coords_1d(&[0, 1, 0, 1, 0]).unwrap();
        let f = LocalTimeField::from_trajectory(&t);
        assert_eq!(f.level_set(2.0), vec![Site::new(&[0]).unwrap()]);
        assert_eq!(f.level_count(2.0), 1);
        assert_eq!(f.level_count(1.9), 2, "strict threshold is real-valued");
        assert_eq!(f.level_count(3.0), 0);
        assert_eq!(f.level_band(2.0, 3.0), vec![Site::new(&[1]).unwrap()]);
        assert_eq!(f.level_band(1.0, 4.0).len(), 2);
        assert!(f.level_band(4.0, 10.0).is_empty());
    }

    #[test]
    fn level_set_decreases_in_z_and_partitions_into_bands() {
        let t = simulate_walk(2, 4096, RngStream::new(3, 0)).unwrap();
        let f = LocalTimeField::from_trajectory(&t);
        let zs = [0.0, 1.0, 2.0, 4.0, 8.0];
        for w in zs.windows(2) {
            assert!(f.level_count(w[0]) >= f.level_count(w[1]));
        }
        // range splits into bands [1,2), [2,4), [4,8), [8,inf)
        assert_eq!(
            f.level_band(1.0, 2.0).len()
                + f.level_band(2.0, 4.0).len()
                + f.level_band(4.0, 8.0).len()
                + f.level_band(8.0, f64::INFINITY).len(),
            f.range() as usize
        );
    }

    #[test]
    fn restricted_silt_over_full_support_matches_silt() {
        let t = simulate_walk(3, 2000, RngStream::new(9, 4)).unwrap();
        let f = LocalTimeField::from_trajectory(&t);
        let support: Vec<Site> = f.sorted_entries().iter().map(|(s, _)| *s).collect();
        assert_eq!(f.restricted_silt(support.iter()), f.silt());
        assert_eq!(f.restricted_mass(support.iter()), (t.steps() + 1) as u64);
        assert_eq!(f.restricted_silt(f.level_set(f64::INFINITY).iter()), 0);
    }

    #[test]
    fn jensen_holds_on_simulated_walks_and_detects_violation() {
        for d in 1..=3 {
            for n in [1usize, 2, 17, 512] {
                let t = simulate_walk(d, n, RngStream::new(21, n as u64)).unwrap();
                let f = LocalTimeField::from_trajectory(&t);
                assert!(check_jensen(&f.summary()), "d={d} n={n}");
            }
        }
        let bogus = SiltSummary { silt: 10, range: 2, horizon: 10 };
        assert!(!check_jensen(&bogus));
    }

    #[test]
    fn silt_of_straight_and_flat_paths() {
        // straight path: all local times 1, silt = n + 1, Jensen equality
        let t = Trajectory::from_coords_1d(&[0, 1, 2, 3, 4, 5]).unwrap();
        let f = LocalTimeField::from_trajectory(&t);
        assert_eq!(f.silt(), 6);
        let s = f.summary();
        assert_eq!((s.silt as u128) * (s.range as u128), 36);
        assert!(check_jensen(&s));
    }
}
