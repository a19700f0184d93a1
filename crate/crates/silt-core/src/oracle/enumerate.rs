//! Brute-force enumeration of every walk path of a given length.
//!
//! For small `(2 d)^n` this delivers the exact joint law of the
//! self-intersection local time and the range, plus the exact set of paths
//! confined to a ball. Nothing here scales; that is the point. These values
//! anchor the recursions and samplers that do scale.

use std::collections::BTreeMap;

use rustc_hash::FxHashMap;

use crate::error::{Result, SiltError};
use crate::walk::{check_dim, BallSpec, Site, Trajectory};

/// Hard cap on `(2 d)^n` for full enumeration.
pub const ENUMERATION_CAP: u128 = 10_000_000;

/// Tighter cap when every surviving path is also stored.
const CONFINED_CAP: u128 = 1 << 20;

fn path_count(dim: usize, n: usize) -> u128 {
    let mut total = 1u128;
    for _ in 0..n {
        total = total.saturating_mul(2 * dim as u128);
    }
    total
}

/// Exact joint distribution of `(silt, range)` over all `(2 d)^n` paths.
pub struct PathLaw {
    dim: usize,
    steps: usize,
    pmf: BTreeMap<(u64, u64), u64>,
    total: u64,
}

struct DfsState {
    field: FxHashMap<Site, u32>,
    silt: u64,
    range: u64,
}

impl DfsState {
    fn enter(&mut self, site: Site) {
        let count = self.field.entry(site).or_insert(0);
        *count += 1;
        self.silt += (2 * *count - 1) as u64;
        if *count == 1 {
            self.range += 1;
        }
    }

    fn exit(&mut self, site: Site) {
        let count = self.field.get_mut(&site).expect("exit without enter");
        self.silt -= (2 * *count - 1) as u64;
        if *count == 1 {
            self.range -= 1;
            self.field.remove(&site);
        } else {
            *count -= 1;
        }
    }
}

fn dfs(
    dim: usize,
    remaining: usize,
    site: Site,
    state: &mut DfsState,
    pmf: &mut BTreeMap<(u64, u64), u64>,
) {
    if remaining == 0 {
        *pmf.entry((state.silt, state.range)).or_insert(0) += 1;
        return;
    }
    for axis in 0..dim {
        for delta in [1i64, -1] {
            let next = site.shifted(axis, delta);
            state.enter(next);
            dfs(dim, remaining - 1, next, state, pmf);
            state.exit(next);
        }
    }
}

/// Enumerate all paths of `n` steps in dimension `dim`.
pub fn enumerate_paths(dim: usize, n: usize) -> Result<PathLaw> {
    check_dim(dim)?;
    let total = path_count(dim, n);
    if total > ENUMERATION_CAP {
        return Err(SiltError::EnumerationTooLarge(total));
    }
    let mut pmf = BTreeMap::new();
    let origin = Site::origin(dim)?;
    let mut state = DfsState {
        field: FxHashMap::default(),
        silt: 0,
        range: 0,
    };
    state.enter(origin);
    dfs(dim, n, origin, &mut state, &mut pmf);
    state.exit(origin);
    debug_assert!(state.field.is_empty());
    Ok(PathLaw {
        dim,
        steps: n,
        pmf,
        total: total as u64,
    })
}

impl PathLaw {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Exact joint counts, keyed by `(silt, range)`.
    pub fn pmf(&self) -> &BTreeMap<(u64, u64), u64> {
        &self.pmf
    }

    pub fn total_paths(&self) -> u64 {
        self.total
    }

    pub fn mean_silt(&self) -> f64 {
        let acc: u128 = self
            .pmf
            .iter()
            .map(|(&(s, _), &c)| s as u128 * c as u128)
            .sum();
        acc as f64 / self.total as f64
    }

    pub fn mean_range(&self) -> f64 {
        let acc: u128 = self
            .pmf
            .iter()
            .map(|(&(_, r), &c)| r as u128 * c as u128)
            .sum();
        acc as f64 / self.total as f64
    }

    /// Exact `P(silt > t)`.
    pub fn tail_silt_above(&self, t: f64) -> f64 {
        let acc: u64 = self
            .pmf
            .iter()
            .filter(|(&(s, _), _)| s as f64 > t)
            .map(|(_, &c)| c)
            .sum();
        acc as f64 / self.total as f64
    }

    /// Exact `P(range < t)`.
    pub fn tail_range_below(&self, t: f64) -> f64 {
        let acc: u64 = self
            .pmf
            .iter()
            .filter(|(&(_, r), _)| (r as f64) < t)
            .map(|(_, &c)| c)
            .sum();
        acc as f64 / self.total as f64
    }
}

/// All `n`-step paths from the origin that never leave `ball`, each equally
/// likely under the conditional law given survival.
pub fn confined_path_law(dim: usize, n: usize, ball: &BallSpec) -> Result<Vec<Trajectory>> {
    check_dim(dim)?;
    let total = path_count(dim, n);
    if total > CONFINED_CAP {
        return Err(SiltError::EnumerationTooLarge(total));
    }
    let origin = Site::origin(dim)?;
    if !ball.contains(&origin) {
        return Ok(Vec::new());
    }
    let mut survivors = Vec::new();
    let mut prefix = vec![origin];
    confined_dfs(dim, n, ball, &mut prefix, &mut survivors);
    Ok(survivors)
}

fn confined_dfs(
    dim: usize,
    remaining: usize,
    ball: &BallSpec,
    prefix: &mut Vec<Site>,
    out: &mut Vec<Trajectory>,
) {
    if remaining == 0 {
        out.push(Trajectory::from_sites_trusted(dim, prefix.clone()));
        return;
    }
    let site = *prefix.last().expect("prefix never empty");
    for axis in 0..dim {
        for delta in [1i64, -1] {
            let next = site.shifted(axis, delta);
            if !ball.contains(&next) {
                continue;
            }
            prefix.push(next);
            confined_dfs(dim, remaining - 1, ball, prefix, out);
            prefix.pop();
        }
    }
}
