//! Ratio comparison of walk laws at two times, far from the origin.
//!
//! The quantity of interest is the largest value of `p_m(x) / p_{m+H}(x)`
//! over all times `m = 1..=n/2` (with `H = n - n/2` fixed) and all sites
//! beyond distance `sqrt(n)`, which calibrates how much a walk law can
//! exceed its later self out in the tail. Two implementations are provided:
//! a dense scan over full transition tables, and a scan over the quotient of
//! `Z^d` by coordinate permutations and sign flips. The law is constant on
//! those orbits, and the quotient is smaller by a factor approaching
//! `2^d d!`, which is what makes horizons like `n = 256` in `d = 3`
//! tractable. Both routes must agree; the test suite holds them to that.

use rustc_hash::FxHashMap;

use crate::error::{Result, SiltError};
use crate::oracle::transition::TransitionTable;
use crate::walk::{check_dim, Norm, Site, MAX_DIM};

/// Sentinel for a neighbor orbit beyond the tracked radius.
const OUT: u32 = u32::MAX;

/// Cap on orbit-space states (keeps the four DP buffers plus neighbor
/// tables within sane memory).
const ORBIT_STATE_CAP: u128 = 4_000_000;

/// Canonical orbit representative: absolute coordinates, sorted descending.
fn canonical(site: &Site) -> Site {
    let mut c = [0i64; MAX_DIM];
    let d = site.dim();
    for (lane, &v) in c.iter_mut().zip(site.coords()) {
        *lane = v.abs();
    }
    c[..d].sort_unstable_by(|a, b| b.cmp(a));
    Site::new(&c[..d]).expect("canonical form preserves dimension")
}

/// The quotient of the ball `{ |x|_1 <= max_sum }` by lattice symmetries,
/// with neighbor transitions precomputed.
struct OrbitSpace {
    reps: Vec<Site>,
    /// `2 * dim` entries per orbit: index of the canonical form of each
    /// coordinate step, or [`OUT`].
    nbrs: Vec<u32>,
    /// `region[s]` = number of orbits with `|x|_1 <= s`.
    region: Vec<usize>,
    dim: usize,
    max_sum: usize,
}

impl OrbitSpace {
    fn new(dim: usize, max_sum: usize) -> Result<OrbitSpace> {
        check_dim(dim)?;
        let count = count_orbits(dim, max_sum);
        if count > ORBIT_STATE_CAP {
            return Err(SiltError::EnumerationTooLarge(count));
        }

        let mut reps = Vec::with_capacity(count as usize);
        let mut coords = [0i64; MAX_DIM];
        collect_orbits(dim, 0, max_sum as i64, max_sum as i64, &mut coords, &mut reps);
        reps.sort_unstable_by_key(|s| (s.norm_l1(), *s));

        let mut region = vec![0usize; max_sum + 1];
        for site in &reps {
            region[site.norm_l1() as usize] += 1;
        }
        let mut acc = 0;
        for slot in region.iter_mut() {
            acc += *slot;
            *slot = acc;
        }

        let index: FxHashMap<Site, u32> = reps
            .iter()
            .enumerate()
            .map(|(i, s)| (*s, i as u32))
            .collect();
        let mut nbrs = Vec::with_capacity(reps.len() * 2 * dim);
        for site in &reps {
            for axis in 0..dim {
                for delta in [1i64, -1] {
                    let nbr = canonical(&site.shifted(axis, delta));
                    if nbr.norm_l1() as usize > max_sum {
                        nbrs.push(OUT);
                    } else {
                        nbrs.push(index[&nbr]);
                    }
                }
            }
        }
        Ok(OrbitSpace {
            reps,
            nbrs,
            region,
            dim,
            max_sum,
        })
    }

    /// Number of orbits with `|x|_1 <= s`.
    fn region_len(&self, s: usize) -> usize {
        self.region[s.min(self.max_sum)]
    }
}

fn count_orbits(dim: usize, max_sum: usize) -> u128 {
    // Orbits are non-increasing nonnegative tuples; count them by the same
    // recursion used to collect them, without materializing anything.
    fn rec(axes_left: usize, bound: usize, remaining: usize) -> u128 {
        if axes_left == 0 {
            return 1;
        }
        let mut acc = 0u128;
        for v in 0..=bound.min(remaining) {
            acc += rec(axes_left - 1, v, remaining - v);
        }
        acc
    }
    rec(dim, max_sum, max_sum)
}

fn collect_orbits(
    dim: usize,
    axis: usize,
    bound: i64,
    remaining: i64,
    coords: &mut [i64; MAX_DIM],
    out: &mut Vec<Site>,
) {
    if axis == dim {
        out.push(Site::new(&coords[..dim]).expect("orbit coords are valid"));
        return;
    }
    for v in 0..=bound.min(remaining) {
        coords[axis] = v;
        collect_orbits(dim, axis + 1, v, remaining - v, coords, out);
    }
}

/// A rolling walk law on the orbit space, advanced one step at a time.
struct OrbitCursor<'a> {
    space: &'a OrbitSpace,
    cur: Vec<f64>,
    next: Vec<f64>,
    k: usize,
}

impl<'a> OrbitCursor<'a> {
    fn at_origin(space: &'a OrbitSpace) -> OrbitCursor<'a> {
        let mut cur = vec![0.0; space.reps.len()];
        cur[0] = 1.0;
        OrbitCursor {
            space,
            next: vec![0.0; space.reps.len()],
            cur,
            k: 0,
        }
    }

    fn step(&mut self) {
        self.k += 1;
        let inv_deg = 1.0 / (2 * self.space.dim) as f64;
        let deg = 2 * self.space.dim;
        let bound = self.space.region_len(self.k);
        for (i, cell) in self.next[..bound].iter_mut().enumerate() {
            let mut acc = 0.0;
            for &j in &self.space.nbrs[deg * i..deg * (i + 1)] {
                if j != OUT {
                    acc += self.cur[j as usize];
                }
            }
            *cell = acc * inv_deg;
        }
        std::mem::swap(&mut self.cur, &mut self.next);
    }

    fn slice(&self) -> &[f64] {
        &self.cur
    }
}

fn beyond_sqrt_n(site: &Site, n: u128, norm: Norm) -> bool {
    match norm {
        Norm::Euclidean => site.norm_sq() > n,
        Norm::Sup => {
            let s = site.norm_sup() as u128;
            s * s > n
        }
    }
}

fn check_pairing(n: usize) -> Result<usize> {
    if n < 2 {
        return Err(SiltError::InvalidParameter(format!(
            "comparison needs a horizon of at least 2, got {n}"
        )));
    }
    let h = n - n / 2;
    if h % 2 != 0 {
        return Err(SiltError::InvalidParameter(format!(
            "horizon {n} puts the compared slices at odd offset {h}; no site \
             carries mass at both times"
        )));
    }
    Ok(h)
}

fn no_admissible_sites(n: usize) -> SiltError {
    SiltError::InvalidParameter(format!(
        "no reachable site lies beyond sqrt({n}) at the compared times"
    ))
}

/// Largest `p_m(x) / p_{m+H}(x)` over `m = 1..=n/2`, `H = n - n/2`, and
/// sites `|x| > sqrt(n)` in the given norm, computed on the symmetry
/// quotient. Errors if the slice offset has odd parity or no site past
/// `sqrt(n)` is reachable.
pub fn gaussian_comparison_constant(dim: usize, n: usize, norm: Norm) -> Result<f64> {
    check_dim(dim)?;
    let h = check_pairing(n)?;
    let space = OrbitSpace::new(dim, n)?;
    let mut num = OrbitCursor::at_origin(&space);
    let mut den = OrbitCursor::at_origin(&space);
    for _ in 0..h {
        den.step();
    }
    let mut best: Option<f64> = None;
    for m in 1..=n / 2 {
        num.step();
        den.step();
        let a = num.slice();
        let b = den.slice();
        for i in 0..space.region_len(m) {
            if a[i] <= 0.0 || !beyond_sqrt_n(&space.reps[i], n as u128, norm) {
                continue;
            }
            debug_assert!(b[i] > 0.0, "denominator vanished where numerator lives");
            let ratio = a[i] / b[i];
            best = Some(best.map_or(ratio, |x: f64| x.max(ratio)));
        }
    }
    best.ok_or_else(|| no_admissible_sites(n))
}

/// The same maximum, brute-forced from a dense transition table. Slow and
/// memory-hungry, but with no symmetry reasoning to trust.
pub fn gaussian_comparison_from_table(table: &TransitionTable, norm: Norm) -> Result<f64> {
    let n = table.horizon();
    let h = check_pairing(n)?;
    let dim = table.dim();
    let mut best: Option<f64> = None;
    let mut coords = [0i64; MAX_DIM];
    for m in 1..=n / 2 {
        let r = m as i64;
        coords[..dim].fill(-r);
        'sites: loop {
            let site = Site::new(&coords[..dim]).expect("box coords are valid");
            if beyond_sqrt_n(&site, n as u128, norm) {
                let a = table.prob(m, &site);
                if a > 0.0 {
                    let b = table.prob(m + h, &site);
                    debug_assert!(b > 0.0, "denominator vanished where numerator lives");
                    let ratio = a / b;
                    best = Some(best.map_or(ratio, |x: f64| x.max(ratio)));
                }
            }
            for axis in (0..dim).rev() {
                coords[axis] += 1;
                if coords[axis] <= r {
                    continue 'sites;
                }
                coords[axis] = -r;
            }
            break;
        }
    }
    best.ok_or_else(|| no_admissible_sites(n))
}
