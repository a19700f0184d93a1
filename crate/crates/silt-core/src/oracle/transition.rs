//! Dense time-sliced transition probabilities on growing boxes.
//!
//! Slice `k` stores `p_k(x)` for every `x` in the box `[-k, k]^d`, which is
//! the full support of the `k`-step law. The table is the workhorse for
//! brute-force cross checks: its marginals must reproduce the big-integer
//! return probabilities, its slices must sum to one, and quadratic
//! functionals of it must match the combinatorial identities. A compact
//! binary dump format makes tables reusable across runs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read as _, Write as _};
use std::path::Path;

use crate::error::{Result, SiltError};
use crate::walk::{check_dim, Site, MAX_DIM};

/// Default cap on total table bytes (2 GiB).
pub const DEFAULT_MEMORY_BUDGET: u64 = 2 << 30;

const MAGIC: &[u8; 8] = b"SILTTAB1";
const FORMAT_VERSION: u32 = 1;

/// Dense law of the walk at every time `0..=n`.
pub struct TransitionTable {
    dim: usize,
    horizon: usize,
    /// `slices[k]` holds the box `[-k, k]^d` in row-major order (last
    /// coordinate fastest).
    slices: Vec<Vec<f64>>,
}

impl std::fmt::Debug for TransitionTable {
    /// Elide the slices: a table can hold hundreds of megabytes of floats.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransitionTable")
            .field("dim", &self.dim)
            .field("horizon", &self.horizon)
            .finish_non_exhaustive()
    }
}

fn box_len(dim: usize, radius: usize) -> u64 {
    let side = 2 * radius as u64 + 1;
    let mut len = 1u64;
    for _ in 0..dim {
        len = len.saturating_mul(side);
    }
    len
}

/// Row-major index of `coords` in the box `[-radius, radius]^d`, or `None`
/// when any coordinate falls outside.
fn box_index(coords: &[i64], radius: usize) -> Option<usize> {
    let r = radius as i64;
    let side = 2 * radius + 1;
    let mut idx = 0usize;
    for &c in coords {
        if c.abs() > r {
            return None;
        }
        idx = idx * side + (c + r) as usize;
    }
    Some(idx)
}

/// Build the exact transition table up to horizon `n`, refusing to allocate
/// more than `budget` bytes of slice data.
pub fn transition_probs(dim: usize, n: usize, budget: u64) -> Result<TransitionTable> {
    check_dim(dim)?;
    let mut bytes = 0u64;
    for k in 0..=n {
        bytes = bytes.saturating_add(box_len(dim, k).saturating_mul(8));
    }
    if bytes > budget {
        return Err(SiltError::BudgetExceeded {
            required: bytes,
            budget,
        });
    }

    let inv_deg = 1.0 / (2 * dim) as f64;
    let mut slices: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    slices.push(vec![1.0]);
    let mut coords = [0i64; MAX_DIM];
    for k in 1..=n {
        let prev = &slices[k - 1];
        let mut next = vec![0.0f64; box_len(dim, k) as usize];
        let r = k as i64;
        // Odometer over the box [-k, k]^d.
        coords[..dim].fill(-r);
        for cell in next.iter_mut() {
            let mut mass = 0.0;
            for axis in 0..dim {
                for delta in [-1i64, 1] {
                    coords[axis] += delta;
                    if let Some(j) = box_index(&coords[..dim], k - 1) {
                        mass += prev[j];
                    }
                    coords[axis] -= delta;
                }
            }
            *cell = mass * inv_deg;
            // Advance the odometer.
            for axis in (0..dim).rev() {
                coords[axis] += 1;
                if coords[axis] <= r {
                    break;
                }
                coords[axis] = -r;
            }
        }
        slices.push(next);
    }
    Ok(TransitionTable {
        dim,
        horizon: n,
        slices,
    })
}

impl TransitionTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// `p_k(site)`, zero outside the reachable box.
    pub fn prob(&self, k: usize, site: &Site) -> f64 {
        assert!(k <= self.horizon, "slice {k} beyond horizon {}", self.horizon);
        assert_eq!(site.dim(), self.dim, "dimension mismatch");
        match box_index(site.coords(), k) {
            Some(idx) => self.slices[k][idx],
            None => 0.0,
        }
    }

    /// `p_k(0)`.
    pub fn return_prob(&self, k: usize) -> f64 {
        assert!(k <= self.horizon, "slice {k} beyond horizon {}", self.horizon);
        let slice = &self.slices[k];
        slice[slice.len() / 2]
    }

    /// Total mass of slice `k`, summed in fixed row-major order.
    pub fn slice_sum(&self, k: usize) -> f64 {
        assert!(k <= self.horizon, "slice {k} beyond horizon {}", self.horizon);
        self.slices[k].iter().sum()
    }

    /// Expected mutual intersections of two independent horizon-`n` walks,
    /// via the dense route `sum_x (sum_k p_k(x))^2`.
    pub fn mutual_intersection(&self) -> f64 {
        let n = self.horizon;
        let mut green = vec![0.0f64; box_len(self.dim, n) as usize];
        let side_big = 2 * n + 1;
        for (k, slice) in self.slices.iter().enumerate() {
            let side = 2 * k + 1;
            // Embed the radius-k box into the radius-n box.
            for (i, &p) in slice.iter().enumerate() {
                let mut rem = i;
                let mut big = 0usize;
                for axis in (0..self.dim).rev() {
                    let c = (rem % side) as i64 - k as i64;
                    rem /= side;
                    let place = (c + n as i64) as usize;
                    big += place * side_big.pow((self.dim - 1 - axis) as u32);
                }
                green[big] += p;
            }
        }
        green.iter().map(|g| g * g).sum()
    }

    /// Write the table to `path` in a little-endian binary layout.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.horizon as u64).to_le_bytes())?;
        for (k, slice) in self.slices.iter().enumerate() {
            w.write_all(&(k as u64).to_le_bytes())?;
            for &v in slice {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Read a table previously written by [`TransitionTable::save`].
    pub fn load(path: &Path) -> Result<TransitionTable> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(SiltError::TableFormat("bad magic".into()));
        }
        let mut u32buf = [0u8; 4];
        r.read_exact(&mut u32buf)?;
        let version = u32::from_le_bytes(u32buf);
        if version != FORMAT_VERSION {
            return Err(SiltError::TableFormat(format!(
                "unsupported format version {version}"
            )));
        }
        r.read_exact(&mut u32buf)?;
        let dim = u32::from_le_bytes(u32buf) as usize;
        check_dim(dim).map_err(|_| SiltError::TableFormat(format!("bad dimension {dim}")))?;
        let mut u64buf = [0u8; 8];
        r.read_exact(&mut u64buf)?;
        let horizon = u64::from_le_bytes(u64buf) as usize;
        let mut slices = Vec::with_capacity(horizon + 1);
        for k in 0..=horizon {
            r.read_exact(&mut u64buf)?;
            let tag = u64::from_le_bytes(u64buf);
            if tag != k as u64 {
                return Err(SiltError::TableFormat(format!(
                    "slice tag {tag} where {k} expected"
                )));
            }
            let len = box_len(dim, k) as usize;
            let mut slice = vec![0.0f64; len];
            for v in slice.iter_mut() {
                r.read_exact(&mut u64buf)?;
                *v = f64::from_le_bytes(u64buf);
            }
            slices.push(slice);
        }
        Ok(TransitionTable {
            dim,
            horizon,
            slices,
        })
    }
}
