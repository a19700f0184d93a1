//! Exact return probabilities and the expectations built from them.
//!
//! The on-axis probabilities `p_k(0)` of simple random walk admit an exact
//! big-integer form: the number of closed `2m`-step paths factors as
//! `C(2m, m) * a_d(m)`, where `a_d(m)` counts balanced axis assignments and
//! obeys the convolution `a_d(m) = sum_j C(m, j)^2 a_{d-1}(m - j)` with
//! `a_1 = 1`. Everything else here (expected self-intersection local time,
//! expected mutual intersections of two walks, expected range) reduces to
//! those probabilities by combinatorial identities, so all values are exact
//! up to a single final rounding into `f64`.

use num_bigint::{BigInt, BigUint};
use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Result, SiltError};
use crate::walk::check_dim;

/// Largest horizon accepted by the exact return-probability routines.
///
/// The axis-assignment convolution costs `O(d * n^2)` big-integer products;
/// beyond a few thousand steps that stops being interactive.
pub const RETURNS_MAX_STEPS: usize = 4096;

/// Largest horizon for the exact-rational range recursion, which is far
/// heavier per step than the integer path counts.
const RANGE_MAX_STEPS: usize = 512;

fn check_steps(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(SiltError::InvalidParameter(format!(
            "horizon {n} exceeds exact-oracle cap {cap}"
        )));
    }
    Ok(())
}

/// Round `num / den` to the nearest `f64` using only the leading 64 bits of
/// each operand, so the conversion stays accurate for operands far beyond
/// the `f64` exponent range.
pub(crate) fn big_ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    debug_assert!(!den.is_zero(), "ratio denominator must be nonzero");
    let nshift = num.bits().saturating_sub(64);
    let dshift = den.bits().saturating_sub(64);
    let nm = (num >> nshift).to_u64().expect("top 64 bits fit u64") as f64;
    let dm = (den >> dshift).to_u64().expect("top 64 bits fit u64") as f64;
    (nm / dm) * 2f64.powi((nshift as i64 - dshift as i64) as i32)
}

/// Counts of closed paths: entry `k` is the number of `k`-step nearest
/// neighbor paths from the origin back to itself, so that
/// `p_k(0) = counts[k] / (2 d)^k`.
fn return_counts(dim: usize, n: usize) -> Vec<BigUint> {
    let half = n / 2;

    // a[m] = a_dim(m), built up one dimension at a time.
    let mut a = vec![BigUint::one(); half + 1];
    for _ in 2..=dim {
        let prev = a;
        let mut next = vec![BigUint::zero(); half + 1];
        // Pascal row for the current m, updated in place as m grows.
        let mut row = vec![BigUint::one()];
        for (m, slot) in next.iter_mut().enumerate() {
            if m > 0 {
                row.push(BigUint::one());
                for j in (1..m).rev() {
                    let (left, right) = row.split_at_mut(j);
                    right[0] += &left[j - 1];
                }
            }
            let mut acc = BigUint::zero();
            for (j, binom) in row.iter().enumerate() {
                acc += binom * binom * &prev[m - j];
            }
            *slot = acc;
        }
        a = next;
    }

    let mut counts = vec![BigUint::zero(); n + 1];
    counts[0] = BigUint::one();
    // central = C(2m, m), advanced incrementally.
    let mut central = BigUint::one();
    for m in 1..=half {
        let grow = BigUint::from((2 * m - 1) as u64) * BigUint::from((2 * m) as u64);
        central = central * grow / BigUint::from((m * m) as u64);
        counts[2 * m] = &central * &a[m];
    }
    counts
}

/// Exact one-point return probabilities `p_k(0)` for `k = 0..=n`.
///
/// Odd entries are zero by parity; even entries are exact rationals rounded
/// once into `f64`.
pub fn return_probs(dim: usize, n: usize) -> Result<Vec<f64>> {
    check_dim(dim)?;
    check_steps(n, RETURNS_MAX_STEPS)?;
    let counts = return_counts(dim, n);
    let base = BigUint::from(2 * dim as u64);
    let mut den = BigUint::one();
    let mut probs = Vec::with_capacity(n + 1);
    for count in &counts {
        probs.push(big_ratio_to_f64(count, &den));
        den *= &base;
    }
    Ok(probs)
}

/// Expected self-intersection local time `E[sum_x l_n(x)^2]` of an `n`-step
/// walk, where `l_n` counts visits over times `0..=n`.
///
/// Expanding the square over visit-time pairs gives
/// `(n + 1) + 2 * sum_{j=1}^{n} (n + 1 - j) p_j(0)`.
pub fn expected_silt(dim: usize, n: usize) -> Result<f64> {
    let probs = return_probs(dim, n)?;
    let mut acc = 0.0;
    for (j, p) in probs.iter().enumerate().skip(1) {
        acc += (n + 1 - j) as f64 * p;
    }
    Ok((n + 1) as f64 + 2.0 * acc)
}

/// Expected number of time pairs at which two independent walks of horizon
/// `n` sit on a common site: `E[sum_x l_n(x) l'_n(x)]`.
///
/// Chapman-Kolmogorov collapses the double sum to on-axis probabilities:
/// `sum_{m=0}^{2n} c_m p_m(0)` with `c_m = m + 1` for `m <= n` and
/// `c_m = 2n - m + 1` beyond.
pub fn expected_mutual_intersection(dim: usize, n: usize) -> Result<f64> {
    check_dim(dim)?;
    check_steps(2 * n, RETURNS_MAX_STEPS)?;
    let probs = return_probs(dim, 2 * n)?;
    let mut acc = 0.0;
    for (m, p) in probs.iter().enumerate() {
        let weight = if m <= n { m + 1 } else { 2 * n - m + 1 };
        acc += weight as f64 * p;
    }
    Ok(acc)
}

/// Expected range (number of distinct visited sites) of an `n`-step walk,
/// computed exactly in big rationals.
///
/// Site `S_k` is fresh exactly when the reversed increments avoid the origin
/// through time `k`, so `E|R_n| = sum_{k=0}^{n} q_k` with `q_k` the
/// probability of no return to the start within `k` steps. The first-return
/// masses `f_k` come from deconvolving `p_k(0) = sum_j f_j p_{k-j}(0)`.
pub fn expected_range(dim: usize, n: usize) -> Result<f64> {
    check_dim(dim)?;
    check_steps(n, RANGE_MAX_STEPS)?;
    let counts = return_counts(dim, n);
    let base = BigInt::from(2 * dim as u64);
    let mut den = BigInt::one();
    let mut p: Vec<Ratio<BigInt>> = Vec::with_capacity(n + 1);
    for count in &counts {
        p.push(Ratio::new(BigInt::from(count.clone()), den.clone()));
        den *= &base;
    }

    let mut f: Vec<Ratio<BigInt>> = vec![Ratio::zero(); n + 1];
    let mut survive = Ratio::one();
    let mut total = Ratio::zero();
    for k in 0..=n {
        if k > 0 {
            let mut conv = Ratio::zero();
            for j in 1..k {
                conv += &f[j] * &p[k - j];
            }
            f[k] = &p[k] - conv;
            survive -= &f[k];
        }
        total += &survive;
    }

    debug_assert!(!total.numer().is_negative());
    Ok(big_ratio_to_f64(
        total.numer().magnitude(),
        total.denom().magnitude(),
    ))
}
