//! An explicit exponential upper bound for sums of heavy-ish tails.
//!
//! For i.i.d. nonnegative `X_i` with `P(X > t) <= C e^{-t}` and mean one,
//! the deviation `P(sum_i (X_i - 1) > x)` is bounded by
//! `exp( c n max(g, g^{1 - gamma}) - gamma x / 2 )` with `g = gamma^2 E[X^2]`
//! and `c = 3 + e + C`, valid for any tilt `gamma` in `(0, 1)`. The bound is
//! deliberately crude; its value here is that it is fully explicit, so a
//! Monte Carlo tail frequency can be tested against it with no fitted
//! constants.

use crate::error::{Result, SiltError};
use crate::rare_event::{chunked_hits, TailEstimate};
use crate::rng::RngStream;

fn check_finite(name: &str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(SiltError::InvalidParameter(format!(
            "{name} must be finite, got {value}"
        )));
    }
    Ok(())
}

/// Right-hand side of the deviation bound at tilt `gamma`.
///
/// `second_moment` is `E[X^2]` and `tail_const` the constant `C` dominating
/// the tail. The result can overflow to `+inf` for large `n`; that is the
/// honest value of the formula and still compares correctly against any
/// frequency.
pub fn ld_bound_rhs(
    n: u64,
    gamma: f64,
    second_moment: f64,
    tail_const: f64,
    x: f64,
) -> Result<f64> {
    if n == 0 {
        return Err(SiltError::InvalidParameter("n must be positive".into()));
    }
    check_finite("gamma", gamma)?;
    check_finite("second_moment", second_moment)?;
    check_finite("tail_const", tail_const)?;
    check_finite("x", x)?;
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(SiltError::InvalidParameter(format!(
            "tilt gamma must lie in (0, 1), got {gamma}"
        )));
    }
    if second_moment <= 0.0 {
        return Err(SiltError::InvalidParameter(format!(
            "second moment must be positive, got {second_moment}"
        )));
    }
    if tail_const <= 0.0 {
        return Err(SiltError::InvalidParameter(format!(
            "tail constant must be positive, got {tail_const}"
        )));
    }
    let c = 3.0 + std::f64::consts::E + tail_const;
    let g = gamma * gamma * second_moment;
    let growth = g.max(g.powf(1.0 - gamma));
    Ok((c * n as f64 * growth - gamma * x / 2.0).exp())
}

/// Monte Carlo frequency of `{ sum_i X_i - n > x }` for `n` i.i.d. unit-rate
/// exponentials, the canonical distribution satisfying the bound's
/// hypotheses with `E[X^2] = 2` and any `C > 1`.
pub fn exp_sum_tail_mc(n: usize, x: f64, samples: u64, base: RngStream) -> Result<TailEstimate> {
    if n == 0 || samples == 0 {
        return Err(SiltError::InvalidParameter(
            "n and samples must be positive".into(),
        ));
    }
    check_finite("x", x)?;
    let threshold = n as f64 + x;
    let hits = chunked_hits(samples, base, |rng| {
        let mut sum = 0.0f64;
        for _ in 0..n {
            let u: f64 = rand::Rng::random(rng);
            sum -= (1.0 - u).ln();
        }
        sum > threshold
    });
    Ok(TailEstimate::from_hits(
        hits,
        samples,
        format!("sum of {n} unit exponentials exceeds {threshold}"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_decreases_in_deviation_and_grows_with_n() {
        let at = |n, x| ld_bound_rhs(n, 0.25, 2.0, 1.5, x).unwrap();
        assert!(at(10, 200.0) < at(10, 100.0));
        assert!(at(20, 100.0) > at(10, 100.0));
    }

    #[test]
    fn growth_term_switches_branches() {
        // g < 1: the power 1 - gamma dominates; g > 1: g itself does.
        let gamma = 0.5f64;
        let small = ld_bound_rhs(1, gamma, 2.0, 1.0, 0.0).unwrap();
        let g_small = (gamma * gamma * 2.0f64).powf(1.0 - gamma);
        let c = 3.0 + std::f64::consts::E + 1.0;
        assert!((small.ln() - c * g_small).abs() < 1e-12);

        let big = ld_bound_rhs(1, gamma, 40.0, 1.0, 0.0).unwrap();
        let g_big = gamma * gamma * 40.0;
        assert!((big.ln() - c * g_big).abs() < 1e-10);
    }

    #[test]
    fn big_horizons_overflow_to_infinity() {
        let v = ld_bound_rhs(1_000_000, 0.25, 2.0, 1.0, 100.0).unwrap();
        assert!(v.is_infinite() && v > 0.0);
    }

    #[test]
    fn parameter_validation() {
        assert!(ld_bound_rhs(0, 0.5, 2.0, 1.0, 0.0).is_err());
        for bad_gamma in [0.0, 1.0, -0.5, f64::NAN] {
            assert!(ld_bound_rhs(5, bad_gamma, 2.0, 1.0, 0.0).is_err());
        }
        assert!(ld_bound_rhs(5, 0.5, 0.0, 1.0, 0.0).is_err());
        assert!(ld_bound_rhs(5, 0.5, 2.0, 0.0, 0.0).is_err());
        assert!(ld_bound_rhs(5, 0.5, 2.0, 1.0, f64::INFINITY).is_err());
        assert!(exp_sum_tail_mc(0, 1.0, 10, RngStream::new(1, 0)).is_err());
        assert!(exp_sum_tail_mc(10, 1.0, 0, RngStream::new(1, 0)).is_err());
    }

    #[test]
    fn single_exponential_tail_matches_closed_form() {
        // P(X > 4) = e^{-4}; 50k samples put the standard error near 6e-4.
        let est = exp_sum_tail_mc(1, 3.0, 50_000, RngStream::new(9, 0)).unwrap();
        let exact = (-4.0f64).exp();
        assert!(
            (est.p_hat - exact).abs() < 5.0 * 6e-4,
            "p_hat {} vs e^-4 {exact}",
            est.p_hat
        );
        assert!(est.stderr > 0.0 && est.hits > 0);
    }

    #[test]
    fn estimates_are_reproducible() {
        let a = exp_sum_tail_mc(50, 10.0, 20_000, RngStream::new(3, 0)).unwrap();
        let b = exp_sum_tail_mc(50, 10.0, 20_000, RngStream::new(3, 0)).unwrap();
        assert_eq!(a.p_hat, b.p_hat);
        assert_eq!(a.hits, b.hits);
        let c = exp_sum_tail_mc(50, 10.0, 20_000, RngStream::new(4, 0)).unwrap();
        assert_ne!(a.hits, c.hits);
    }
}
