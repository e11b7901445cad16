//! Log-domain probabilities.
//!
//! All probability arithmetic in this crate happens on natural logarithms.
//! `LogProb` wraps a value in `(-inf, 0]`; negative infinity encodes an
//! exact zero probability (a missing transition), which is what separates
//! the support set of a state from its numeric weights.

use crate::error::{Error, Result};

/// A probability stored as `ln p`. Never NaN, never positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogProb(f64);

impl LogProb {
    /// ln 0: the distinguished value for a zero probability.
    pub const ZERO: LogProb = LogProb(f64::NEG_INFINITY);
    /// ln 1.
    pub const ONE: LogProb = LogProb(0.0);

    /// Wrap a log-domain value. Values in `(0, 1e-9]` are clamped to 0 to
    /// absorb round-off from row renormalization.
    pub fn new(ln_p: f64) -> Result<Self> {
        if ln_p.is_nan() {
            return Err(Error::Usage("log probability is NaN".into()));
        }
        if ln_p > 1e-9 {
            return Err(Error::Usage(format!(
                "log probability {ln_p} is positive (p > 1)"
            )));
        }
        Ok(LogProb(ln_p.min(0.0)))
    }

    /// Convert a linear-domain probability in `[0, 1]`.
    pub fn from_linear(p: f64) -> Result<Self> {
        if p.is_nan() || p < 0.0 {
            return Err(Error::Usage(format!("invalid probability {p}")));
        }
        if p > 1.0 + 1e-9 {
            return Err(Error::Usage(format!("probability {p} exceeds 1")));
        }
        Ok(LogProb(p.min(1.0).ln()))
    }

    pub fn ln(self) -> f64 {
        self.0
    }

    pub fn linear(self) -> f64 {
        self.0.exp()
    }

    /// True iff this encodes exactly p = 0.
    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }
}

/// Stable `ln Σ exp(v)` over raw log-domain values.
///
/// Returns negative infinity iff every input is negative infinity. The
/// usual max-shift keeps intermediate exponentials in range.
pub(crate) fn log_sum_exp_raw(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Binary `ln(exp(a) + exp(b))` without allocating.
pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Stable log-sum-exp over `LogProb` values.
///
/// The list must be non-empty; summing no probabilities is a caller bug,
/// not a zero.
pub fn log_sum_exp(values: &[LogProb]) -> Result<LogProb> {
    if values.is_empty() {
        return Err(Error::Usage("log_sum_exp over an empty list".into()));
    }
    let raw: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    LogProb::new(log_sum_exp_raw(&raw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lp(p: f64) -> LogProb {
        LogProb::from_linear(p).unwrap()
    }

    #[test]
    fn adding_zero_probability_is_identity() {
        let x = lp(0.37);
        let r = log_sum_exp(&[x, LogProb::ZERO]).unwrap();
        assert_eq!(r.ln(), x.ln());
    }

    #[test]
    fn complementary_halves_sum_to_one() {
        let r = log_sum_exp(&[lp(0.5), lp(0.5)]).unwrap();
        assert!(r.ln().abs() < 1e-14, "got {}", r.ln());
    }

    #[test]
    fn small_magnitudes_match_linear_sum() {
        // 0.1 + 0.2 + 0.3 evaluated directly in the linear domain.
        let expected = (0.1f64 + 0.2 + 0.3).ln();
        let r = log_sum_exp(&[lp(0.1), lp(0.2), lp(0.3)]).unwrap();
        assert!((r.ln() - expected).abs() < 1e-13);
    }

    #[test]
    fn all_zero_inputs_give_zero() {
        let r = log_sum_exp(&[LogProb::ZERO, LogProb::ZERO]).unwrap();
        assert!(r.is_zero());
    }

    #[test]
    fn empty_list_is_a_usage_error() {
        assert!(log_sum_exp(&[]).is_err());
    }

    #[test]
    fn large_magnitudes_do_not_overflow() {
        let a = LogProb::new(-700.0).unwrap();
        let r = log_sum_exp(&[a, a]).unwrap();
        assert!((r.ln() - (-700.0 + 2f64.ln())).abs() < 1e-10);
    }

    #[test]
    fn rejects_nan_and_positive() {
        assert!(LogProb::new(f64::NAN).is_err());
        assert!(LogProb::new(0.5).is_err());
        assert!(LogProb::from_linear(1.5).is_err());
        assert!(LogProb::from_linear(-0.1).is_err());
    }

    proptest! {
        #[test]
        fn permutation_invariant(raw in proptest::collection::vec(0.0f64..1.0, 1..12)) {
            // Scale to a sub-distribution so the sum stays a probability.
            let total: f64 = raw.iter().sum();
            let scale = if total > 0.0 { 1.0 / (total + 0.01) } else { 1.0 };
            let mut probs: Vec<f64> = raw.iter().map(|&p| p * scale).collect();
            let vals: Vec<LogProb> = probs.iter().map(|&p| lp(p)).collect();
            let a = log_sum_exp(&vals).unwrap().ln();
            probs.reverse();
            let rev: Vec<LogProb> = probs.iter().map(|&p| lp(p)).collect();
            let b = log_sum_exp(&rev).unwrap().ln();
            if a.is_finite() || b.is_finite() {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
