//! State emission densities: diagonal-covariance Gaussians and mixtures.
//!
//! Densities are returned as raw log-densities (`f64`), not `LogProb`:
//! a density can exceed 1, so its logarithm is unbounded above.

use crate::error::{Error, Result};
use crate::logprob::log_sum_exp_raw;

/// Smallest admissible mixture weight after re-estimation.
pub const WEIGHT_FLOOR: f64 = 1e-6;

const LN_2PI: f64 = 1.8378770664093453; // ln(2*pi)

/// A diagonal-covariance Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    mean: Vec<f64>,
    var: Vec<f64>,
    /// Cached `-0.5 * sum_d ln(2*pi*var_d)`.
    log_norm: f64,
}

impl Gaussian {
    pub fn new(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        if mean.len() != var.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                got: var.len(),
            });
        }
        if mean.is_empty() {
            return Err(Error::Usage("gaussian dimension must be >= 1".into()));
        }
        for (d, (&m, &v)) in mean.iter().zip(&var).enumerate() {
            if !m.is_finite() {
                return Err(Error::Usage(format!("mean[{d}] = {m} is not finite")));
            }
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Usage(format!(
                    "variance[{d}] = {v} must be strictly positive"
                )));
            }
        }
        let log_norm = -0.5 * var.iter().map(|&v| LN_2PI + v.ln()).sum::<f64>();
        Ok(Gaussian {
            mean,
            var,
            log_norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn var(&self) -> &[f64] {
        &self.var
    }

    /// Log-density of `x` under this Gaussian.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.log_density_unchecked(x))
    }

    /// As [`log_density`](Self::log_density) but without the dimension check.
    /// Hot path for the forward-backward and token-passing inner loops.
    #[inline]
    pub(crate) fn log_density_unchecked(&self, x: &[f64]) -> f64 {
        let mut quad = 0.0;
        for d in 0..self.mean.len() {
            let diff = x[d] - self.mean[d];
            quad += diff * diff / self.var[d];
        }
        self.log_norm - 0.5 * quad
    }
}

/// A mixture of diagonal Gaussians used as a state emission model.
///
/// A single-Gaussian state is the `m() == 1` case; flattening produces
/// exactly those.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmEmission {
    weights: Vec<f64>,
    ln_weights: Vec<f64>,
    components: Vec<Gaussian>,
}

impl GmmEmission {
    pub fn new(weights: Vec<f64>, components: Vec<Gaussian>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Usage("mixture needs at least one component".into()));
        }
        if weights.len() != components.len() {
            return Err(Error::DimensionMismatch {
                expected: components.len(),
                got: weights.len(),
            });
        }
        let dim = components[0].dim();
        for c in &components[1..] {
            if c.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: c.dim(),
                });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(Error::Usage(format!("mixture weights sum to {sum}")));
        }
        for (m, &w) in weights.iter().enumerate() {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Usage(format!("weight[{m}] = {w} must be positive")));
            }
        }
        let ln_weights = weights.iter().map(|&w| w.ln()).collect();
        Ok(GmmEmission {
            weights,
            ln_weights,
            components,
        })
    }

    /// A one-component mixture wrapping `g`.
    pub fn single(g: Gaussian) -> Self {
        GmmEmission {
            weights: vec![1.0],
            ln_weights: vec![0.0],
            components: vec![g],
        }
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    /// Component count M.
    pub fn m(&self) -> usize {
        self.components.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[Gaussian] {
        &self.components
    }

    /// Mixture log-density: `ln Σ_m w_m N(x; μ_m, σ²_m)`.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.log_density_unchecked(x))
    }

    #[inline]
    pub(crate) fn log_density_unchecked(&self, x: &[f64]) -> f64 {
        if self.components.len() == 1 {
            // ln(1 * p) = ln p, exactly.
            return self.components[0].log_density_unchecked(x);
        }
        let terms: Vec<f64> = self
            .components
            .iter()
            .zip(&self.ln_weights)
            .map(|(c, &lw)| lw + c.log_density_unchecked(x))
            .collect();
        log_sum_exp_raw(&terms)
    }

    /// Per-component log joint `ln w_m + ln N_m(x)`, for responsibilities.
    pub(crate) fn component_log_joint(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (c, &lw) in self.components.iter().zip(&self.ln_weights) {
            out.push(lw + c.log_density_unchecked(x));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_normal_1d() -> Gaussian {
        Gaussian::new(vec![0.0], vec![1.0]).unwrap()
    }

    #[test]
    fn standard_gaussian_at_mean() {
        let g = std_normal_1d();
        let expected = -0.5 * LN_2PI;
        assert!((g.log_density(&[0.0]).unwrap() - expected).abs() < 1e-12);
        assert!((expected - (-0.91894)).abs() < 1e-5);
    }

    #[test]
    fn standard_gaussian_at_unit_deviation() {
        let g = std_normal_1d();
        let expected = -0.5 * LN_2PI - 0.5;
        assert!((g.log_density(&[1.0]).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn two_dim_gaussian_at_mean() {
        let g = Gaussian::new(vec![1.0, 2.0], vec![1.0, 4.0]).unwrap();
        // -0.5 ln(2π·1) - 0.5 ln(2π·4) = -0.5 ln(2π) - 0.5 ln(8π)
        let expected = -0.5 * (2.0 * std::f64::consts::PI).ln()
            - 0.5 * (8.0 * std::f64::consts::PI).ln();
        assert!((g.log_density(&[1.0, 2.0]).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let g = std_normal_1d();
        assert!(g.log_density(&[0.0, 1.0]).is_err());
        assert!(Gaussian::new(vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn gaussian_density_integrates_to_one() {
        // Fine 1-D grid over ±8 sigma.
        let g = Gaussian::new(vec![0.3], vec![0.7]).unwrap();
        let (lo, hi, n) = (-8.0f64, 8.0f64, 40_000usize);
        let h = (hi - lo) / n as f64;
        let mut total = 0.0;
        for i in 0..=n {
            let x = lo + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            total += w * g.log_density(&[x]).unwrap().exp();
        }
        total *= h;
        assert!((total - 1.0).abs() < 1e-3, "integral = {total}");
    }

    #[test]
    fn single_component_mixture_equals_gaussian() {
        let g = Gaussian::new(vec![0.5, -1.0], vec![2.0, 0.5]).unwrap();
        let e = GmmEmission::single(g.clone());
        let x = [0.1, 0.2];
        assert_eq!(
            e.log_density(&x).unwrap(),
            g.log_density(&x).unwrap(),
            "M=1 must be exact"
        );
    }

    #[test]
    fn mixture_of_identical_parts_is_the_part() {
        let g = Gaussian::new(vec![0.0], vec![1.0]).unwrap();
        let e = GmmEmission::new(vec![0.5, 0.5], vec![g.clone(), g.clone()]).unwrap();
        let x = [0.73];
        let diff = e.log_density(&x).unwrap() - g.log_density(&x).unwrap();
        assert!(diff.abs() < 1e-12);
    }

    #[test]
    fn weighted_mixture_matches_linear_domain() {
        let g1 = Gaussian::new(vec![0.0], vec![1.0]).unwrap();
        let g2 = Gaussian::new(vec![2.0], vec![0.5]).unwrap();
        let e = GmmEmission::new(vec![0.3, 0.7], vec![g1.clone(), g2.clone()]).unwrap();
        let x = [1.1];
        let p1 = g1.log_density(&x).unwrap().exp();
        let p2 = g2.log_density(&x).unwrap().exp();
        let expected = (0.3 * p1 + 0.7 * p2).ln();
        assert!((e.log_density(&x).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn duplicated_half_weight_components_leave_density_unchanged() {
        let g1 = Gaussian::new(vec![0.0], vec![1.0]).unwrap();
        let g2 = Gaussian::new(vec![1.5], vec![2.0]).unwrap();
        let base = GmmEmission::new(vec![0.4, 0.6], vec![g1.clone(), g2.clone()]).unwrap();
        let dup = GmmEmission::new(
            vec![0.2, 0.3, 0.2, 0.3],
            vec![g1.clone(), g2.clone(), g1, g2],
        )
        .unwrap();
        for x in [-2.0, -0.3, 0.9, 4.2] {
            let a = base.log_density(&[x]).unwrap();
            let b = dup.log_density(&[x]).unwrap();
            assert!((a - b).abs() < 1e-10, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn bad_weights_rejected() {
        let g = Gaussian::new(vec![0.0], vec![1.0]).unwrap();
        assert!(GmmEmission::new(vec![0.5, 0.4], vec![g.clone(), g.clone()]).is_err());
        assert!(GmmEmission::new(vec![1.0, 0.0], vec![g.clone(), g.clone()]).is_err());
        assert!(GmmEmission::new(vec![], vec![]).is_err());
    }
}
