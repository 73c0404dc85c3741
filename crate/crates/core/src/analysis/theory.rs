use serde::{Deserialize, Serialize};

use crate::domain::DecompositionReport;
use crate::quadrature::GaussLegendre;
use crate::regression::{FittedRegressor, LegendreBasis};
use crate::{Error, Result};

pub const SPECTRUM_NODES: usize = 128;

/// MSE of the stratified outcome-model estimator:
/// `sum_k p_k^2 sigma_k^2 / n_k`.
pub fn prop1_formula(target_props: &[f64], group_vars: &[f64], group_counts: &[usize]) -> Result<f64> {
    if target_props.len() != group_vars.len() || target_props.len() != group_counts.len() {
        return Err(Error::invalid("proportions, variances and counts differ in length"));
    }
    let total: f64 = target_props.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("target proportions sum to {total}, not 1")));
    }
    target_props
        .iter()
        .zip(group_vars)
        .zip(group_counts)
        .map(|((&p, &v), &n)| {
            if n == 0 {
                Err(Error::invalid("every group needs at least one trial record"))
            } else {
                Ok(p * p * v / n as f64)
            }
        })
        .sum()
}

/// Coefficients of a function in the orthonormal Legendre basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub coeffs: Vec<f64>,
}

impl Spectrum {
    /// `sum_{k > d'} coeff_k^2`.
    pub fn tail_mass(&self, d_prime: usize) -> f64 {
        self.coeffs.iter().skip(d_prime + 1).map(|c| c * c).sum()
    }

    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }
}

pub fn spectrum(f: impl Fn(f64) -> f64, d_max: usize) -> Spectrum {
    let q = GaussLegendre::new(SPECTRUM_NODES);
    let basis = LegendreBasis::new(d_max);
    let mut coeffs = vec![0.0; d_max + 1];
    let mut row = vec![0.0; d_max + 1];
    for (&x, &w) in q.nodes.iter().zip(&q.weights) {
        basis.eval_into(x, &mut row);
        let fx = f(x);
        for (c, p) in coeffs.iter_mut().zip(&row) {
            *c += w * fx * p;
        }
    }
    Spectrum { coeffs }
}

/// `(1/m) sum (fit(x_i) - truth(x_i))^2`.
pub fn empirical_excess_risk(fit: &dyn FittedRegressor, truth: impl Fn(f64) -> f64, xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().map(|&x| (fit.predict(x) - truth(x)).powi(2)).sum::<f64>() / xs.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub empirical_risk: Option<f64>,
    pub bound: f64,
}

/// `sigma^2 d' / n1 + tail_mass(d')` for the outcome and bias functions.
/// Only meaningful for ordering comparisons.
pub fn lemma2_bounds(
    sigma2: f64,
    d_prime: usize,
    n1: usize,
    spectrum_g: &Spectrum,
    spectrum_b: &Spectrum,
) -> Result<(RiskReport, RiskReport)> {
    if d_prime >= spectrum_g.coeffs.len() || d_prime >= spectrum_b.coeffs.len() {
        return Err(Error::invalid("d' must be below the spectrum length"));
    }
    if n1 == 0 {
        return Err(Error::invalid("n1 must be positive"));
    }
    let base = sigma2 * d_prime as f64 / n1 as f64;
    let report = |s: &Spectrum| RiskReport { empirical_risk: None, bound: base + s.tail_mass(d_prime) };
    Ok((report(spectrum_g), report(spectrum_b)))
}

/// Bias, unbiased variance and MSE of estimates around the truth. The
/// variance is zero for a single replication.
pub fn decompose_estimates(estimates: &[f64], mu: f64, n_failures: usize) -> DecompositionReport {
    let r = estimates.len();
    if r == 0 {
        return DecompositionReport {
            bias: f64::NAN,
            variance: f64::NAN,
            mse: f64::NAN,
            n_replications: 0,
            n_failures,
        };
    }
    let rf = r as f64;
    let mean = estimates.iter().sum::<f64>() / rf;
    let variance = if r > 1 {
        estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (rf - 1.0)
    } else {
        0.0
    };
    let mse = estimates.iter().map(|e| (e - mu).powi(2)).sum::<f64>() / rf;
    DecompositionReport { bias: mean - mu, variance, mse, n_replications: r, n_failures }
}
