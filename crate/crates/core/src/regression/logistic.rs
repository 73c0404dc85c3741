use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{FittedRegressor, LegendreBasis};
use crate::{Error, Result};

/// Probabilities are kept this far inside `(0, 1)`.
const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub degree: usize,
    pub penalty: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub max_halvings: usize,
}

impl LogisticConfig {
    pub fn new(degree: usize) -> Self {
        Self { degree, penalty: 1e-6, max_iter: 100, tol: 1e-8, max_halvings: 30 }
    }
}

/// Penalized logistic regression on the Legendre basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub basis: LegendreBasis,
    pub coefficients: Vec<f64>,
    pub penalty: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Max-norm of the penalized gradient at the returned coefficients.
    pub gradient_norm: f64,
}

impl LogisticFit {
    pub fn linear_predictor(&self, x: f64) -> f64 {
        self.basis.eval(x).iter().zip(&self.coefficients).map(|(a, b)| a * b).sum()
    }

    pub fn predict_proba(&self, x: f64) -> f64 {
        sigmoid(self.linear_predictor(x)).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
    }
}

impl FittedRegressor for LogisticFit {
    fn predict(&self, x: f64) -> f64 {
        self.predict_proba(x)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn objective(f: &DMatrix<f64>, y: &[f64], beta: &DVector<f64>, penalty: f64) -> f64 {
    let eta = f * beta;
    let nll: f64 = eta.iter().zip(y).map(|(&e, &t)| softplus(e) - t * e).sum();
    nll + 0.5 * penalty * beta.norm_squared()
}

fn gradient(f: &DMatrix<f64>, y: &[f64], beta: &DVector<f64>, penalty: f64) -> (DVector<f64>, DVector<f64>) {
    let eta = f * beta;
    let p = eta.map(sigmoid);
    let resid = DVector::from_iterator(y.len(), p.iter().zip(y).map(|(p, t)| p - t));
    (f.transpose() * resid + beta * penalty, p)
}

/// Damped Newton maximization of the ridge-penalized Bernoulli likelihood.
pub fn logistic_fit(xs: &[f64], labels: &[bool], config: &LogisticConfig) -> Result<LogisticFit> {
    if xs.len() != labels.len() {
        return Err(Error::invalid("inputs and labels differ in length"));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::invalid("logistic fit needs both classes present"));
    }
    if !(config.penalty.is_finite() && config.penalty >= 0.0) {
        return Err(Error::invalid("logistic penalty must be finite and nonnegative"));
    }
    let basis = LegendreBasis::new(config.degree);
    let f = basis.design(xs);
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(u8::from(l))).collect();
    let k = basis.len();
    let mut beta = DVector::zeros(k);
    let mut loss = objective(&f, &y, &beta, config.penalty);
    let (mut grad, mut p) = gradient(&f, &y, &beta, config.penalty);
    let mut iterations = 0;
    let mut converged = grad.amax() < config.tol;

    while !converged && iterations < config.max_iter {
        iterations += 1;
        let w = p.map(|v| v * (1.0 - v));
        let mut fw = f.clone();
        for (mut row, wi) in fw.row_iter_mut().zip(w.iter()) {
            row *= *wi;
        }
        let mut hess = f.transpose() * fw;
        for i in 0..k {
            hess[(i, i)] += config.penalty.max(1e-12);
        }
        let step = match hess.cholesky() {
            Some(ch) => ch.solve(&grad),
            None => break,
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=config.max_halvings {
            let cand = &beta - &step * t;
            let cand_loss = objective(&f, &y, &cand, config.penalty);
            // Near the optimum the objective is flat to rounding error.
            if cand_loss.is_finite() && cand_loss <= loss + 1e-12 * loss.abs().max(1.0) {
                beta = cand;
                loss = cand_loss;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        (grad, p) = gradient(&f, &y, &beta, config.penalty);
        converged = grad.amax() < config.tol;
        if !accepted {
            break;
        }
    }

    Ok(LogisticFit {
        basis,
        coefficients: beta.as_slice().to_vec(),
        penalty: config.penalty,
        converged,
        iterations,
        gradient_norm: grad.amax(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::rng_from;
    use rand::Rng;

    #[test]
    fn intercept_only_recovers_label_mean() {
        let mut rng = rng_from(1);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ys: Vec<bool> = (0..10_000).map(|_| rng.random_bool(0.5)).collect();
        let mean = ys.iter().filter(|&&b| b).count() as f64 / ys.len() as f64;
        let fit = logistic_fit(&xs, &ys, &LogisticConfig::new(0)).unwrap();
        assert!(fit.converged);
        for x in [-0.9, 0.0, 0.8] {
            assert!((fit.predict_proba(x) - mean).abs() < 0.01);
        }
    }

    #[test]
    fn recovers_generating_slope() {
        let mut rng = rng_from(2);
        let xs: Vec<f64> = (0..20_000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ys: Vec<bool> = xs.iter().map(|&x| rng.random_bool(sigmoid(2.0 * x))).collect();
        let fit = logistic_fit(&xs, &ys, &LogisticConfig::new(1)).unwrap();
        assert!((fit.predict_proba(0.5) - sigmoid(1.0)).abs() < 0.03);
        assert!(fit.converged && fit.gradient_norm < 1e-6);
    }

    #[test]
    fn separable_data_with_penalty_stays_finite() {
        let xs: Vec<f64> = (0..100).map(|i| -1.0 + i as f64 / 50.0).collect();
        let ys: Vec<bool> = xs.iter().map(|&x| x > 0.0).collect();
        let cfg = LogisticConfig { penalty: 1e-2, ..LogisticConfig::new(1) };
        let fit = logistic_fit(&xs, &ys, &cfg).unwrap();
        assert!(fit.coefficients.iter().all(|c| c.is_finite()));
        let p = fit.predict_proba(1.0);
        assert!(p > 0.5 && p < 1.0);
    }

    #[test]
    fn one_class_rejected() {
        let err = logistic_fit(&[0.0, 0.5], &[true, true], &LogisticConfig::new(1)).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn stable_link_functions() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!((softplus(800.0) - 800.0).abs() < 1e-9);
        assert!(softplus(-800.0) >= 0.0);
    }
}
