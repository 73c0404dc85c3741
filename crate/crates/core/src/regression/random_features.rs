use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{default_penalty_grid, ridge_cv_design, FittedRegressor};
use crate::seeds::{derive_seed, rng_from, tag};
use crate::{Error, Result};

/// Bandwidth multipliers cycled over the features. A single median-heuristic
/// scale is too coarse for rough surfaces.
const SCALES: [f64; 4] = [1.0, 0.5, 0.25, 0.125];
const MEDIAN_SUBSAMPLE: usize = 1000;
const MIN_POINTS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlexibleConfig {
    pub n_features: usize,
    pub penalty_grid: Vec<f64>,
    pub n_folds: usize,
    pub seed: u64,
}

impl Default for FlexibleConfig {
    fn default() -> Self {
        Self { n_features: 500, penalty_grid: default_penalty_grid(), n_folds: 5, seed: 0 }
    }
}

/// Ridge regression on random cosine features
/// `sqrt(2/D) cos(w_j x + b_j)` plus an unpenalized offset equal to the
/// training-target mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomFeatureFit {
    pub n_features: usize,
    pub frequencies: Vec<f64>,
    pub phases: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub offset: f64,
    pub bandwidth: f64,
    pub penalty: f64,
    pub seed: u64,
}

impl RandomFeatureFit {
    fn constant(offset: f64, seed: u64) -> Self {
        Self {
            n_features: 0,
            frequencies: Vec::new(),
            phases: Vec::new(),
            coefficients: Vec::new(),
            offset,
            bandwidth: 0.0,
            penalty: 0.0,
            seed,
        }
    }

    fn features(&self, xs: &[f64]) -> DMatrix<f64> {
        let amp = (2.0 / self.n_features as f64).sqrt();
        DMatrix::from_fn(xs.len(), self.n_features, |i, j| {
            amp * (self.frequencies[j] * xs[i] + self.phases[j]).cos()
        })
    }
}

impl FittedRegressor for RandomFeatureFit {
    fn predict(&self, x: f64) -> f64 {
        if self.n_features == 0 {
            return self.offset;
        }
        let amp = (2.0 / self.n_features as f64).sqrt();
        let s: f64 = self
            .frequencies
            .iter()
            .zip(&self.phases)
            .zip(&self.coefficients)
            .map(|((w, b), c)| c * (w * x + b).cos())
            .sum();
        self.offset + amp * s
    }
}

fn median_distance(xs: &[f64], seed: u64) -> f64 {
    let sub: Vec<f64> = if xs.len() > MEDIAN_SUBSAMPLE {
        let mut rng = rng_from(seed);
        sample(&mut rng, xs.len(), MEDIAN_SUBSAMPLE).into_iter().map(|i| xs[i]).collect()
    } else {
        xs.to_vec()
    };
    let mut d = Vec::with_capacity(sub.len() * (sub.len() - 1) / 2);
    for i in 0..sub.len() {
        for j in i + 1..sub.len() {
            d.push((sub[i] - sub[j]).abs());
        }
    }
    if d.is_empty() {
        return 0.0;
    }
    let mid = d.len() / 2;
    *d.select_nth_unstable_by(mid, f64::total_cmp).1
}

/// Flexible regressor standing in for a neural network on the large
/// observational sample.
pub fn flexible_fit(xs: &[f64], ys: &[f64], config: &FlexibleConfig) -> Result<RandomFeatureFit> {
    if xs.len() != ys.len() {
        return Err(Error::invalid("inputs and targets differ in length"));
    }
    if xs.len() < MIN_POINTS {
        return Err(Error::invalid(format!(
            "flexible fit needs at least {MIN_POINTS} points, got {}",
            xs.len()
        )));
    }
    if config.n_features == 0 {
        return Err(Error::invalid("n_features must be positive"));
    }
    let offset = ys.iter().sum::<f64>() / ys.len() as f64;
    let degenerate = xs.iter().all(|&x| x == xs[0]);
    let bandwidth = median_distance(xs, derive_seed(config.seed, &[tag("median")]));
    if degenerate || !(bandwidth > 0.0) {
        return Ok(RandomFeatureFit::constant(offset, config.seed));
    }

    let mut rng = rng_from(derive_seed(config.seed, &[tag("features")]));
    let d = config.n_features;
    let frequencies: Vec<f64> = (0..d)
        .map(|j| rng.sample::<f64, _>(StandardNormal) / (bandwidth * SCALES[j % SCALES.len()]))
        .collect();
    let phases: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..2.0 * PI)).collect();

    let mut fit = RandomFeatureFit {
        n_features: d,
        frequencies,
        phases,
        coefficients: Vec::new(),
        offset,
        bandwidth,
        penalty: 0.0,
        seed: config.seed,
    };
    let design = fit.features(xs);
    let centered: Vec<f64> = ys.iter().map(|y| y - offset).collect();
    let sol = ridge_cv_design(
        &design,
        &centered,
        &config.penalty_grid,
        config.n_folds,
        derive_seed(config.seed, &[tag("folds")]),
    )?;
    fit.coefficients = sol.coefficients.as_slice().to_vec();
    fit.penalty = sol.penalty;
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn constant_targets_give_constant_predictor() {
        let mut rng = rng_from(1);
        let xs: Vec<f64> = (0..400).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ys = vec![3.0; xs.len()];
        let fit = flexible_fit(&xs, &ys, &FlexibleConfig { n_features: 100, ..Default::default() })
            .unwrap();
        for x in grid(201) {
            assert!((fit.predict(x) - 3.0).abs() < 1e-3);
        }
    }

    #[test]
    fn identical_inputs_fall_back_to_mean() {
        let xs = vec![0.2; 60];
        let ys: Vec<f64> = (0..60).map(|i| i as f64).collect();
        let fit = flexible_fit(&xs, &ys, &FlexibleConfig::default()).unwrap();
        assert_eq!(fit.n_features, 0);
        assert!((fit.predict(-0.7) - 29.5).abs() < 1e-12);
    }

    #[test]
    fn too_few_points_rejected() {
        let xs = vec![0.0; 10];
        assert!(flexible_fit(&xs, &xs, &FlexibleConfig::default()).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let mut rng = rng_from(2);
        let xs: Vec<f64> = (0..300).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (4.0 * x).sin()).collect();
        let cfg = FlexibleConfig { n_features: 80, seed: 5, ..Default::default() };
        let a = flexible_fit(&xs, &ys, &cfg).unwrap();
        let b = flexible_fit(&xs, &ys, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn training_error_at_most_target_variance() {
        let mut rng = rng_from(3);
        let xs: Vec<f64> = (0..500).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ys: Vec<f64> = xs.iter().map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let fit = flexible_fit(&xs, &ys, &FlexibleConfig { n_features: 60, ..Default::default() })
            .unwrap();
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / ys.len() as f64;
        let mse = xs.iter().zip(&ys).map(|(x, y)| (fit.predict(*x) - y).powi(2)).sum::<f64>()
            / ys.len() as f64;
        assert!(mse <= var);
    }
}
