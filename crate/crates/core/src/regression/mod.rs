//! Function fitting: Legendre ridge models, random cosine features and
//! penalized logistic regression.

mod legendre;
mod logistic;
mod random_features;
mod ridge;

pub use legendre::{legendre_design, legendre_eval, LegendreBasis};
pub use logistic::{logistic_fit, sigmoid, LogisticConfig, LogisticFit};
pub use random_features::{flexible_fit, FlexibleConfig, RandomFeatureFit};
pub use ridge::{
    default_penalty_grid, fold_slices, ridge_cv, ridge_cv_design, ridge_fit, ridge_fit_design,
    ridge_objective, RidgeFit, RidgeSolution,
};

/// A fitted function `X -> R`.
pub trait FittedRegressor: Send + Sync {
    fn predict(&self, x: f64) -> f64;

    fn predict_many(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.predict(x)).collect()
    }
}

impl<T: FittedRegressor + ?Sized> FittedRegressor for &T {
    fn predict(&self, x: f64) -> f64 {
        (**self).predict(x)
    }
}

impl<T: FittedRegressor + ?Sized> FittedRegressor for Box<T> {
    fn predict(&self, x: f64) -> f64 {
        (**self).predict(x)
    }
}

impl<T: FittedRegressor + ?Sized> FittedRegressor for std::sync::Arc<T> {
    fn predict(&self, x: f64) -> f64 {
        (**self).predict(x)
    }
}

/// The constant function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantPredictor(pub f64);

impl FittedRegressor for ConstantPredictor {
    fn predict(&self, _x: f64) -> f64 {
        self.0
    }
}

/// Wraps a closure.
pub struct FnPredictor<F>(pub F);

impl<F: Fn(f64) -> f64 + Send + Sync> FittedRegressor for FnPredictor<F> {
    fn predict(&self, x: f64) -> f64 {
        (self.0)(x)
    }
}

/// Piecewise-linear tabulation of another predictor on a uniform grid over
/// `[-1, 1]`. Used to make expensive predictors cheap to evaluate repeatedly.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedPredictor {
    values: Vec<f64>,
}

impl TabulatedPredictor {
    pub fn new(f: &dyn FittedRegressor, nodes: usize) -> Self {
        let nodes = nodes.max(2);
        let step = 2.0 / (nodes - 1) as f64;
        let values = (0..nodes).map(|i| f.predict(-1.0 + step * i as f64)).collect();
        Self { values }
    }

    pub fn nodes(&self) -> usize {
        self.values.len()
    }
}

impl FittedRegressor for TabulatedPredictor {
    fn predict(&self, x: f64) -> f64 {
        let last = self.values.len() - 1;
        let t = ((x.clamp(-1.0, 1.0) + 1.0) * 0.5) * last as f64;
        let i = (t.floor() as usize).min(last - 1);
        let w = t - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }
}
