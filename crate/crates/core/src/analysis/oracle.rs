use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dgp::World;
use crate::domain::Arm;
use crate::quadrature::GaussLegendre;
use crate::seeds::rng_from;

pub const ORACLE_NODES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OracleMethod {
    Quadrature,
    MonteCarlo,
}

/// Ground-truth `mu_a = E[Y^a | S = 0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub mu_a: f64,
    pub method: OracleMethod,
    /// Node-doubling difference for quadrature, one standard error for MC.
    pub error_bound: f64,
}

fn quadrature_mu(world: &World, arm: Arm, nodes: usize) -> f64 {
    let q = GaussLegendre::new(nodes);
    let num = q.integrate_2d(|x, u| world.outcome(arm, x, u) * (1.0 - world.participation_prob(x, u)));
    let den = q.integrate_2d(|x, u| 1.0 - world.participation_prob(x, u));
    num / den
}

/// Tensor Gauss-Legendre ratio of `FOM_a (1 - p_S)` to `(1 - p_S)` over
/// the uniform square.
pub fn true_mu(world: &World, arm: Arm) -> OracleResult {
    let mu = quadrature_mu(world, arm, ORACLE_NODES);
    let fine = quadrature_mu(world, arm, 2 * ORACLE_NODES);
    OracleResult { mu_a: mu, method: OracleMethod::Quadrature, error_bound: (fine - mu).abs() }
}

/// Self-normalized Monte Carlo version of [`true_mu`] with a delta-method
/// standard error.
pub fn true_mu_monte_carlo(world: &World, arm: Arm, draws: usize, seed: u64) -> OracleResult {
    let mut rng = rng_from(seed);
    let (mut sw, mut swy, mut sw2, mut sw2y, mut sw2y2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..draws {
        let x: f64 = rng.random_range(-1.0..=1.0);
        let u: f64 = rng.random_range(-1.0..=1.0);
        let w = 1.0 - world.participation_prob(x, u);
        let y = world.outcome(arm, x, u);
        sw += w;
        swy += w * y;
        sw2 += w * w;
        sw2y += w * w * y;
        sw2y2 += w * w * y * y;
    }
    let mu = swy / sw;
    // Var of the ratio: sum w^2 (y - mu)^2 / (sum w)^2.
    let var = (sw2y2 - 2.0 * mu * sw2y + mu * mu * sw2) / (sw * sw);
    OracleResult { mu_a: mu, method: OracleMethod::MonteCarlo, error_bound: var.max(0.0).sqrt() }
}

/// Unnormalized marginal density of `X` in the target, `int (1 - p_S) du / 2`.
pub fn target_weight(world: &World, x: f64, q: &GaussLegendre) -> f64 {
    0.5 * q.integrate(|u| 1.0 - world.participation_prob(x, u))
}

/// `E[h(X) | S = 0]` by nested quadrature, for functions of `X` only.
pub struct TargetExpectation {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl TargetExpectation {
    pub fn new(world: &World, nodes: usize) -> Self {
        let q = GaussLegendre::new(nodes);
        let raw: Vec<f64> =
            q.nodes.iter().zip(&q.weights).map(|(&x, &w)| w * target_weight(world, x, &q)).collect();
        let total: f64 = raw.iter().sum();
        Self { nodes: q.nodes.clone(), weights: raw.iter().map(|w| w / total).collect() }
    }

    pub fn mean(&self, h: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * h(x)).sum()
    }
}
