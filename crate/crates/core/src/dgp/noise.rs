use std::f64::consts::PI;

use crate::regression::FittedRegressor;
use crate::seeds::derive_seed;

/// A fixed function whose values look like iid standard normals across
/// distinct inputs. Inputs are keyed at 1e-9 resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoisePredictor {
    pub seed: u64,
}

fn unit(h: u64) -> f64 {
    // 53 high bits, shifted into (0, 1].
    ((h >> 11) as f64 + 1.0) / (1u64 << 53) as f64
}

impl FittedRegressor for NoisePredictor {
    fn predict(&self, x: f64) -> f64 {
        let key = (x * 1e9).round() as i64 as u64;
        let u1 = unit(derive_seed(self.seed, &[key, 1]));
        let u2 = unit(derive_seed(self.seed, &[key, 2]));
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }
}

pub fn noise_predictor(seed: u64) -> NoisePredictor {
    NoisePredictor { seed }
}
