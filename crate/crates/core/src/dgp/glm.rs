use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{GlmLogitParams, GlmOutcomeParams};

fn poly5(c: &[f64; 5], t: f64) -> f64 {
    let mut p = t;
    let mut s = 0.0;
    for &ci in c {
        s += ci * p;
        p *= t;
    }
    s
}

/// `b0 + sum b_x[j] x^j + gamma (sum b_u[j] u^j + sum b_xu[j] (xu)^j)`.
pub fn glm_outcome(params: &GlmOutcomeParams, x: f64, u: f64) -> f64 {
    params.beta0
        + poly5(&params.beta_x, x)
        + params.gamma * (poly5(&params.beta_u, u) + poly5(&params.beta_xu, x * u))
}

/// `1 / (1 + exp(scale (c0 + sum c_x[j] x^j) + gamma (...)))`. Note the plus
/// sign inside the exponential; no clipping.
pub fn glm_logit_prob(params: &GlmLogitParams, x: f64, u: f64) -> f64 {
    let eta = params.scale * (params.c0 + poly5(&params.c_x, x))
        + params.gamma * (poly5(&params.c_u, u) + poly5(&params.c_xu, x * u));
    1.0 / (1.0 + eta.exp())
}

/// One setting of the polynomial benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlmRow {
    pub gamma: f64,
    pub sigma: f64,
    pub beta_sd: f64,
    pub lambda: f64,
}

impl GlmRow {
    /// The six published settings, in order.
    pub fn table() -> [GlmRow; 6] {
        let r = |gamma, sigma, beta_sd, lambda| GlmRow { gamma, sigma, beta_sd, lambda };
        [
            r(0.0, 0.1, 1.0, 1.0),
            r(1.0, 0.1, 1.0, 1.0),
            r(0.0, 2.0, 1.0, 1.0),
            r(0.0, 2.0, 2.0, 1.0),
            r(0.0, 2.0, 2.0, 2.0),
            r(1.0, 2.0, 2.0, 2.0),
        ]
    }
}

fn draw5<R: Rng + ?Sized>(rng: &mut R, d: &impl Distribution<f64>) -> [f64; 5] {
    std::array::from_fn(|_| d.sample(rng))
}

/// Ground-truth coefficients for one world of a row: outcome surfaces with
/// `beta ~ N(0, beta_sd^2)`, participation with `c ~ N(0, 1)` scaled by the
/// row's lambda and no dependence on `U`, OS treatment with `alpha ~ N(0, 1)`
/// and the row's gamma on the `U` terms.
pub fn sample_glm_params<R: Rng + ?Sized>(
    row: &GlmRow,
    rng: &mut R,
) -> ([GlmOutcomeParams; 2], GlmLogitParams, GlmLogitParams) {
    let beta = Normal::new(0.0, row.beta_sd).expect("finite sd");
    let mut outcome = || GlmOutcomeParams {
        beta0: beta.sample(rng),
        beta_x: draw5(rng, &beta),
        beta_u: draw5(rng, &beta),
        beta_xu: draw5(rng, &beta),
        gamma: row.gamma,
    };
    let fom = [outcome(), outcome()];
    let std = StandardNormal;
    let ps = GlmLogitParams {
        c0: std.sample(rng),
        c_x: draw5(rng, &std),
        c_u: [0.0; 5],
        c_xu: [0.0; 5],
        gamma: 0.0,
        scale: row.lambda,
    };
    let pa = GlmLogitParams {
        c0: std.sample(rng),
        c_x: draw5(rng, &std),
        c_u: draw5(rng, &std),
        c_xu: draw5(rng, &std),
        gamma: row.gamma,
        scale: 1.0,
    };
    (fom, ps, pa)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn zero_outcome() -> GlmOutcomeParams {
        GlmOutcomeParams { beta0: 0.0, beta_x: [0.0; 5], beta_u: [0.0; 5], beta_xu: [0.0; 5], gamma: 0.0 }
    }

    fn zero_logit() -> GlmLogitParams {
        GlmLogitParams { c0: 0.0, c_x: [0.0; 5], c_u: [0.0; 5], c_xu: [0.0; 5], gamma: 0.0, scale: 1.0 }
    }

    #[test]
    fn hand_evaluations() {
        assert_eq!(glm_outcome(&zero_outcome(), 0.3, -0.2), 0.0);
        let p = GlmOutcomeParams { beta0: 1.0, beta_x: [2.0, 0.0, 0.0, 0.0, 0.0], ..zero_outcome() };
        assert!((glm_outcome(&p, 0.5, 0.9) - 2.0).abs() < 1e-12);
        assert_eq!(glm_logit_prob(&zero_logit(), 0.1, 0.1), 0.5);
        let l = GlmLogitParams { c0: 1.0, ..zero_logit() };
        assert!((glm_logit_prob(&l, 0.0, 0.0) - 1.0 / (1.0 + 1f64.exp())).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn no_confounding_means_no_u(seed in any::<u64>(), x in -1.0f64..1.0, u in -1.0f64..1.0) {
            let mut rng = crate::seeds::rng_from(seed);
            let (fom, _, _) = sample_glm_params(&GlmRow::table()[0], &mut rng);
            prop_assert_eq!(glm_outcome(&fom[1], x, u), glm_outcome(&fom[1], x, 0.0));
        }

        #[test]
        fn larger_scale_moves_away_from_half(
            c0 in -2.0f64..2.0, c1 in -2.0f64..2.0, c3 in -2.0f64..2.0, x in -1.0f64..1.0,
        ) {
            let base = GlmLogitParams { c0, c_x: [c1, 0.0, c3, 0.0, 0.0], ..zero_logit() };
            let wide = GlmLogitParams { scale: 2.0, ..base };
            let d1 = (glm_logit_prob(&base, x, 0.0) - 0.5).abs();
            let d2 = (glm_logit_prob(&wide, x, 0.0) - 0.5).abs();
            prop_assert!(d2 >= d1 - 1e-15);
        }
    }
}
