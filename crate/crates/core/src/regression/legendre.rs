use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Legendre polynomial basis of degree `d'` on `[-1, 1]`.
///
/// With `normalized` set (the default) the basis functions are
/// `phi_k = sqrt((2k+1)/2) P_k`, which are orthonormal in `L2[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegendreBasis {
    pub degree: usize,
    pub normalized: bool,
}

impl LegendreBasis {
    pub fn new(degree: usize) -> Self {
        Self { degree, normalized: true }
    }

    /// Classical `P_k` without the unit-norm scaling.
    pub fn unnormalized(degree: usize) -> Self {
        Self { degree, normalized: false }
    }

    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.len());
        let x = x.clamp(-1.0, 1.0);
        out[0] = 1.0;
        if self.degree >= 1 {
            out[1] = x;
        }
        for k in 1..self.degree {
            let kf = k as f64;
            out[k + 1] = ((2.0 * kf + 1.0) * x * out[k] - kf * out[k - 1]) / (kf + 1.0);
        }
        if self.normalized {
            for (k, v) in out.iter_mut().enumerate() {
                *v *= ((2 * k + 1) as f64 / 2.0).sqrt();
            }
        }
    }

    pub fn eval(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(x, &mut out);
        out
    }

    /// Design matrix with one row per input.
    pub fn design(&self, xs: &[f64]) -> DMatrix<f64> {
        let p = self.len();
        let mut m = DMatrix::zeros(xs.len(), p);
        let mut row = vec![0.0; p];
        for (i, &x) in xs.iter().enumerate() {
            self.eval_into(x, &mut row);
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }
}

/// `(phi_0(x), ..., phi_degree(x))`. Inputs are clamped into `[-1, 1]`.
pub fn legendre_eval(x: f64, degree: usize) -> Vec<f64> {
    LegendreBasis::new(degree).eval(x)
}

pub fn legendre_design(xs: &[f64], degree: usize) -> DMatrix<f64> {
    LegendreBasis::new(degree).design(xs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;
    use proptest::prelude::*;

    #[test]
    fn low_order_values() {
        let s2 = 0.5f64.sqrt();
        assert!((legendre_eval(0.3, 0)[0] - s2).abs() < 1e-12);
        let v = legendre_eval(1.0, 1);
        assert!((v[1] - 1.5f64.sqrt()).abs() < 1e-12);
        let v = legendre_eval(0.0, 2);
        // P_2(0) = -1/2
        assert!((v[2] + 0.5 * 2.5f64.sqrt()).abs() < 1e-12);
        assert!(v[1].abs() < 1e-15);
    }

    #[test]
    fn unit_norm_of_phi1_by_quadrature() {
        let q = GaussLegendre::new(32);
        let norm = q.integrate(|x| legendre_eval(x, 1)[1].powi(2));
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthonormal_to_1e10() {
        let q = GaussLegendre::new(64);
        let b = LegendreBasis::new(8);
        for i in 0..=8 {
            for j in 0..=8 {
                let v = q.integrate(|x| {
                    let e = b.eval(x);
                    e[i] * e[j]
                });
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-10, "({i},{j}) -> {v}");
            }
        }
    }

    #[test]
    fn unnormalized_basis_is_not_orthonormal() {
        let q = GaussLegendre::new(64);
        let b = LegendreBasis::unnormalized(2);
        let v = q.integrate(|x| b.eval(x)[0].powi(2));
        assert!((v - 2.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn bounded_by_endpoint_value(x in -1.0f64..=1.0, d in 0usize..12) {
            // |P_k(x)| <= 1 on [-1, 1]
            let v = LegendreBasis::unnormalized(d).eval(x);
            for p in v {
                prop_assert!(p.abs() <= 1.0 + 1e-12);
            }
        }

        #[test]
        fn design_rows_match_eval(xs in proptest::collection::vec(-1.0f64..=1.0, 1..20), d in 0usize..8) {
            let m = legendre_design(&xs, d);
            for (i, &x) in xs.iter().enumerate() {
                let e = legendre_eval(x, d);
                for j in 0..=d {
                    prop_assert_eq!(m[(i, j)], e[j]);
                }
            }
        }
    }
}
