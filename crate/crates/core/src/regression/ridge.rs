use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{FittedRegressor, LegendreBasis};
use crate::seeds::rng_from;
use crate::{Error, Result};

/// Relative slack under which two CV errors count as tied.
const TIE_TOLERANCE: f64 = 1e-9;

/// Ten log-spaced penalties from 1e-6 to 1e2.
pub fn default_penalty_grid() -> Vec<f64> {
    (0..10).map(|i| 10f64.powf(-6.0 + 8.0 * i as f64 / 9.0)).collect()
}

/// Coefficients of a ridge fit on an arbitrary design, with the CV curve.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeSolution {
    pub coefficients: DVector<f64>,
    pub penalty: f64,
    /// Mean held-out squared error per grid entry, in grid order. Empty when
    /// the grid had a single entry and no CV was run.
    pub cv_errors: Vec<f64>,
}

/// Ridge fit on the Legendre basis, optionally augmented by one trailing
/// column holding a raw predictor value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeFit {
    pub basis: LegendreBasis,
    pub augmented: bool,
    pub coefficients: Vec<f64>,
    pub penalty: f64,
}

impl RidgeFit {
    pub fn predict_features(&self, row: &[f64]) -> f64 {
        debug_assert_eq!(row.len(), self.coefficients.len());
        row.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum()
    }

    /// Prediction for the augmented model at `(x, f(x))`.
    pub fn predict_augmented(&self, x: f64, fx: f64) -> f64 {
        let poly = self.polynomial_part(x);
        if self.augmented {
            poly + self.coefficients[self.basis.len()] * fx
        } else {
            poly
        }
    }

    fn polynomial_part(&self, x: f64) -> f64 {
        self.basis
            .eval(x)
            .iter()
            .zip(&self.coefficients)
            .map(|(a, b)| a * b)
            .sum()
    }
}

impl FittedRegressor for RidgeFit {
    /// # Panics
    /// On augmented fits, which need the predictor value; use
    /// [`RidgeFit::predict_augmented`] instead.
    fn predict(&self, x: f64) -> f64 {
        assert!(!self.augmented, "augmented fit needs the predictor value");
        self.polynomial_part(x)
    }
}

fn check_inputs(rows: usize, y: usize, penalty_ok: bool) -> Result<()> {
    if rows == 0 {
        return Err(Error::invalid("ridge fit needs at least one observation"));
    }
    if rows != y {
        return Err(Error::invalid(format!("design has {rows} rows but {y} targets")));
    }
    if !penalty_ok {
        return Err(Error::invalid("ridge penalties must be finite and nonnegative"));
    }
    Ok(())
}

fn valid_penalty(p: f64) -> bool {
    p.is_finite() && p >= 0.0
}

/// Solves `(G + penalty I) c = rhs` by Cholesky.
fn solve_normal(gram: &DMatrix<f64>, rhs: &DVector<f64>, penalty: f64) -> Result<DVector<f64>> {
    let p = gram.nrows();
    let mut a = gram.clone();
    for i in 0..p {
        a[(i, i)] += penalty;
    }
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::IllConditioned(format!("normal equations not positive definite at penalty {penalty}")))?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    if !(lo > 0.0) || (lo / hi).powi(2) < 1e-14 {
        return Err(Error::IllConditioned(format!("normal equations singular at penalty {penalty}")));
    }
    let c = chol.solve(rhs);
    if c.iter().all(|v| v.is_finite()) {
        Ok(c)
    } else {
        Err(Error::IllConditioned("non-finite ridge coefficients".into()))
    }
}

fn gram(design: &DMatrix<f64>) -> DMatrix<f64> {
    // The general product goes through a blocked gemm, which matters for the
    // wide random-feature designs.
    design.transpose() * design
}

/// Penalized least squares on a given design; every column is penalized.
pub fn ridge_fit_design(design: &DMatrix<f64>, y: &[f64], penalty: f64) -> Result<DVector<f64>> {
    check_inputs(design.nrows(), y.len(), valid_penalty(penalty))?;
    let y = DVector::from_column_slice(y);
    let rhs = design.transpose() * &y;
    solve_normal(&gram(design), &rhs, penalty)
}

/// `||y - F c||^2 + penalty ||c||^2`.
pub fn ridge_objective(design: &DMatrix<f64>, y: &[f64], coef: &[f64], penalty: f64) -> f64 {
    let c = DVector::from_column_slice(coef);
    let r = DVector::from_column_slice(y) - design * &c;
    r.norm_squared() + penalty * c.norm_squared()
}

/// Index sets of `n_folds` contiguous blocks of a seeded permutation of
/// `0..n`. The first `n % n_folds` blocks are one longer.
pub fn fold_slices(n: usize, n_folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng_from(seed));
    let base = n / n_folds;
    let extra = n % n_folds;
    let mut out = Vec::with_capacity(n_folds);
    let mut start = 0;
    for k in 0..n_folds {
        let len = base + usize::from(k < extra);
        out.push(perm[start..start + len].to_vec());
        start += len;
    }
    out
}

/// Ridge with the penalty chosen by K-fold CV, then refit on all rows.
///
/// Ties in held-out error go to the larger penalty.
pub fn ridge_cv_design(
    design: &DMatrix<f64>,
    y: &[f64],
    penalty_grid: &[f64],
    n_folds: usize,
    fold_seed: u64,
) -> Result<RidgeSolution> {
    if penalty_grid.is_empty() {
        return Err(Error::invalid("penalty grid is empty"));
    }
    check_inputs(design.nrows(), y.len(), penalty_grid.iter().all(|&p| valid_penalty(p)))?;
    if n_folds < 2 {
        return Err(Error::invalid("cross-validation needs at least two folds"));
    }
    let n = design.nrows();
    if n < n_folds {
        return Err(Error::invalid(format!("{n} observations is fewer than {n_folds} folds")));
    }
    if penalty_grid.len() == 1 {
        let penalty = penalty_grid[0];
        let coefficients = ridge_fit_design(design, y, penalty)?;
        return Ok(RidgeSolution { coefficients, penalty, cv_errors: Vec::new() });
    }

    let yv = DVector::from_column_slice(y);
    let g_all = gram(design);
    let r_all = design.transpose() * &yv;
    let mut sse = vec![0.0; penalty_grid.len()];
    for fold in fold_slices(n, n_folds, fold_seed) {
        let f_k = design.select_rows(&fold);
        let y_k = DVector::from_iterator(fold.len(), fold.iter().map(|&i| y[i]));
        let g_train = &g_all - gram(&f_k);
        let r_train = &r_all - f_k.transpose() * &y_k;
        for (err, &pen) in sse.iter_mut().zip(penalty_grid) {
            match solve_normal(&g_train, &r_train, pen) {
                Ok(c) => *err += (&y_k - &f_k * c).norm_squared(),
                Err(_) => *err = f64::INFINITY,
            }
        }
    }
    let cv_errors: Vec<f64> = sse.iter().map(|e| e / n as f64).collect();
    let best = cv_errors.iter().copied().fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::IllConditioned("no penalty in the grid gave a solvable fit".into()));
    }
    let penalty = penalty_grid
        .iter()
        .zip(&cv_errors)
        .filter(|(_, &e)| e <= best * (1.0 + TIE_TOLERANCE))
        .map(|(&p, _)| p)
        .fold(f64::NEG_INFINITY, f64::max);
    let coefficients = ridge_fit_design(design, y, penalty)?;
    Ok(RidgeSolution { coefficients, penalty, cv_errors })
}

pub fn ridge_fit(xs: &[f64], ys: &[f64], degree: usize, penalty: f64) -> Result<RidgeFit> {
    let basis = LegendreBasis::new(degree);
    let c = ridge_fit_design(&basis.design(xs), ys, penalty)?;
    Ok(RidgeFit { basis, augmented: false, coefficients: c.as_slice().to_vec(), penalty })
}

pub fn ridge_cv(
    xs: &[f64],
    ys: &[f64],
    degree: usize,
    penalty_grid: &[f64],
    n_folds: usize,
    fold_seed: u64,
) -> Result<RidgeFit> {
    let basis = LegendreBasis::new(degree);
    let sol = ridge_cv_design(&basis.design(xs), ys, penalty_grid, n_folds, fold_seed)?;
    Ok(RidgeFit {
        basis,
        augmented: false,
        coefficients: sol.coefficients.as_slice().to_vec(),
        penalty: sol.penalty,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn interpolates_in_class_function() {
        let fit = ridge_fit(&[-1.0, 0.0, 1.0], &[-2.0, 0.0, 2.0], 1, 0.0).unwrap();
        assert!((fit.predict(0.5) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn single_column_closed_form() {
        let f = DMatrix::from_column_slice(2, 1, &[1.0, 2.0]);
        let c = ridge_fit_design(&f, &[1.0, 2.0], 1.0).unwrap();
        // sum(f y) / (sum(f^2) + lambda) = 5 / 6
        assert!((c[0] - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn huge_penalty_shrinks_to_zero() {
        let xs: Vec<f64> = (0..30).map(|i| -1.0 + i as f64 / 15.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (3.0 * x).sin() + 2.0).collect();
        let fit = ridge_fit(&xs, &ys, 4, 1e12).unwrap();
        assert!(fit.coefficients.iter().all(|c| c.abs() < 1e-6));
    }

    #[test]
    fn singular_unpenalized_system_is_reported() {
        let err = ridge_fit(&[0.3, 0.3, 0.3], &[1.0, 2.0, 3.0], 2, 0.0).unwrap_err();
        assert!(matches!(err, Error::IllConditioned(_)));
    }

    #[test]
    fn mismatched_lengths_rejected() {
        assert!(ridge_fit(&[0.0, 0.1], &[1.0], 1, 0.1).is_err());
        assert!(ridge_fit(&[], &[], 1, 0.1).is_err());
        assert!(ridge_fit(&[0.0], &[1.0], 0, -1.0).is_err());
    }

    #[test]
    fn cv_prefers_minimal_shrinkage_on_noise_free_data() {
        let xs: Vec<f64> = (0..40).map(|i| -1.0 + i as f64 / 20.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 + 2.0 * x).collect();
        let fit = ridge_cv(&xs, &ys, 1, &[1e-8, 1.0, 100.0], 5, 3).unwrap();
        assert_eq!(fit.penalty, 1e-8);
    }

    fn manual_cv_error(xs: &[f64], ys: &[f64], degree: usize, pen: f64, seed: u64) -> f64 {
        let mut sse = 0.0;
        let folds = fold_slices(xs.len(), 5, seed);
        for (k, fold) in folds.iter().enumerate() {
            let train: Vec<usize> =
                folds.iter().enumerate().filter(|(j, _)| *j != k).flat_map(|(_, f)| f.clone()).collect();
            let tx: Vec<f64> = train.iter().map(|&i| xs[i]).collect();
            let ty: Vec<f64> = train.iter().map(|&i| ys[i]).collect();
            let fit = ridge_fit(&tx, &ty, degree, pen).unwrap();
            sse += fold.iter().map(|&i| (fit.predict(xs[i]) - ys[i]).powi(2)).sum::<f64>();
        }
        sse / xs.len() as f64
    }

    #[test]
    fn cv_prefers_heavy_shrinkage_on_pure_noise() {
        let mut rng = rng_from(11);
        let xs: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ys: Vec<f64> = (0..60).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let grid = [1e-8, 1e4];
        let sol = ridge_cv_design(&LegendreBasis::new(5).design(&xs), &ys, &grid, 5, 4).unwrap();
        let direct: Vec<f64> = grid.iter().map(|&p| manual_cv_error(&xs, &ys, 5, p, 4)).collect();
        assert!(direct[1] < direct[0]);
        for (a, b) in sol.cv_errors.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-9 * b.max(1.0), "{a} vs {b}");
        }
        assert_eq!(sol.penalty, 1e4);
    }

    #[test]
    fn ties_go_to_larger_penalty() {
        // Constant targets at degree 0 with a tiny grid spread: CV errors
        // agree to far below the tie tolerance.
        let xs: Vec<f64> = (0..20).map(|i| i as f64 / 20.0).collect();
        let ys = vec![0.0; 20];
        let sol = ridge_cv_design(&LegendreBasis::new(0).design(&xs), &ys, &[1e-3, 1e-2], 5, 0).unwrap();
        assert_eq!(sol.penalty, 1e-2);
    }

    #[test]
    fn too_few_points_for_folds() {
        assert!(ridge_cv(&[0.0, 0.5], &[1.0, 2.0], 0, &[1.0, 2.0], 5, 0).is_err());
        assert!(ridge_cv(&[0.0, 0.5], &[1.0, 2.0], 0, &[], 2, 0).is_err());
    }

    #[test]
    fn fold_slices_partition_indices() {
        let folds = fold_slices(23, 5, 9);
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert_eq!(folds.iter().map(Vec::len).collect::<Vec<_>>(), vec![5, 5, 5, 4, 4]);
    }

    #[test]
    fn default_grid_endpoints() {
        let g = default_penalty_grid();
        assert_eq!(g.len(), 10);
        assert!((g[0] - 1e-6).abs() < 1e-18 && (g[9] - 1e2).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn single_penalty_cv_equals_direct_fit(
            xs in proptest::collection::vec(-1.0f64..1.0, 10..40),
            pen in 1e-6f64..10.0,
            seed in any::<u64>(),
        ) {
            let ys: Vec<f64> = xs.iter().map(|x| x * x - 0.2 * x).collect();
            let a = ridge_cv(&xs, &ys, 3, &[pen], 5, seed).unwrap();
            let b = ridge_fit(&xs, &ys, 3, pen).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn ridge_solution_is_optimal(
            xs in proptest::collection::vec(-1.0f64..1.0, 8..40),
            noise in proptest::collection::vec(-1.0f64..1.0, 40),
            pen in 1e-4f64..10.0,
            j in 0usize..4,
            sign in prop_oneof![Just(-1.0f64), Just(1.0f64)],
        ) {
            let ys: Vec<f64> = xs.iter().zip(&noise).map(|(x, e)| (2.0 * x).cos() + 0.3 * e).collect();
            let f = LegendreBasis::new(3).design(&xs);
            let c = ridge_fit_design(&f, &ys, pen).unwrap();
            let base = ridge_objective(&f, &ys, c.as_slice(), pen);
            let mut moved = c.as_slice().to_vec();
            moved[j] += sign * 1e-3;
            prop_assert!(ridge_objective(&f, &ys, &moved, pen) >= base);
        }

        #[test]
        fn predictions_are_pure(xs in proptest::collection::vec(-1.0f64..1.0, 6..20), x in -1.0f64..1.0) {
            let ys: Vec<f64> = xs.iter().map(|v| v.exp()).collect();
            let fit = ridge_fit(&xs, &ys, 2, 0.1).unwrap();
            prop_assert_eq!(fit.predict(x).to_bits(), fit.predict(x).to_bits());
        }
    }
}
