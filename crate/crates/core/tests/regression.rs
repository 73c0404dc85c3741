use ppgen::regression::{
    default_penalty_grid, flexible_fit, legendre_design, logistic_fit, ridge_cv, ridge_fit, FittedRegressor,
    FlexibleConfig, LogisticConfig,
};
use ppgen::seeds::rng_from;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn flexible_fit_recovers_a_wiggly_function() {
    let mut rng = rng_from(4);
    let n = 50_000;
    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| (6.0 * x).sin() + 0.1 * rng.random_range(-1.0..1.0)).collect();
    let fit = flexible_fit(&xs, &ys, &FlexibleConfig::default()).unwrap();
    let grid: Vec<f64> = (0..=400).map(|i| -1.0 + i as f64 / 200.0).collect();
    let rmse = (grid.iter().map(|&x| (fit.predict(x) - (6.0 * x).sin()).powi(2)).sum::<f64>() / grid.len() as f64).sqrt();
    assert!(rmse < 0.05, "rmse {rmse}");
}

#[test]
fn cv_ridge_tracks_a_cubic_with_noise() {
    let mut rng = rng_from(8);
    let truth = |x: f64| 1.0 - x + 0.5 * x.powi(3);
    let xs: Vec<f64> = (0..500).map(|_| rng.random_range(-1.0..1.0)).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| truth(x) + 0.2 * rng.random_range(-1.0..1.0)).collect();
    let fit = ridge_cv(&xs, &ys, 5, &default_penalty_grid(), 5, 1).unwrap();
    for x in [-0.9, -0.3, 0.0, 0.4, 0.8] {
        assert!((fit.predict(x) - truth(x)).abs() < 0.05, "x={x}");
    }
}

#[test]
fn logistic_fit_recovers_a_linear_logit() {
    let mut rng = rng_from(2);
    let n = 20_000;
    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let p = |x: f64| 1.0 / (1.0 + (-(0.3 + 1.5 * x)).exp());
    let labels: Vec<bool> = xs.iter().map(|&x| rng.random::<f64>() < p(x)).collect();
    let fit = logistic_fit(&xs, &labels, &LogisticConfig::new(1)).unwrap();
    assert!(fit.converged);
    for x in [-0.8, 0.0, 0.7] {
        assert!((fit.predict_proba(x) - p(x)).abs() < 0.03, "x={x}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn larger_penalty_never_grows_the_coefficient_norm(
        ys in proptest::collection::vec(-3.0f64..3.0, 12),
        lo in 1e-6f64..1.0,
        factor in 1.5f64..100.0,
    ) {
        let xs: Vec<f64> = (0..12).map(|i| -1.0 + 2.0 * i as f64 / 11.0).collect();
        let norm = |p: f64| ridge_fit(&xs, &ys, 3, p).unwrap().coefficients.iter().map(|c| c * c).sum::<f64>();
        prop_assert!(norm(lo * factor) <= norm(lo) * (1.0 + 1e-9));
    }

    #[test]
    fn design_rows_match_pointwise_evaluation(xs in proptest::collection::vec(-1.0f64..1.0, 1..10), d in 0usize..8) {
        let m = legendre_design(&xs, d);
        prop_assert_eq!(m.ncols(), d + 1);
        for (i, &x) in xs.iter().enumerate() {
            let row = ppgen::regression::legendre_eval(x, d);
            for k in 0..=d {
                prop_assert!((m[(i, k)] - row[k]).abs() < 1e-12);
            }
        }
    }
}
