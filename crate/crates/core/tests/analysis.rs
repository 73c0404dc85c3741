use ppgen::analysis::{
    decompose_mse, empirical_excess_risk, run_scenario_grid, true_mu, true_mu_monte_carlo, GridCombo, GridConfig,
};
use ppgen::dgp::{gp_defaults, Confounding, World};
use ppgen::domain::{Arm, CompositeSample, EstimatorKind, Observation, PredictorKind, ScenarioSpec, WorldSeeds};
use ppgen::regression::{default_penalty_grid, ridge_cv};
use ppgen::seeds::rng_from;
use proptest::prelude::*;
use rand::Rng;

fn spec(lx: f64, conf: Confounding, seed: u64) -> ScenarioSpec {
    ScenarioSpec {
        dgp: gp_defaults::gp_dgp(lx, conf),
        n1: 200,
        n0: 2_000,
        n_os: 5_000,
        noise_sigma: 0.0,
        predictor_kind: PredictorKind::Learned,
        master_seed: seed,
        grid_size: 41,
        seeds: WorldSeeds::from_master(seed),
    }
}

#[test]
fn excess_risk_falls_with_sample_size() {
    let truth = |x: f64| (2.5 * x).sin() + 0.5 * x * x;
    let eval: Vec<f64> = (0..=200).map(|i| -1.0 + i as f64 / 100.0).collect();
    let mut means = Vec::new();
    for n in [40, 160, 640] {
        let mut total = 0.0;
        for rep in 0..50 {
            let mut rng = rng_from(1_000 * n as u64 + rep);
            let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let ys: Vec<f64> = xs.iter().map(|&x| truth(x) + 0.5 * rng.random_range(-1.0..1.0)).collect();
            let fit = ridge_cv(&xs, &ys, 5, &default_penalty_grid(), 5, rep).unwrap();
            total += empirical_excess_risk(&fit, truth, &eval);
        }
        means.push(total / 50.0);
    }
    assert!(means.windows(2).all(|w| w[1] < w[0]), "{means:?}");
}

#[test]
fn quadrature_and_monte_carlo_oracles_agree() {
    for (i, conf) in Confounding::ALL.into_iter().enumerate() {
        let world = World::from_spec(&spec(0.2, conf, 40 + i as u64)).unwrap();
        for arm in [Arm::Control, Arm::Treated] {
            let q = true_mu(&world, arm);
            let mc = true_mu_monte_carlo(&world, arm, 200_000, i as u64);
            let z = (q.mu_a - mc.mu_a).abs() / (q.error_bound.powi(2) + mc.error_bound.powi(2)).sqrt();
            assert!(z < 4.0, "{conf:?} {arm:?}: {} vs {} ({z:.2} SE)", q.mu_a, mc.mu_a);
        }
    }
}

#[test]
fn grid_output_does_not_depend_on_worker_count() {
    let csv_with = |workers| {
        let combos = vec![
            GridCombo { n1: 200, l_x_fom1: 0.5, confounding: Confounding::None },
            GridCombo { n1: 1000, l_x_fom1: 0.2, confounding: Confounding::Strong },
        ];
        let mut cfg = GridConfig::new(combos, vec![EstimatorKind::Om, EstimatorKind::Abc, EstimatorKind::Dr], vec![1, 3]);
        cfg.n_scenarios = 3;
        cfg.n_runs = 2;
        cfg.n0 = 1_000;
        cfg.n_os = 3_000;
        cfg.grid_size = 31;
        cfg.workers = workers;
        let mut buf = Vec::new();
        run_scenario_grid(&cfg).unwrap().write_csv(&mut buf).unwrap();
        buf
    };
    let one = csv_with(1);
    assert_eq!(one, csv_with(3));
    assert_eq!(String::from_utf8(one).unwrap().lines().count(), 1 + 2 * 3 * 2);
}

#[test]
fn decomposition_adds_up() {
    let r = decompose_mse(&spec(0.5, Confounding::Weak, 8), EstimatorKind::Om, 2, 30).unwrap();
    let n = r.n_replications as f64;
    // mse uses the 1/n variance, the reported variance is unbiased.
    assert!((r.mse - (r.bias * r.bias + r.variance * (n - 1.0) / n)).abs() < 1e-12);
    assert_eq!(r.n_failures, 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn composite_samples_survive_a_csv_round_trip(
        rows in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, 0u8..4, -10.0f64..10.0), 0..40),
    ) {
        let recs: Vec<Observation> = rows
            .iter()
            .map(|&(x, u, kind, y)| match kind {
                0 => Observation::target(x, u),
                1 => Observation::trial(x, u, Arm::Treated, y),
                2 => Observation::trial(x, u, Arm::Control, y),
                _ => Observation::observational(x, u, Arm::Treated, y),
            })
            .collect();
        let sample = CompositeSample::new(recs);
        let mut buf = Vec::new();
        sample.write_csv(&mut buf, true).unwrap();
        let back = CompositeSample::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.records(), sample.records());
    }
}
