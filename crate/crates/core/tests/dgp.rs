use ppgen::analysis::PreparedScenario;
use ppgen::dgp::{generate_os, generate_trial, gp_defaults, kernel_eval, lattice, sample_gp, Confounding, World};
use ppgen::domain::{Arm, EstimatorKind, PredictorKind, ScenarioSpec, WorldSeeds};

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
fn gp_draws_have_the_kernel_variance() {
    let params = gp_defaults::fom_kernel(0.5);
    let g = 21;
    let pts = lattice(g);
    let draws = 10_000;
    // Corner, centre and an interior point.
    let cells = [(0, 0), (10, 10), (15, 4)];
    let mut sums = [0.0; 3];
    for seed in 0..draws {
        let f = sample_gp(&params, g, seed as u64).unwrap();
        for (k, &(i, j)) in cells.iter().enumerate() {
            sums[k] += f.at(i, j).powi(2);
        }
    }
    for (k, &(i, j)) in cells.iter().enumerate() {
        let var = kernel_eval(&params, (pts[i], pts[j]), (pts[i], pts[j]));
        let got = sums[k] / draws as f64;
        // The sample second moment of a normal has relative SE sqrt(2 / n).
        let se = var * (2.0 / draws as f64).sqrt();
        assert!((got - var).abs() < 4.0 * se, "cell ({i},{j}): {got} vs {var}");
    }
}

#[test]
fn without_confounding_observational_and_trial_outcomes_agree_within_bins() {
    let world = World::from_spec(&spec(0.5, Confounding::None, 3)).unwrap();
    let os = generate_os(&world, 200_000, 1).unwrap();
    let trial = generate_trial(&world, 200_000, 2).unwrap();
    let bins = 8;
    let stats = |recs: &[ppgen::domain::Observation]| {
        let mut s = vec![(0.0, 0.0, 0usize); bins];
        for o in recs.iter().filter(|o| o.arm() == Some(Arm::Treated)) {
            let b = (((o.x() + 1.0) / 2.0 * bins as f64) as usize).min(bins - 1);
            let y = o.y().unwrap();
            s[b].0 += y;
            s[b].1 += y * y;
            s[b].2 += 1;
        }
        s
    };
    let (a, b) = (stats(&os), stats(&trial));
    for k in 0..bins {
        let mean_var = |(s, ss, n): (f64, f64, usize)| {
            let m = s / n as f64;
            (m, (ss / n as f64 - m * m) / n as f64)
        };
        let ((ma, va), (mb, vb)) = (mean_var(a[k]), mean_var(b[k]));
        assert!((ma - mb).abs() < 4.0 * (va + vb).sqrt() + 1e-3, "bin {k}: {ma} vs {mb}");
    }
}

#[test]
fn the_pipeline_is_a_pure_function_of_the_seed() {
    let s = spec(0.2, Confounding::Strong, 9);
    let run = || {
        let p = PreparedScenario::new(&s, Arm::Treated, 3, true).unwrap();
        p.replicate(200, &EstimatorKind::ALL, &[1, 3], 77)
            .into_iter()
            .map(|e| e.value.map(f64::to_bits))
            .collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn confounding_only_changes_the_observational_arm() {
    let a = World::from_spec(&spec(0.5, Confounding::None, 5)).unwrap();
    let b = World::from_spec(&spec(0.5, Confounding::Strong, 5)).unwrap();
    for &(x, u) in &[(-0.7, 0.1), (0.0, -0.9), (0.6, 0.6)] {
        assert_eq!(a.outcome(Arm::Treated, x, u), b.outcome(Arm::Treated, x, u));
        assert_eq!(a.participation_prob(x, u), b.participation_prob(x, u));
    }
}
