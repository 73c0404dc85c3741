use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dgp::{generate_trial, gp_defaults, write_world_csv, Confounding, World, DEFAULT_GRID_SIZE};
use crate::domain::{Arm, PredictorKind, ScenarioSpec};
use crate::estimators::{fit_augmented, fit_bias, fit_outcome, ArmData, EstimatorConfig};
use crate::quadrature::GaussLegendre;
use crate::regression::FittedRegressor;
use crate::seeds::{derive_seed, tag};
use crate::Result;

use super::grid::world_seeds;
use super::scenario::build_predictor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportConfig {
    pub master_seed: u64,
    pub l_x_fom1: f64,
    pub confounding: Confounding,
    pub scenario: usize,
    pub n1: usize,
    pub n_os: usize,
    pub degree: usize,
    pub grid_size: usize,
    pub curve_points: usize,
}

impl Default for ExportConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            l_x_fom1: 0.2,
            confounding: Confounding::Strong,
            scenario: 0,
            n1: 200,
            n_os: 50_000,
            degree: 3,
            grid_size: DEFAULT_GRID_SIZE,
            curve_points: 201,
        }
    }
}

pub fn export_scenario(cfg: &ExportConfig) -> ScenarioSpec {
    ScenarioSpec {
        dgp: gp_defaults::gp_dgp(cfg.l_x_fom1, cfg.confounding),
        n1: cfg.n1,
        n0: 1,
        n_os: cfg.n_os,
        noise_sigma: 0.0,
        predictor_kind: PredictorKind::Learned,
        master_seed: cfg.master_seed,
        grid_size: cfg.grid_size,
        seeds: world_seeds(cfg.master_seed, cfg.l_x_fom1, cfg.confounding, cfg.scenario),
    }
}

#[derive(Serialize)]
struct CurveRow {
    x: f64,
    g1: f64,
    f1: f64,
    b1: f64,
    g1_hat: f64,
    b1_hat: f64,
    h1_hat: f64,
}

/// Writes the lattice of the world's surfaces and, on a 1-D grid, the true
/// trial outcome function `g1`, the observational predictor `f1`, the bias
/// `f1 - g1` and the fits of `g1`, of the bias and of the augmented model on
/// one trial draw.
pub fn export_world<W1: Write, W2: Write>(cfg: &ExportConfig, lattice: W1, curves: W2) -> Result<()> {
    let spec = export_scenario(cfg);
    let world = World::from_spec(&spec)?;
    write_world_csv(&world, cfg.grid_size, lattice)?;

    let arm = Arm::Treated;
    let f = build_predictor(&world, PredictorKind::Learned, arm, spec.n_os, spec.seeds.os, spec.seeds.predictor)?;
    let seed = derive_seed(cfg.master_seed, &[tag("export"), cfg.scenario as u64]);
    let trial = generate_trial(&world, cfg.n1, seed)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = trial
        .iter()
        .filter(|o| o.arm() == Some(arm))
        .filter_map(|o| o.y().map(|y| (o.x(), y)))
        .unzip();
    let data = ArmData::new(xs, ys, Some(f.as_ref()));
    let ecfg = EstimatorConfig::new(cfg.degree, arm, derive_seed(seed, &[tag("folds")]));
    let g_hat = fit_outcome(&data, &ecfg)?;
    let b_hat = fit_bias(&data, &ecfg)?;
    let h_hat = fit_augmented(&data, &ecfg)?;

    let q = GaussLegendre::new(64);
    let g = |x: f64| {
        let num = q.integrate(|u| world.outcome(arm, x, u) * world.participation_prob(x, u));
        num / q.integrate(|u| world.participation_prob(x, u))
    };
    let mut w = csv::Writer::from_writer(curves);
    let m = cfg.curve_points.max(2);
    for i in 0..m {
        let x = -1.0 + 2.0 * i as f64 / (m - 1) as f64;
        let (gx, fx) = (g(x), f.predict(x));
        w.serialize(CurveRow {
            x,
            g1: gx,
            f1: fx,
            b1: fx - gx,
            g1_hat: g_hat.predict(x),
            b1_hat: b_hat.predict(x),
            h1_hat: h_hat.predict_augmented(x, fx),
        })?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn export_is_deterministic_and_well_formed() {
        let cfg = ExportConfig { n_os: 5_000, grid_size: 21, curve_points: 11, ..ExportConfig::default() };
        let run = || {
            let (mut a, mut b) = (Vec::new(), Vec::new());
            export_world(&cfg, &mut a, &mut b).unwrap();
            (a, b)
        };
        let (l1, c1) = run();
        let (l2, c2) = run();
        assert_eq!((&l1, &c1), (&l2, &c2));
        let lattice = String::from_utf8(l1).unwrap();
        assert_eq!(lattice.lines().count(), 1 + 21 * 21);
        assert_eq!(lattice.lines().next().unwrap(), "x,u,fom0,fom1,ps,pa");
        let curves = String::from_utf8(c1).unwrap();
        assert_eq!(curves.lines().next().unwrap(), "x,g1,f1,b1,g1_hat,b1_hat,h1_hat");
        assert_eq!(curves.lines().count(), 12);
    }
}
