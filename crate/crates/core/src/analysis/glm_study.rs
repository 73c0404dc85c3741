use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgp::{generate_os, generate_target, sample_glm_params, GlmRow, World};
use crate::domain::{Arm, DgpSpec, EstimatorKind, PredictorKind, ScenarioSpec, WorldSeeds};
use crate::regression::{default_penalty_grid, ridge_cv, FittedRegressor};
use crate::seeds::{derive_seed, rng_from, tag};
use crate::{Error, Result};

use super::scenario::{build_predictor, PreparedScenario};

/// How the observational predictor of the polynomial benchmark is learned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GlmPredictor {
    /// Degree-5 Legendre regression on the OS, the model class of the
    /// outcome surface.
    Polynomial,
    /// The random-feature regressor used by the GP benchmark.
    Flexible,
}

pub const GLM_PREDICTOR_DEGREE: usize = 5;

/// Penalty used for the unpenalized fits; small enough to be invisible, large
/// enough to keep the normal equations solvable on degenerate draws.
pub const LEAST_SQUARES_PENALTY: f64 = 1e-10;

/// How ABC and OM regressions, and the polynomial predictor, are fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GlmFit {
    /// Plain least squares. With a polynomial predictor inside the degree-5
    /// span this makes the 5th-order ABC and OM estimates coincide.
    LeastSquares,
    /// Cross-validated ridge over the default penalty grid.
    RidgeCv,
}

impl GlmFit {
    pub fn penalty_grid(self) -> Vec<f64> {
        match self {
            GlmFit::LeastSquares => vec![LEAST_SQUARES_PENALTY],
            GlmFit::RidgeCv => default_penalty_grid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmStudyConfig {
    pub rows: Vec<usize>,
    pub orders: Vec<usize>,
    pub n_truths: usize,
    pub n_runs: usize,
    pub n1: usize,
    pub n0: usize,
    pub n_os: usize,
    pub master_seed: u64,
    pub predictor: GlmPredictor,
    pub fit: GlmFit,
    pub workers: usize,
    pub progress: bool,
}

impl Default for GlmStudyConfig {
    fn default() -> Self {
        Self {
            rows: (1..=6).collect(),
            orders: vec![1, 5],
            n_truths: 100,
            n_runs: 100,
            n1: 200,
            n0: 20_000,
            n_os: 50_000,
            master_seed: 0,
            predictor: GlmPredictor::Polynomial,
            fit: GlmFit::LeastSquares,
            workers: 1,
            progress: false,
        }
    }
}

/// One line of the polynomial-benchmark table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Row {
    pub row_id: usize,
    pub gamma: f64,
    pub sigma: f64,
    pub beta_scale: f64,
    pub lambda_scale: f64,
    pub estimator: String,
    pub order: usize,
    pub mse: f64,
    /// Standard error of `mse` across ground truths.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mse_se: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_truths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_failures: Option<usize>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    row_id: usize,
    gamma: f64,
    sigma: f64,
    beta_scale: f64,
    lambda_scale: f64,
    estimator: &'a str,
    order: usize,
    mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmStudyReport {
    pub rows: Vec<Table2Row>,
    pub config: GlmStudyConfig,
    /// Ground truths whose cohorts could not be sampled.
    pub failed_truths: usize,
    pub elapsed_seconds: f64,
}

impl GlmStudyReport {
    pub fn row(&self, row_id: usize, estimator: EstimatorKind, order: usize) -> Option<&Table2Row> {
        self.rows
            .iter()
            .find(|r| r.row_id == row_id && r.estimator == estimator.label() && r.order == order)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.rows {
            w.serialize(CsvRow {
                row_id: r.row_id,
                gamma: r.gamma,
                sigma: r.sigma,
                beta_scale: r.beta_scale,
                lambda_scale: r.lambda_scale,
                estimator: &r.estimator,
                order: r.order,
                mse: r.mse,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }
}

const ESTIMATORS: [EstimatorKind; 2] = [EstimatorKind::Abc, EstimatorKind::Om];

/// Scenario of one polynomial ground truth.
pub fn glm_scenario(cfg: &GlmStudyConfig, row_id: usize, truth: usize) -> Result<ScenarioSpec> {
    let row = GlmRow::table()
        .get(row_id.wrapping_sub(1))
        .copied()
        .ok_or_else(|| Error::invalid(format!("row {row_id} is outside 1..=6")))?;
    let seed = derive_seed(cfg.master_seed, &[tag("glm"), row_id as u64, truth as u64]);
    let (fom, ps, pa) = sample_glm_params(&row, &mut rng_from(derive_seed(seed, &[tag("params")])));
    Ok(ScenarioSpec {
        dgp: DgpSpec::Glm { fom, ps, pa },
        n1: cfg.n1,
        n0: cfg.n0,
        n_os: cfg.n_os,
        noise_sigma: row.sigma,
        predictor_kind: PredictorKind::Learned,
        master_seed: seed,
        grid_size: crate::dgp::DEFAULT_GRID_SIZE,
        seeds: WorldSeeds::from_master(seed),
    })
}

fn glm_predictor(world: &World, spec: &ScenarioSpec, kind: GlmPredictor, fit: GlmFit) -> Result<Arc<dyn FittedRegressor>> {
    match kind {
        GlmPredictor::Flexible => {
            build_predictor(world, PredictorKind::Learned, Arm::Treated, spec.n_os, spec.seeds.os, spec.seeds.predictor)
        }
        GlmPredictor::Polynomial => {
            let os = generate_os(world, spec.n_os, spec.seeds.os)?;
            let (xs, ys): (Vec<f64>, Vec<f64>) = os
                .iter()
                .filter(|o| o.arm() == Some(Arm::Treated))
                .filter_map(|o| o.y().map(|y| (o.x(), y)))
                .unzip();
            let fit = ridge_cv(&xs, &ys, GLM_PREDICTOR_DEGREE, &fit.penalty_grid(), 5, spec.seeds.predictor)?;
            Ok(Arc::new(fit))
        }
    }
}

/// `(estimator, order, mean squared error, failed runs)`.
type TruthCell = (EstimatorKind, usize, Option<f64>, usize);

/// Squared errors per (estimator, order) for one truth, averaged over runs.
fn truth_mse(cfg: &GlmStudyConfig, row_id: usize, truth: usize) -> Result<Vec<TruthCell>> {
    let spec = glm_scenario(cfg, row_id, truth)?;
    let world = World::from_spec(&spec)?;
    let predictor = glm_predictor(&world, &spec, cfg.predictor, cfg.fit)?;
    let target = generate_target(&world, spec.n0, spec.seeds.target)?;
    let max_order = cfg.orders.iter().copied().max().unwrap_or(1);
    let prepared = PreparedScenario::from_parts(world, Arm::Treated, target, Some(predictor), max_order)
        .with_penalty_grid(cfg.fit.penalty_grid());
    let mu = prepared.mu.mu_a;

    let mut sums = vec![(0.0, 0usize, 0usize); ESTIMATORS.len() * cfg.orders.len()];
    for run in 0..cfg.n_runs {
        let seed = derive_seed(spec.master_seed, &[tag("run"), run as u64]);
        for (slot, e) in sums.iter_mut().zip(prepared.replicate(cfg.n1, &ESTIMATORS, &cfg.orders, seed)) {
            match e.value {
                Some(v) => {
                    slot.0 += (v - mu).powi(2);
                    slot.1 += 1;
                }
                None => slot.2 += 1,
            }
        }
    }
    let mut out = Vec::with_capacity(sums.len());
    let mut it = sums.into_iter();
    for &order in &cfg.orders {
        for est in ESTIMATORS {
            let (s, ok, failed) = it.next().expect("one slot per estimate");
            out.push((est, order, (ok > 0).then(|| s / ok as f64), failed));
        }
    }
    Ok(out)
}

/// Polynomial benchmark: for each row, `n_truths` sampled coefficient sets,
/// `n_runs` trial redraws each, ABC and OM at the configured orders.
pub fn run_glm_study(cfg: &GlmStudyConfig) -> Result<GlmStudyReport> {
    if cfg.rows.is_empty() || cfg.orders.is_empty() || cfg.n_truths == 0 || cfg.n_runs == 0 {
        return Err(Error::invalid("rows, orders, truths and runs must be nonempty"));
    }
    let start = Instant::now();
    let tasks: Vec<(usize, usize)> =
        cfg.rows.iter().flat_map(|&r| (0..cfg.n_truths).map(move |t| (r, t))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot build worker pool: {e}")))?;
    let results: Vec<Result<_>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(r, t)| {
                let res = truth_mse(cfg, r, t);
                if cfg.progress {
                    eprintln!("row {r} truth {t} done");
                }
                res
            })
            .collect()
    });

    let table = GlmRow::table();
    let mut rows = Vec::new();
    let mut failed_truths = 0;
    let mut per_row: Vec<Vec<Vec<TruthCell>>> = vec![Vec::new(); cfg.rows.len()];
    for ((r, _), res) in tasks.iter().zip(results) {
        let idx = cfg.rows.iter().position(|x| x == r).expect("task row is configured");
        match res {
            Ok(v) => per_row[idx].push(v),
            Err(Error::Generation(_)) => failed_truths += 1,
            Err(e) => return Err(e),
        }
    }
    for (&row_id, truths) in cfg.rows.iter().zip(&per_row) {
        let setting = table[row_id - 1];
        for &order in &cfg.orders {
            for est in ESTIMATORS {
                let mut values = Vec::new();
                let mut failures = 0;
                for t in truths {
                    let (_, _, mse, failed) =
                        t.iter().find(|e| e.0 == est && e.1 == order).copied().expect("estimate present");
                    failures += failed;
                    values.extend(mse);
                }
                let n = values.len();
                let mse = if n == 0 { f64::NAN } else { values.iter().sum::<f64>() / n as f64 };
                let mse_se = (n > 1).then(|| {
                    let v = values.iter().map(|x| (x - mse).powi(2)).sum::<f64>() / (n - 1) as f64;
                    (v / n as f64).sqrt()
                });
                rows.push(Table2Row {
                    row_id,
                    gamma: setting.gamma,
                    sigma: setting.sigma,
                    beta_scale: setting.beta_sd,
                    lambda_scale: setting.lambda,
                    estimator: est.label().to_string(),
                    order,
                    mse,
                    mse_se,
                    n_truths: Some(n),
                    n_failures: Some(failures),
                });
            }
        }
    }
    Ok(GlmStudyReport { rows, config: cfg.clone(), failed_truths, elapsed_seconds: start.elapsed().as_secs_f64() })
}
