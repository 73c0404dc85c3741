use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgp::{gp_defaults, Confounding, DEFAULT_GRID_SIZE};
use crate::domain::{Arm, EstimatorKind, LengthScale, PredictorKind, ScenarioSpec, WorldSeeds};
use crate::seeds::{derive_seed, tag};
use crate::{Error, Result};

use super::scenario::PreparedScenario;

/// One cell of the GP benchmark: trial size, outcome length-scale and
/// hidden-confounding level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCombo {
    pub n1: usize,
    pub l_x_fom1: f64,
    pub confounding: Confounding,
}

impl GridCombo {
    pub fn id(&self) -> String {
        format!("n1={},lx={},conf={}", self.n1, self.l_x_fom1, self.confounding.label())
    }

    /// The twelve combinations of the benchmark.
    pub fn standard_grid() -> Vec<GridCombo> {
        let mut out = Vec::with_capacity(12);
        for n1 in [200, 1000] {
            for l_x_fom1 in [0.5, 0.2] {
                for confounding in Confounding::ALL {
                    out.push(GridCombo { n1, l_x_fom1, confounding });
                }
            }
        }
        out
    }

    fn world_key(&self) -> (u64, Confounding) {
        (lx_key(self.l_x_fom1), self.confounding)
    }
}

impl fmt::Display for GridCombo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

fn lx_key(l: f64) -> u64 {
    (l * 1e6).round() as u64
}

/// Partial match on combo fields, parsed from `n1=200,lx=0.2,conf=none`.
/// Absent keys match anything.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ComboFilter {
    pub n1: Option<usize>,
    pub l_x_fom1: Option<f64>,
    pub confounding: Option<Confounding>,
}

impl ComboFilter {
    pub fn matches(&self, c: &GridCombo) -> bool {
        self.n1.is_none_or(|n| n == c.n1)
            && self.l_x_fom1.is_none_or(|l| lx_key(l) == lx_key(c.l_x_fom1))
            && self.confounding.is_none_or(|k| k == c.confounding)
    }
}

impl FromStr for ComboFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut f = ComboFilter::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("combo filter entry `{part}` is not key=value")))?;
            let bad = || Error::Parse(format!("bad value `{v}` for `{k}`"));
            match k.trim() {
                "n1" => f.n1 = Some(v.trim().parse().map_err(|_| bad())?),
                "lx" | "l_x" | "l_x_fom1" => f.l_x_fom1 = Some(v.trim().parse().map_err(|_| bad())?),
                "conf" | "confounding" => f.confounding = Some(Confounding::parse(v).ok_or_else(bad)?),
                other => return Err(Error::Parse(format!("unknown combo key `{other}`"))),
            }
        }
        Ok(f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub combos: Vec<GridCombo>,
    pub estimators: Vec<EstimatorKind>,
    pub degrees: Vec<usize>,
    pub n_scenarios: usize,
    pub n_runs: usize,
    pub master_seed: u64,
    pub predictor_kind: PredictorKind,
    pub workers: usize,
    pub n0: usize,
    pub n_os: usize,
    pub grid_size: usize,
    /// Print a progress line to stderr after each world.
    pub progress: bool,
}

impl GridConfig {
    pub fn new(combos: Vec<GridCombo>, estimators: Vec<EstimatorKind>, degrees: Vec<usize>) -> Self {
        Self {
            combos,
            estimators,
            degrees,
            n_scenarios: 100,
            n_runs: 100,
            master_seed: 0,
            predictor_kind: PredictorKind::Learned,
            workers: 1,
            n0: 20_000,
            n_os: 50_000,
            grid_size: DEFAULT_GRID_SIZE,
            progress: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.combos.is_empty() {
            return Err(Error::invalid("the grid has no combinations"));
        }
        if self.estimators.is_empty() || self.degrees.is_empty() {
            return Err(Error::invalid("at least one estimator and one degree are required"));
        }
        if self.n_scenarios == 0 || self.n_runs == 0 {
            return Err(Error::invalid("scenario and run counts must be positive"));
        }
        if self.estimators.contains(&EstimatorKind::OmCategorical) {
            return Err(Error::invalid("the stratified estimator is not defined on the GP grid"));
        }
        Ok(())
    }
}

/// Seeds of one GP world. Streams that do not depend on a grid axis are
/// shared across its values, so combos differing only in that axis are
/// compared on common random numbers.
pub fn world_seeds(master: u64, l_x_fom1: f64, conf: Confounding, scenario: usize) -> WorldSeeds {
    let s = scenario as u64;
    let lx = lx_key(l_x_fom1);
    let c = conf.index() as u64;
    WorldSeeds {
        fom: [derive_seed(master, &[tag("fom"), 0, s]), derive_seed(master, &[tag("fom"), 1, lx, s])],
        ps: derive_seed(master, &[tag("ps"), s]),
        pa: derive_seed(master, &[tag("pa"), s]),
        os: derive_seed(master, &[tag("os"), lx, c, s]),
        target: derive_seed(master, &[tag("target"), s]),
        predictor: derive_seed(master, &[tag("predictor"), lx, c, s]),
    }
}

/// Seed of one trial redraw. It does not involve the confounding level,
/// which only changes the observational study.
pub fn run_seed(master: u64, n1: usize, l_x_fom1: f64, scenario: usize, run: usize) -> u64 {
    derive_seed(master, &[tag("run"), n1 as u64, lx_key(l_x_fom1), scenario as u64, run as u64])
}

/// Scenario description of one GP world.
pub fn gp_scenario(cfg: &GridConfig, n1: usize, l_x_fom1: f64, conf: Confounding, scenario: usize) -> ScenarioSpec {
    ScenarioSpec {
        dgp: gp_defaults::gp_dgp(l_x_fom1, conf),
        n1,
        n0: cfg.n0,
        n_os: cfg.n_os,
        noise_sigma: 0.0,
        predictor_kind: cfg.predictor_kind,
        master_seed: cfg.master_seed,
        grid_size: cfg.grid_size,
        seeds: world_seeds(cfg.master_seed, l_x_fom1, conf, scenario),
    }
}

/// Aggregated results of one (combo, estimator, degree).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub combo_id: String,
    pub n1: usize,
    pub l_x_fom1: f64,
    pub l_u_pa: String,
    pub alpha_u_pa: f64,
    pub estimator: String,
    pub degree: usize,
    pub rmse: f64,
    pub bias_sq: f64,
    pub variance: f64,
    pub n_scenarios: usize,
    pub n_runs: usize,
    pub n_failures: usize,
    pub master_seed: u64,
    /// Standard error of `rmse` across scenarios.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rmse_se: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub per_scenario_rmse: Vec<f64>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    combo_id: &'a str,
    n1: usize,
    l_x_fom1: f64,
    l_u_pa: &'a str,
    alpha_u_pa: f64,
    estimator: &'a str,
    degree: usize,
    rmse: f64,
    bias_sq: f64,
    variance: f64,
    n_scenarios: usize,
    n_runs: usize,
    n_failures: usize,
    master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMetadata {
    pub master_seed: u64,
    pub n_scenarios: usize,
    pub n_runs: usize,
    pub n0: usize,
    pub n_os: usize,
    pub predictor_kind: PredictorKind,
    pub workers: usize,
    pub elapsed_seconds: f64,
    pub total_failures: usize,
    pub total_estimates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub rows: Vec<GridRow>,
    pub metadata: GridMetadata,
}

impl GridReport {
    pub fn row(&self, combo: &GridCombo, estimator: EstimatorKind, degree: usize) -> Option<&GridRow> {
        let id = combo.id();
        self.rows
            .iter()
            .find(|r| r.combo_id == id && r.estimator == estimator.label() && r.degree == degree)
    }

    /// Fraction of requested estimates that failed.
    pub fn failure_rate(&self) -> f64 {
        if self.metadata.total_estimates == 0 {
            0.0
        } else {
            self.metadata.total_failures as f64 / self.metadata.total_estimates as f64
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.rows {
            w.serialize(CsvRow {
                combo_id: &r.combo_id,
                n1: r.n1,
                l_x_fom1: r.l_x_fom1,
                l_u_pa: &r.l_u_pa,
                alpha_u_pa: r.alpha_u_pa,
                estimator: &r.estimator,
                degree: r.degree,
                rmse: r.rmse,
                bias_sq: r.bias_sq,
                variance: r.variance,
                n_scenarios: r.n_scenarios,
                n_runs: r.n_runs,
                n_failures: r.n_failures,
                master_seed: r.master_seed,
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

/// Mean and standard error of the per-scenario RMSE difference `a - b`.
/// Both rows must come from the same grid so scenarios are paired.
pub fn paired_rmse_gap(a: &GridRow, b: &GridRow) -> Option<(f64, f64)> {
    if a.per_scenario_rmse.len() != b.per_scenario_rmse.len() || a.per_scenario_rmse.len() < 2 {
        return None;
    }
    let d: Vec<f64> = a.per_scenario_rmse.iter().zip(&b.per_scenario_rmse).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let m = mean(&d);
    let var = d.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    Some((m, (var / n).sqrt()))
}

/// Errors of one (estimator, degree) in one scenario, `None` per failed run.
type ScenarioErrors = BTreeMap<(EstimatorKind, usize), Vec<Option<f64>>>;

struct Stats {
    rmse: f64,
    bias_sq: f64,
    variance: f64,
}

fn scenario_stats(errors: &[Option<f64>]) -> Option<Stats> {
    let e: Vec<f64> = errors.iter().flatten().copied().collect();
    if e.is_empty() {
        return None;
    }
    let r = e.len() as f64;
    let mean = e.iter().sum::<f64>() / r;
    let variance = if e.len() > 1 {
        e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0)
    } else {
        0.0
    };
    Some(Stats { rmse: (e.iter().map(|v| v * v).sum::<f64>() / r).sqrt(), bias_sq: mean * mean, variance })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Runs the GP benchmark grid.
///
/// Work is split into one task per (world, scenario); a task draws its
/// world, observational predictor and target sample once and then evaluates
/// every trial size that shares them. Aggregation happens after all tasks
/// finish, in combo and scenario order, so results do not depend on
/// `workers`.
pub fn run_scenario_grid(cfg: &GridConfig) -> Result<GridReport> {
    cfg.validate()?;
    let start = Instant::now();
    let max_degree = cfg.degrees.iter().copied().max().unwrap_or(0);
    let need_predictor = cfg.estimators.iter().any(|e| e.uses_predictor());

    let mut keys: Vec<(u64, Confounding, f64)> = Vec::new();
    for c in &cfg.combos {
        let (lx, conf) = c.world_key();
        if !keys.iter().any(|k| k.0 == lx && k.1 == conf) {
            keys.push((lx, conf, c.l_x_fom1));
        }
    }
    let tasks: Vec<(usize, usize)> =
        (0..keys.len()).flat_map(|k| (0..cfg.n_scenarios).map(move |s| (k, s))).collect();

    let done = AtomicUsize::new(0);
    let run_task = |&(k, s): &(usize, usize)| -> Result<Vec<(usize, ScenarioErrors)>> {
        let (key_lx, conf, l_x) = keys[k];
        let spec = gp_scenario(cfg, cfg.combos[0].n1, l_x, conf, s);
        let prepared = PreparedScenario::new(&spec, Arm::Treated, max_degree, need_predictor)?;
        let mu = prepared.mu.mu_a;
        let mut out = Vec::new();
        for (ci, combo) in cfg.combos.iter().enumerate() {
            if combo.world_key() != (key_lx, conf) {
                continue;
            }
            let mut errs = ScenarioErrors::new();
            for run in 0..cfg.n_runs {
                let seed = run_seed(cfg.master_seed, combo.n1, l_x, s, run);
                for est in prepared.replicate(combo.n1, &cfg.estimators, &cfg.degrees, seed) {
                    errs.entry((est.estimator, est.degree)).or_default().push(est.value.map(|v| v - mu));
                }
            }
            out.push((ci, errs));
        }
        let n = done.fetch_add(1, Ordering::Relaxed) + 1;
        if cfg.progress {
            eprintln!("[{n}/{}] worlds done", tasks.len());
        }
        Ok(out)
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot build worker pool: {e}")))?;
    let results: Vec<Result<Vec<(usize, ScenarioErrors)>>> = pool.install(|| tasks.par_iter().map(run_task).collect());

    // per combo: scenario-ordered list of error tables
    let mut by_combo: Vec<Vec<ScenarioErrors>> = vec![Vec::new(); cfg.combos.len()];
    for r in results {
        for (ci, errs) in r? {
            by_combo[ci].push(errs);
        }
    }

    let mut rows = Vec::new();
    let (mut total_failures, mut total_estimates) = (0, 0);
    for (combo, scenarios) in cfg.combos.iter().zip(&by_combo) {
        let (l_u, alpha_u) = combo.confounding.pa_u_params();
        let l_u_pa = match l_u {
            LengthScale::Inactive => "inf".to_string(),
            LengthScale::Active(v) => v.to_string(),
        };
        for &est in &cfg.estimators {
            for &degree in &cfg.degrees {
                let mut failures = 0;
                let mut stats = Vec::with_capacity(scenarios.len());
                for sc in scenarios {
                    let errs = &sc[&(est, degree)];
                    failures += errs.iter().filter(|e| e.is_none()).count();
                    total_estimates += errs.len();
                    if let Some(s) = scenario_stats(errs) {
                        stats.push(s);
                    }
                }
                total_failures += failures;
                let per: Vec<f64> = stats.iter().map(|s| s.rmse).collect();
                let (rmse, bias_sq, variance, rmse_se) = if stats.is_empty() {
                    (f64::NAN, f64::NAN, f64::NAN, None)
                } else {
                    let m = mean(&per);
                    let se = (per.len() > 1).then(|| {
                        let v = per.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (per.len() - 1) as f64;
                        (v / per.len() as f64).sqrt()
                    });
                    let bias: Vec<f64> = stats.iter().map(|s| s.bias_sq).collect();
                    let var: Vec<f64> = stats.iter().map(|s| s.variance).collect();
                    (m, mean(&bias), mean(&var), se)
                };
                rows.push(GridRow {
                    combo_id: combo.id(),
                    n1: combo.n1,
                    l_x_fom1: combo.l_x_fom1,
                    l_u_pa: l_u_pa.clone(),
                    alpha_u_pa: alpha_u,
                    estimator: est.label().to_string(),
                    degree,
                    rmse,
                    bias_sq,
                    variance,
                    n_scenarios: stats.len(),
                    n_runs: cfg.n_runs,
                    n_failures: failures,
                    master_seed: cfg.master_seed,
                    rmse_se,
                    per_scenario_rmse: per,
                });
            }
        }
    }

    Ok(GridReport {
        rows,
        metadata: GridMetadata {
            master_seed: cfg.master_seed,
            n_scenarios: cfg.n_scenarios,
            n_runs: cfg.n_runs,
            n0: cfg.n0,
            n_os: cfg.n_os,
            predictor_kind: cfg.predictor_kind,
            workers: cfg.workers,
            elapsed_seconds: start.elapsed().as_secs_f64(),
            total_failures,
            total_estimates,
        },
    })
}
