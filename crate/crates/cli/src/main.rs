//! `ppgen`: runs the simulation studies and theory checks and writes their
//! tables as CSV and/or JSON.

mod config;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ppgen::analysis::{
    export_world, paired_rmse_gap, run_checks, run_glm_study, run_scenario_grid, CheckConfig, CheckKind,
    ExportConfig, GlmFit, GlmPredictor, GlmStudyConfig, GridCombo, GridConfig, GridReport,
};
use ppgen::dgp::Confounding;
use ppgen::domain::{EstimatorKind, PredictorKind};

use config::{split_list, Format, RunConfig, Settings};

#[derive(Parser, Debug)]
#[command(name = "ppgen", version, about = "Prediction-powered generalization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// Fraction of the full scenario / replication counts, in (0, 1].
    #[arg(long, global = true)]
    scale: Option<f64>,
    /// Master seed; falls back to PPGEN_SEED, then 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads for the simulation grid.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Combo filter such as `n1=200,lx=0.2,conf=none`; repeatable, a combo
    /// is kept if it matches any filter.
    #[arg(long, global = true)]
    combo: Vec<String>,
    /// Comma-separated estimator labels (OM, OS-OM, ABC, AOM, IPW, DR, DR-ABC, DR-PA).
    #[arg(long, global = true)]
    estimators: Option<String>,
    /// Comma-separated polynomial degrees.
    #[arg(long, global = true)]
    degrees: Option<String>,
    /// Check to run; repeatable.
    #[arg(long, global = true)]
    check: Vec<String>,
    /// JSON file with defaults for the flags above.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Largest tolerated fraction of failed estimates before exiting nonzero.
    #[arg(long, global = true)]
    max_failure_rate: Option<f64>,
    /// Print a progress line per finished world.
    #[arg(long, global = true)]
    progress: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// RMSE of OM, OS-OM, ABC and AOM over the 12-combo GP grid.
    Figure3,
    /// Squared bias and variance over the GP grid.
    Biasvar,
    /// The GP grid with the weighting and doubly-robust estimators added.
    Ipwdr,
    /// MSE of ABC and OM on the polynomial benchmark.
    Table2 {
        /// Comma-separated row numbers (1-6).
        #[arg(long)]
        rows: Option<String>,
        /// Learn the observational predictor with random features instead of
        /// a degree-5 polynomial.
        #[arg(long)]
        flexible_predictor: bool,
        /// Fit ABC, OM and the polynomial predictor by cross-validated ridge
        /// instead of least squares.
        #[arg(long)]
        ridge: bool,
    },
    /// The GP grid with a predictor that outputs pure noise.
    NoiseRobustness {
        /// Exit nonzero unless AOM stays within 2 standard errors of OM on every combo.
        #[arg(long)]
        assert: bool,
    },
    /// Theory and numerical checks; prints PASS/FAIL per check.
    Checks {
        /// Build the basis without normalization (negative control).
        #[arg(long)]
        corrupt_basis: bool,
    },
    /// Writes one world's surfaces and fitted curves.
    ExportWorld {
        #[arg(long, default_value_t = 0.2)]
        lx: f64,
        #[arg(long, default_value = "strong")]
        conf: String,
        #[arg(long, default_value_t = 0)]
        scenario: usize,
        #[arg(long, default_value_t = 200)]
        n1: usize,
        #[arg(long, default_value_t = 3)]
        degree: usize,
    },
}

const FIGURE_ESTIMATORS: [EstimatorKind; 4] =
    [EstimatorKind::Om, EstimatorKind::OsOm, EstimatorKind::Abc, EstimatorKind::Aom];
const FIGURE_DEGREES: [usize; 4] = [1, 3, 5, 7];

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn settings(common: &CommonArgs) -> Result<Settings> {
    let file = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let flags = RunConfig {
        scale: common.scale,
        seed: common.seed,
        out: common.out.clone(),
        format: common.format,
        workers: common.workers,
        combos: (!common.combo.is_empty()).then(|| common.combo.clone()),
        estimators: common.estimators.as_deref().map(split_list),
        degrees: common
            .degrees
            .as_deref()
            .map(|s| split_list(s).iter().map(|d| d.parse::<usize>()).collect::<Result<Vec<_>, _>>())
            .transpose()
            .context("--degrees must be a comma-separated list of integers")?,
        checks: (!common.check.is_empty()).then(|| common.check.clone()),
        max_failure_rate: common.max_failure_rate,
    };
    let env = std::env::var("PPGEN_SEED").ok();
    Settings::resolve(file.overlay(flags), env.as_deref())
}

/// Returns `Ok(false)` when the command ran but reported a failure.
fn run(cli: Cli) -> Result<bool> {
    let s = settings(&cli.common)?;
    fs::create_dir_all(&s.out).with_context(|| format!("creating {}", s.out.display()))?;
    let progress = cli.common.progress;
    match cli.command {
        Command::Figure3 => grid_command(&s, "figure3", &FIGURE_ESTIMATORS, PredictorKind::Learned, progress),
        Command::Biasvar => grid_command(&s, "biasvar", &FIGURE_ESTIMATORS, PredictorKind::Learned, progress),
        Command::Ipwdr => grid_command(&s, "ipwdr", &EstimatorKind::ALL, PredictorKind::Learned, progress),
        Command::NoiseRobustness { assert } => noise_command(&s, assert, progress),
        Command::Table2 { rows, flexible_predictor, ridge } => table2_command(&s, rows, flexible_predictor, ridge, progress),
        Command::Checks { corrupt_basis } => checks_command(&s, corrupt_basis),
        Command::ExportWorld { lx, conf, scenario, n1, degree } => {
            let confounding = Confounding::parse(&conf).with_context(|| format!("unknown confounding `{conf}`"))?;
            let cfg = ExportConfig {
                master_seed: s.seed,
                l_x_fom1: lx,
                confounding,
                scenario,
                n1,
                degree,
                ..ExportConfig::default()
            };
            let lattice = create(&s.out.join("world_lattice.csv"))?;
            let curves = create(&s.out.join("world_curves.csv"))?;
            export_world(&cfg, lattice, curves)?;
            println!("wrote world_lattice.csv and world_curves.csv to {}", s.out.display());
            Ok(true)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn grid_config(s: &Settings, defaults: &[EstimatorKind], predictor: PredictorKind, progress: bool) -> Result<GridConfig> {
    let combos: Vec<GridCombo> = GridCombo::standard_grid()
        .into_iter()
        .filter(|c| s.combos.is_empty() || s.combos.iter().any(|f| f.matches(c)))
        .collect();
    anyhow::ensure!(!combos.is_empty(), "no combination matches the --combo filters");
    let estimators = s.estimators.clone().unwrap_or_else(|| defaults.to_vec());
    let degrees = s.degrees.clone().unwrap_or_else(|| FIGURE_DEGREES.to_vec());
    let mut cfg = GridConfig::new(combos, estimators, degrees);
    cfg.n_scenarios = s.scaled(100);
    cfg.n_runs = s.scaled(100);
    cfg.master_seed = s.seed;
    cfg.predictor_kind = predictor;
    cfg.workers = s.workers;
    cfg.progress = progress;
    Ok(cfg)
}

fn write_grid(s: &Settings, stem: &str, report: &GridReport) -> Result<()> {
    if s.format.csv() {
        report.write_csv(create(&s.out.join(format!("{stem}.csv")))?)?;
    }
    if s.format.json() {
        report.write_json(create(&s.out.join(format!("{stem}.json")))?)?;
    }
    Ok(())
}

fn failures_ok(s: &Settings, report: &GridReport) -> bool {
    let rate = report.failure_rate();
    if rate > s.max_failure_rate {
        eprintln!(
            "FAIL: {} of {} estimates failed ({:.2}% > {:.2}%)",
            report.metadata.total_failures,
            report.metadata.total_estimates,
            100.0 * rate,
            100.0 * s.max_failure_rate
        );
        false
    } else {
        true
    }
}

fn grid_command(
    s: &Settings,
    stem: &str,
    defaults: &[EstimatorKind],
    predictor: PredictorKind,
    progress: bool,
) -> Result<bool> {
    let cfg = grid_config(s, defaults, predictor, progress)?;
    let report = run_scenario_grid(&cfg)?;
    write_grid(s, stem, &report)?;
    println!(
        "{stem}: {} rows, {} scenarios x {} runs per combo, {:.1}s",
        report.rows.len(),
        cfg.n_scenarios,
        cfg.n_runs,
        report.metadata.elapsed_seconds
    );
    Ok(failures_ok(s, &report))
}

#[derive(Serialize)]
struct NoiseRow {
    combo_id: String,
    degree: usize,
    om_rmse: f64,
    aom_rmse: f64,
    abc_rmse: f64,
    aom_minus_om: f64,
    paired_se: f64,
    aom_within_2se: bool,
    abc_above_om: bool,
}

fn noise_command(s: &Settings, assert: bool, progress: bool) -> Result<bool> {
    let cfg = grid_config(s, &FIGURE_ESTIMATORS, PredictorKind::IidNoise, progress)?;
    let report = run_scenario_grid(&cfg)?;
    write_grid(s, "noise_robustness", &report)?;

    let mut rows = Vec::new();
    let has = |e: EstimatorKind| cfg.estimators.contains(&e);
    if has(EstimatorKind::Om) && has(EstimatorKind::Aom) && has(EstimatorKind::Abc) {
        for combo in &cfg.combos {
            for &d in &cfg.degrees {
                let get = |e| report.row(combo, e, d).expect("row for every estimator and degree");
                let (om, aom, abc) = (get(EstimatorKind::Om), get(EstimatorKind::Aom), get(EstimatorKind::Abc));
                let (gap, se) = paired_rmse_gap(aom, om).unwrap_or((aom.rmse - om.rmse, f64::NAN));
                rows.push(NoiseRow {
                    combo_id: combo.id(),
                    degree: d,
                    om_rmse: om.rmse,
                    aom_rmse: aom.rmse,
                    abc_rmse: abc.rmse,
                    aom_minus_om: gap,
                    paired_se: se,
                    aom_within_2se: gap.abs() <= 2.0 * se,
                    abc_above_om: abc.rmse > om.rmse,
                });
            }
        }
    }
    let mut w = csv::Writer::from_writer(create(&s.out.join("noise_robustness_report.csv"))?);
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let flagged = rows.iter().filter(|r| !r.aom_within_2se).count();
    println!(
        "noise-robustness: {} rows, AOM outside 2 SE of OM on {flagged} of {} (combo, degree) cells",
        report.rows.len(),
        rows.len()
    );
    Ok(failures_ok(s, &report) && (!assert || flagged == 0))
}

fn table2_command(s: &Settings, rows: Option<String>, flexible: bool, ridge: bool, progress: bool) -> Result<bool> {
    let mut cfg = GlmStudyConfig {
        n_truths: s.scaled(100),
        master_seed: s.seed,
        workers: s.workers,
        progress,
        predictor: if flexible { GlmPredictor::Flexible } else { GlmPredictor::Polynomial },
        fit: if ridge { GlmFit::RidgeCv } else { GlmFit::LeastSquares },
        ..GlmStudyConfig::default()
    };
    if let Some(r) = rows {
        cfg.rows = split_list(&r).iter().map(|v| v.parse()).collect::<Result<Vec<usize>, _>>()?;
        anyhow::ensure!(cfg.rows.iter().all(|r| (1..=6).contains(r)), "rows must lie in 1..=6");
    }
    if let Some(d) = &s.degrees {
        cfg.orders = d.clone();
    }
    let report = run_glm_study(&cfg)?;
    if s.format.csv() {
        report.write_csv(create(&s.out.join("table2.csv"))?)?;
    }
    if s.format.json() {
        report.write_json(create(&s.out.join("table2.json"))?)?;
    }
    for r in &report.rows {
        println!("row {} {:>4} order {}: mse {:.4}", r.row_id, r.estimator, r.order, r.mse);
    }
    let total = cfg.rows.len() * cfg.n_truths;
    let rate = report.failed_truths as f64 / total as f64;
    if rate > s.max_failure_rate {
        eprintln!("FAIL: {} of {total} ground truths could not be sampled", report.failed_truths);
        return Ok(false);
    }
    Ok(true)
}

fn checks_command(s: &Settings, corrupt_basis: bool) -> Result<bool> {
    let d = CheckConfig::default();
    let cfg = CheckConfig {
        master_seed: s.seed,
        prop1_reps: s.scaled(d.prop1_reps / 100) * 100,
        theorem_refits: s.scaled(d.theorem_refits / 100) * 100,
        lemma2_worlds: s.scaled(d.lemma2_worlds),
        dr_reps: s.scaled(d.dr_reps).max(3),
        normalized_basis: !corrupt_basis,
        ..d
    };
    let kinds = s.checks.clone().unwrap_or_else(|| CheckKind::ALL.to_vec());
    let outcomes = run_checks(&kinds, &cfg)?;
    for o in &outcomes {
        println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.kind, o.detail);
    }
    if s.format.csv() {
        let mut w = csv::Writer::from_writer(create(&s.out.join("checks.csv"))?);
        w.write_record(["check", "passed", "detail"])?;
        for o in &outcomes {
            w.write_record([o.kind.label(), if o.passed { "true" } else { "false" }, o.detail.as_str()])?;
        }
        w.flush()?;
    }
    if s.format.json() {
        serde_json::to_writer_pretty(create(&s.out.join("checks.json"))?, &outcomes)?;
    }
    Ok(outcomes.iter().all(|o| o.passed))
}
