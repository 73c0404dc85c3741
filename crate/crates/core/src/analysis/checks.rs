use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dgp::{generate_target, generate_trial, generate_trial_target, gp_defaults, sample_gp, Confounding, World};
use crate::domain::{
    Arm, CompositeSample, EstimatorKind, KernelParams, LengthScale, Observation, ObservedSample, PredictorKind,
    ScenarioSpec,
};
use crate::estimators::{
    abc_prepared, aom_prepared, dr_abc_with_bias, dr_pa_with_augmented, dr_with_outcome, estimate_om_categorical,
    fit_augmented, fit_bias, fit_outcome, om_prepared, ArmData, EstimatorConfig, NuisanceSet, TargetSummary,
};
use crate::quadrature::GaussLegendre;
use crate::regression::{
    default_penalty_grid, ridge_cv, FittedRegressor, FnPredictor, LegendreBasis, TabulatedPredictor,
};
use crate::seeds::{derive_seed, rng_from, tag};
use crate::{Error, Result};

use super::grid::world_seeds;
use super::oracle::{true_mu, TargetExpectation};
use super::scenario::{build_predictor, TABULATION_NODES};
use super::theory::{empirical_excess_risk, lemma2_bounds, prop1_formula, spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CheckKind {
    Prop1,
    Theorem1,
    Theorem2,
    Theorem3,
    Lemma2,
    Orthonormality,
    DoubleRobustness,
}

impl CheckKind {
    pub const ALL: [CheckKind; 7] = [
        CheckKind::Prop1,
        CheckKind::Theorem1,
        CheckKind::Theorem2,
        CheckKind::Theorem3,
        CheckKind::Lemma2,
        CheckKind::Orthonormality,
        CheckKind::DoubleRobustness,
    ];

    pub fn label(self) -> &'static str {
        match self {
            CheckKind::Prop1 => "prop1",
            CheckKind::Theorem1 => "theorem1",
            CheckKind::Theorem2 => "theorem2",
            CheckKind::Theorem3 => "theorem3",
            CheckKind::Lemma2 => "lemma2",
            CheckKind::Orthonormality => "orthonormality",
            CheckKind::DoubleRobustness => "double-robustness",
        }
    }
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for CheckKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        let key = match key.as_str() {
            "theorems" => return Err(Error::Parse("use theorem1, theorem2 or theorem3".into())),
            "dr" => "double-robustness",
            "ortho" => "orthonormality",
            k => k,
        }
        .to_string();
        CheckKind::ALL
            .into_iter()
            .find(|c| c.label() == key)
            .ok_or_else(|| Error::Parse(format!("unknown check `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub kind: CheckKind,
    pub passed: bool,
    pub detail: String,
    pub values: BTreeMap<String, f64>,
}

impl CheckOutcome {
    fn new(kind: CheckKind, passed: bool, detail: String, values: &[(&str, f64)]) -> Self {
        let values = values.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        Self { kind, passed, detail, values }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub master_seed: u64,
    pub prop1_reps: usize,
    pub theorem_refits: usize,
    pub theorem_degree: usize,
    pub lemma2_worlds: usize,
    pub dr_reps: usize,
    pub dr_n: usize,
    pub n0: usize,
    pub n_os: usize,
    /// Build the basis normalized. Turning this off must make the
    /// orthonormality check fail.
    pub normalized_basis: bool,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            prop1_reps: 10_000,
            theorem_refits: 500,
            theorem_degree: 3,
            lemma2_worlds: 100,
            dr_reps: 30,
            dr_n: 50_000,
            n0: 20_000,
            n_os: 50_000,
            normalized_basis: true,
        }
    }
}

pub fn run_check(kind: CheckKind, cfg: &CheckConfig) -> Result<CheckOutcome> {
    match kind {
        CheckKind::Prop1 => prop1_check(cfg),
        CheckKind::Theorem1 => theorem_check(cfg, EstimatorKind::Om),
        CheckKind::Theorem2 => theorem_check(cfg, EstimatorKind::Abc),
        CheckKind::Theorem3 => theorem_check(cfg, EstimatorKind::Aom),
        CheckKind::Lemma2 => lemma2_check(cfg),
        CheckKind::Orthonormality => orthonormality_check(cfg),
        CheckKind::DoubleRobustness => double_robustness_check(cfg),
    }
}

pub fn run_checks(kinds: &[CheckKind], cfg: &CheckConfig) -> Result<Vec<CheckOutcome>> {
    kinds.iter().map(|&k| run_check(k, cfg)).collect()
}

fn seed_for(cfg: &CheckConfig, kind: CheckKind) -> u64 {
    derive_seed(cfg.master_seed, &[tag("check"), tag(kind.label())])
}

// Stratified world: four groups with fixed trial counts.
const P1_PROPS: [f64; 4] = [0.1, 0.2, 0.3, 0.4];
const P1_MEANS: [f64; 4] = [0.5, 1.0, -0.5, 0.2];
const P1_VARS: [f64; 4] = [1.0, 2.0, 0.5, 1.5];
const P1_COUNTS: [usize; 4] = [20, 30, 40, 50];

fn p1_x(k: usize) -> f64 {
    -0.75 + 0.5 * k as f64
}

fn multinomial(n: usize, props: &[f64], rng: &mut impl Rng) -> Vec<usize> {
    let mut left = n as u64;
    let mut mass = 1.0;
    let mut out = Vec::with_capacity(props.len());
    for (i, &p) in props.iter().enumerate() {
        let c = if i + 1 == props.len() || mass <= 0.0 {
            left
        } else {
            Binomial::new(left, (p / mass).clamp(0.0, 1.0)).expect("valid binomial").sample(rng)
        };
        out.push(c as usize);
        left -= c;
        mass -= p;
    }
    out
}

fn prop1_check(cfg: &CheckConfig) -> Result<CheckOutcome> {
    let kind = CheckKind::Prop1;
    let mu: f64 = P1_PROPS.iter().zip(&P1_MEANS).map(|(p, m)| p * m).sum();
    let formula = prop1_formula(&P1_PROPS, &P1_VARS, &P1_COUNTS)?;
    let mut rng = rng_from(seed_for(cfg, kind));
    let mut se2 = 0.0;
    for _ in 0..cfg.prop1_reps {
        let counts = multinomial(cfg.n0, &P1_PROPS, &mut rng);
        let mut recs = Vec::with_capacity(cfg.n0 + P1_COUNTS.iter().sum::<usize>());
        for k in 0..4 {
            let noise = Normal::new(P1_MEANS[k], P1_VARS[k].sqrt()).expect("positive variance");
            for _ in 0..P1_COUNTS[k] {
                recs.push(Observation::trial(p1_x(k), 0.0, Arm::Treated, noise.sample(&mut rng)));
            }
            recs.extend(std::iter::repeat_n(Observation::target(p1_x(k), 0.0), counts[k]));
        }
        let est = estimate_om_categorical(&CompositeSample::new(recs).observed(), Arm::Treated)?;
        se2 += (est.point_estimate - mu).powi(2);
    }
    let mse = se2 / cfg.prop1_reps as f64;
    let rel = (mse - formula).abs() / formula;
    Ok(CheckOutcome::new(
        kind,
        rel < 0.10,
        format!("MC MSE {mse:.6} vs formula {formula:.6} (relative gap {:.2}%, limit 10%)", 100.0 * rel),
        &[("mc_mse", mse), ("formula", formula), ("relative_gap", rel)],
    ))
}

/// The GP world shared by the structural checks.
pub fn check_world_spec(cfg: &CheckConfig, scenario: usize) -> ScenarioSpec {
    let master = derive_seed(cfg.master_seed, &[tag("check-world")]);
    ScenarioSpec {
        dgp: gp_defaults::gp_dgp(0.5, Confounding::None),
        n1: 200,
        n0: cfg.n0,
        n_os: cfg.n_os,
        noise_sigma: 0.0,
        predictor_kind: PredictorKind::Learned,
        master_seed: master,
        grid_size: crate::dgp::DEFAULT_GRID_SIZE,
        seeds: world_seeds(master, 0.5, Confounding::None, scenario),
    }
}

fn arm_data(trial: &[Observation], arm: Arm, f: Option<&dyn FittedRegressor>) -> ArmData {
    let (xs, ys): (Vec<f64>, Vec<f64>) = trial
        .iter()
        .filter(|o| o.arm() == Some(arm))
        .filter_map(|o| o.y().map(|y| (o.x(), y)))
        .unzip();
    ArmData::new(xs, ys, f)
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

/// Simulated MSE of OM, ABC or AOM against its bias/variance prediction.
///
/// The simulated side redraws trial and target per replication. The
/// prediction refits on independent trial draws and takes the exact target
/// expectation of each fitted function, so its mean and spread estimate the
/// bias and variance terms of the fitted-function decomposition.
fn theorem_check(cfg: &CheckConfig, est: EstimatorKind) -> Result<CheckOutcome> {
    let kind = match est {
        EstimatorKind::Om => CheckKind::Theorem1,
        EstimatorKind::Abc => CheckKind::Theorem2,
        _ => CheckKind::Theorem3,
    };
    let r = cfg.theorem_refits;
    if r < 3 {
        return Err(Error::invalid("at least three refits are needed"));
    }
    let spec = check_world_spec(cfg, kind as usize);
    let world = World::from_spec(&spec)?;
    let arm = Arm::Treated;
    let mu = true_mu(&world, arm).mu_a;
    let f: Option<Arc<dyn FittedRegressor>> = if est == EstimatorKind::Om {
        None
    } else {
        Some(build_predictor(&world, PredictorKind::Learned, arm, spec.n_os, spec.seeds.os, spec.seeds.predictor)?)
    };
    let fref = f.as_deref();
    let te = TargetExpectation::new(&world, 64);
    let f_mean = fref.map_or(0.0, |f| te.mean(|x| f.predict(x)));
    let base = seed_for(cfg, kind);

    let mut sim = Vec::with_capacity(r);
    let mut theta = Vec::with_capacity(r);
    for i in 0..r {
        let s_sim = derive_seed(base, &[tag("sim"), i as u64]);
        let trial = generate_trial(&world, spec.n1, derive_seed(s_sim, &[tag("trial")]))?;
        let target = generate_target(&world, spec.n0, derive_seed(s_sim, &[tag("target")]))?;
        let target_x: Vec<f64> = target.iter().map(Observation::x).collect();
        let summary = TargetSummary::new(&target_x, cfg.theorem_degree, fref);
        let data = arm_data(&trial, arm, fref);
        let ecfg = EstimatorConfig::new(cfg.theorem_degree, arm, derive_seed(s_sim, &[tag("folds")]));
        let value = match est {
            EstimatorKind::Om => om_prepared(&data, &summary, &ecfg)?,
            EstimatorKind::Abc => abc_prepared(&data, &summary, &ecfg)?,
            _ => aom_prepared(&data, &summary, &ecfg)?,
        }
        .point_estimate;
        sim.push((value - mu).powi(2));

        let s_fit = derive_seed(base, &[tag("refit"), i as u64]);
        let trial = generate_trial(&world, spec.n1, derive_seed(s_fit, &[tag("trial")]))?;
        let data = arm_data(&trial, arm, fref);
        let ecfg = EstimatorConfig::new(cfg.theorem_degree, arm, derive_seed(s_fit, &[tag("folds")]));
        theta.push(match est {
            EstimatorKind::Om => {
                let g = fit_outcome(&data, &ecfg)?;
                te.mean(|x| g.predict(x))
            }
            EstimatorKind::Abc => {
                let b = fit_bias(&data, &ecfg)?;
                f_mean - te.mean(|x| b.predict(x))
            }
            _ => {
                let h = fit_augmented(&data, &ecfg)?;
                let f = fref.expect("predictor present");
                te.mean(|x| h.predict_augmented(x, f.predict(x)))
            }
        });
    }
    let rf = r as f64;
    let (mse_sim, sd_sq) = mean_sd(&sim);
    let (theta_mean, theta_sd) = mean_sd(&theta);
    let bias = theta_mean - mu;
    let var = theta_sd * theta_sd;
    let predicted = bias * bias + var;
    let se = ((sd_sq / rf.sqrt()).powi(2)
        + (2.0 * bias.abs() * theta_sd / rf.sqrt()).powi(2)
        + (var * (2.0 / (rf - 1.0)).sqrt()).powi(2))
    .sqrt();
    let z = (mse_sim - predicted).abs() / se;
    Ok(CheckOutcome::new(
        kind,
        z < 4.0,
        format!(
            "{est}: simulated MSE {mse_sim:.3e} vs bias^2 {:.3e} + variance {var:.3e} = {predicted:.3e} ({z:.2} SE, limit 4)",
            bias * bias
        ),
        &[("simulated_mse", mse_sim), ("bias_sq", bias * bias), ("variance", var), ("se", se), ("z", z)],
    ))
}

/// Ordering of excess risks when the predictor's bias lies in the fitted
/// span and the outcome function does not.
fn lemma2_check(cfg: &CheckConfig) -> Result<CheckOutcome> {
    let kind = CheckKind::Lemma2;
    let (n1, sigma, d_prime, m_eval) = (200usize, 0.5, 3usize, 1000usize);
    let kernel = KernelParams { alpha_x: 0.0, alpha_u: 0.0, l_x: LengthScale::Active(0.2), l_u: LengthScale::Inactive };
    let coef = Normal::new(0.0, 0.5).expect("positive sd");
    let basis = LegendreBasis::new(d_prime);
    let base = seed_for(cfg, kind);
    let (mut risk_g, mut risk_b) = (0.0, 0.0);
    let (mut bound_g, mut bound_b) = (0.0, 0.0);
    let mut used = 0usize;
    let mut skipped = 0usize;
    for w in 0..cfg.lemma2_worlds {
        let seed = derive_seed(base, &[w as u64]);
        let gp = sample_gp(&kernel, crate::dgp::DEFAULT_GRID_SIZE, derive_seed(seed, &[tag("g")]))?;
        let g = |x: f64| gp.eval(x, 0.0);
        let mut rng = rng_from(derive_seed(seed, &[tag("sample")]));
        let c: Vec<f64> = (0..=d_prime).map(|_| coef.sample(&mut rng)).collect();
        let b = |x: f64| basis.eval(x).iter().zip(&c).map(|(p, c)| p * c).sum::<f64>();
        let sg = spectrum(g, 12);
        let sb = spectrum(b, 12);
        if !(sb.tail_mass(d_prime) < sg.tail_mass(d_prime)) {
            skipped += 1;
            continue;
        }
        let xs: Vec<f64> = (0..n1).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| g(x) + sigma * rng.sample::<f64, _>(StandardNormal)).collect();
        let zs: Vec<f64> = xs.iter().zip(&ys).map(|(&x, &y)| g(x) + b(x) - y).collect();
        let grid = default_penalty_grid();
        let fold_seed = derive_seed(seed, &[tag("folds")]);
        let g_hat = ridge_cv(&xs, &ys, d_prime, &grid, 5, fold_seed)?;
        let b_hat = ridge_cv(&xs, &zs, d_prime, &grid, 5, fold_seed)?;
        let eval: Vec<f64> = (0..m_eval).map(|_| rng.random_range(-1.0..=1.0)).collect();
        risk_g += empirical_excess_risk(&g_hat, g, &eval);
        risk_b += empirical_excess_risk(&b_hat, b, &eval);
        let (rg, rb) = lemma2_bounds(sigma * sigma, d_prime, n1, &sg, &sb)?;
        bound_g += rg.bound;
        bound_b += rb.bound;
        used += 1;
    }
    if used == 0 {
        return Ok(CheckOutcome::new(kind, false, "no world satisfied the tail condition".into(), &[]));
    }
    let u = used as f64;
    let (risk_g, risk_b, bound_g, bound_b) = (risk_g / u, risk_b / u, bound_g / u, bound_b / u);
    let enough = used >= 100.min(cfg.lemma2_worlds);
    Ok(CheckOutcome::new(
        kind,
        enough && risk_b < risk_g && bound_b < bound_g,
        format!(
            "{used} worlds ({skipped} skipped): mean risk b-hat {risk_b:.3e} < g-hat {risk_g:.3e}; mean bounds {bound_b:.3e} vs {bound_g:.3e}"
        ),
        &[("risk_b", risk_b), ("risk_g", risk_g), ("bound_b", bound_b), ("bound_g", bound_g), ("worlds", u)],
    ))
}

fn orthonormality_check(cfg: &CheckConfig) -> Result<CheckOutcome> {
    let kind = CheckKind::Orthonormality;
    let degree = 10;
    let basis = if cfg.normalized_basis { LegendreBasis::new(degree) } else { LegendreBasis::unnormalized(degree) };
    let q = GaussLegendre::new(64);
    let mut gram = vec![0.0; (degree + 1) * (degree + 1)];
    let mut row = vec![0.0; degree + 1];
    for (&x, &w) in q.nodes.iter().zip(&q.weights) {
        basis.eval_into(x, &mut row);
        for j in 0..=degree {
            for k in 0..=degree {
                gram[j * (degree + 1) + k] += w * row[j] * row[k];
            }
        }
    }
    let mut worst: f64 = 0.0;
    for j in 0..=degree {
        for k in 0..=degree {
            let target = if j == k { 1.0 } else { 0.0 };
            worst = worst.max((gram[j * (degree + 1) + k] - target).abs());
        }
    }
    Ok(CheckOutcome::new(
        kind,
        worst < 1e-10,
        format!("max |<phi_j, phi_k> - delta_jk| = {worst:.2e} up to degree {degree} (limit 1e-10)"),
        &[("max_deviation", worst)],
    ))
}

/// `E[FOM | X = x, S = 1]` and `P(S = 1 | X = x)` of a world, by quadrature in `u`.
fn trial_regression(world: &World, arm: Arm) -> (TabulatedPredictor, TabulatedPredictor) {
    let q = GaussLegendre::new(64);
    let g = FnPredictor(|x: f64| {
        let num = q.integrate(|u| world.outcome(arm, x, u) * world.participation_prob(x, u));
        let den = q.integrate(|u| world.participation_prob(x, u));
        num / den
    });
    let p = FnPredictor(|x: f64| 0.5 * q.integrate(|u| world.participation_prob(x, u)));
    (TabulatedPredictor::new(&g, TABULATION_NODES), TabulatedPredictor::new(&p, TABULATION_NODES))
}

/// Each DR estimator with one nuisance deliberately wrong.
fn double_robustness_check(cfg: &CheckConfig) -> Result<CheckOutcome> {
    let kind = CheckKind::DoubleRobustness;
    let arm = Arm::Treated;
    let master = derive_seed(cfg.master_seed, &[tag("dr-world")]);
    let spec = ScenarioSpec {
        dgp: gp_defaults::gp_dgp(0.5, Confounding::Strong),
        n1: cfg.dr_n / 2,
        n0: cfg.dr_n - cfg.dr_n / 2,
        n_os: cfg.n_os,
        noise_sigma: 0.0,
        predictor_kind: PredictorKind::Learned,
        master_seed: master,
        grid_size: crate::dgp::DEFAULT_GRID_SIZE,
        seeds: world_seeds(master, 0.5, Confounding::Strong, 0),
    };
    let world = World::from_spec(&spec)?;
    let mu = true_mu(&world, arm).mu_a;
    let f = build_predictor(&world, PredictorKind::Learned, arm, spec.n_os, spec.seeds.os, spec.seeds.predictor)?;
    let (g, p_x) = trial_regression(&world, arm);
    let q = GaussLegendre::new(64);
    let p1 = 0.5 * q.integrate(|x| p_x.predict(x));
    let (n1, n0) = (spec.n1, spec.n0);
    let ratio = n1 as f64 / n0 as f64;
    // Under fixed cohort sizes the composite-sample participation odds are
    // the population odds rescaled by the sampling ratio.
    let p_star = FnPredictor(move |x: f64| {
        let p = p_x.predict(x);
        let odds = ratio * (p / p1) / ((1.0 - p) / (1.0 - p1));
        odds / (1.0 + odds)
    });
    let correct = NuisanceSet::with_propensity(n1, n0, Arc::new(TabulatedPredictor::new(&p_star, TABULATION_NODES)))?;
    let marginal = n1 as f64 / (n1 + n0) as f64;
    let wrong = NuisanceSet::with_propensity(n1, n0, Arc::new(crate::regression::ConstantPredictor(marginal)))?;

    let g = Arc::new(g);
    let g_bad = { let g = g.clone(); FnPredictor(move |x: f64| g.predict(x) + 1.0) };
    let b_true = { let (g, f) = (g.clone(), f.clone()); FnPredictor(move |x: f64| f.predict(x) - g.predict(x)) };
    let b_bad = { let (g, f) = (g.clone(), f.clone()); FnPredictor(move |x: f64| f.predict(x) - g.predict(x) + 1.0) };
    let h_true = |x: f64, _fx: f64| g.predict(x);
    let h_bad = |x: f64, _fx: f64| g.predict(x) + 1.0;

    let settings: [(&str, &NuisanceSet, bool); 2] = [("bad-outcome", &correct, false), ("bad-weights", &wrong, true)];
    let estimators = [EstimatorKind::Dr, EstimatorKind::DrAbc, EstimatorKind::DrPa];
    let mut draws: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    let base = seed_for(cfg, kind);
    for rep in 0..cfg.dr_reps {
        let sample = generate_trial_target(&world, n1, n0, derive_seed(base, &[rep as u64]))?;
        let obs: ObservedSample = sample.observed();
        let target_x = obs.target_x();
        let (xs, ys) = obs.trial_arm(arm);
        let data = ArmData::new(xs, ys, Some(f.as_ref()));
        for (si, (_, nuis, outcome_ok)) in settings.iter().enumerate() {
            for (ei, est) in estimators.iter().enumerate() {
                let rec = match (est, outcome_ok) {
                    (EstimatorKind::Dr, true) => dr_with_outcome(&data, &target_x, nuis, g.as_ref(), arm, 0)?,
                    (EstimatorKind::Dr, false) => dr_with_outcome(&data, &target_x, nuis, &g_bad, arm, 0)?,
                    (EstimatorKind::DrAbc, true) => dr_abc_with_bias(&data, &target_x, f.as_ref(), nuis, &b_true, arm, 0)?,
                    (EstimatorKind::DrAbc, false) => dr_abc_with_bias(&data, &target_x, f.as_ref(), nuis, &b_bad, arm, 0)?,
                    (_, true) => dr_pa_with_augmented(&data, &target_x, f.as_ref(), nuis, &h_true, arm, 0)?,
                    (_, false) => dr_pa_with_augmented(&data, &target_x, f.as_ref(), nuis, &h_bad, arm, 0)?,
                };
                draws.entry((si, ei)).or_default().push(rec.point_estimate);
            }
        }
    }
    let mut passed = true;
    let mut lines = Vec::new();
    let mut values = Vec::new();
    for ((si, ei), v) in &draws {
        let (m, sd) = mean_sd(v);
        let se = sd / (v.len() as f64).sqrt();
        let z = (m - mu).abs() / se;
        passed &= z < 3.0;
        lines.push(format!("{} {}: {:.2} SE", estimators[*ei], settings[*si].0, z));
        values.push((format!("z_{}_{}", estimators[*ei], settings[*si].0), z));
    }
    let values: Vec<(&str, f64)> = values.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    Ok(CheckOutcome::new(kind, passed, format!("mu={mu:.4}; {} (limit 3)", lines.join(", ")), &values))
}
