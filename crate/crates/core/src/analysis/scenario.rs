use std::sync::Arc;

use crate::dgp::{generate_os, generate_target, generate_trial, noise_predictor, World};
use crate::domain::{
    Arm, CompositeSample, EstimatorKind, Observation, PredictorKind, ScenarioSpec,
};
use crate::estimators::{
    abc_prepared, aom_prepared, dr_abc_with_bias, dr_pa_with_augmented, dr_with_outcome, fit_augmented,
    fit_bias, fit_outcome, ipw_prepared, om_prepared, os_om_prepared, ArmData, EstimatorConfig,
    NuisanceSet, TargetSummary,
};
use crate::regression::{default_penalty_grid, flexible_fit, FittedRegressor, FlexibleConfig, TabulatedPredictor};
use crate::seeds::{derive_seed, tag};
use crate::{Error, Result};

use super::oracle::{true_mu, OracleResult};
use super::theory::decompose_estimates;
use crate::domain::DecompositionReport;

/// Resolution of the tabulated observational predictor.
pub const TABULATION_NODES: usize = 4097;

/// Observational predictor `f_a` for one world.
///
/// The learned predictor is a random-feature ridge fit on the OS records of
/// arm `a`, tabulated for cheap repeated evaluation.
pub fn build_predictor(
    world: &World,
    kind: PredictorKind,
    arm: Arm,
    n_os: usize,
    os_seed: u64,
    predictor_seed: u64,
) -> Result<Arc<dyn FittedRegressor>> {
    match kind {
        PredictorKind::IidNoise => Ok(Arc::new(noise_predictor(predictor_seed))),
        PredictorKind::Learned => {
            let os = generate_os(world, n_os, os_seed)?;
            let (xs, ys): (Vec<f64>, Vec<f64>) = os
                .iter()
                .filter(|o| o.arm() == Some(arm))
                .filter_map(|o| o.y().map(|y| (o.x(), y)))
                .unzip();
            let cfg = FlexibleConfig { seed: predictor_seed, ..FlexibleConfig::default() };
            let fit = flexible_fit(&xs, &ys, &cfg)?;
            Ok(Arc::new(TabulatedPredictor::new(&fit, TABULATION_NODES)))
        }
    }
}

/// One estimate from one replication; `None` when the estimator failed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicationEstimate {
    pub estimator: EstimatorKind,
    pub degree: usize,
    pub value: Option<f64>,
}

/// A world with its oracle, fixed target sample and predictor, ready for
/// repeated trial redraws.
pub struct PreparedScenario {
    pub world: World,
    pub arm: Arm,
    pub mu: OracleResult,
    pub target: Vec<Observation>,
    pub target_x: Vec<f64>,
    pub summary: TargetSummary,
    pub predictor: Option<Arc<dyn FittedRegressor>>,
    /// Candidate penalties of every trial regression.
    pub penalty_grid: Vec<f64>,
}

impl PreparedScenario {
    pub fn new(spec: &ScenarioSpec, arm: Arm, max_degree: usize, with_predictor: bool) -> Result<Self> {
        let world = World::from_spec(spec)?;
        let predictor = if with_predictor {
            Some(build_predictor(
                &world,
                spec.predictor_kind,
                arm,
                spec.n_os,
                spec.seeds.os,
                spec.seeds.predictor,
            )?)
        } else {
            None
        };
        let target = generate_target(&world, spec.n0, spec.seeds.target)?;
        Ok(Self::from_parts(world, arm, target, predictor, max_degree))
    }

    pub fn from_parts(
        world: World,
        arm: Arm,
        target: Vec<Observation>,
        predictor: Option<Arc<dyn FittedRegressor>>,
        max_degree: usize,
    ) -> Self {
        let mu = true_mu(&world, arm);
        let target_x: Vec<f64> = target.iter().map(Observation::x).collect();
        let summary = TargetSummary::new(&target_x, max_degree, predictor.as_deref());
        Self { world, arm, mu, target, target_x, summary, predictor, penalty_grid: default_penalty_grid() }
    }

    pub fn with_penalty_grid(mut self, grid: Vec<f64>) -> Self {
        self.penalty_grid = grid;
        self
    }

    fn predictor_ref(&self) -> Option<&dyn FittedRegressor> {
        self.predictor.as_deref()
    }

    /// Draws a fresh trial of size `n1` and evaluates every requested
    /// estimator at every requested degree. Degree-free estimators (OS-OM)
    /// are reported once per degree with the same value.
    pub fn replicate(
        &self,
        n1: usize,
        estimators: &[EstimatorKind],
        degrees: &[usize],
        run_seed: u64,
    ) -> Vec<ReplicationEstimate> {
        let fail_all = || {
            estimators
                .iter()
                .flat_map(|&e| degrees.iter().map(move |&d| ReplicationEstimate { estimator: e, degree: d, value: None }))
                .collect()
        };
        let trial = match generate_trial(&self.world, n1, derive_seed(run_seed, &[tag("trial")])) {
            Ok(t) => t,
            Err(_) => return fail_all(),
        };
        let fold_seed = derive_seed(run_seed, &[tag("folds")]);
        self.evaluate(&trial, estimators, degrees, fold_seed)
    }

    /// Evaluates estimators on a given trial sample against the fixed target.
    pub fn evaluate(
        &self,
        trial: &[Observation],
        estimators: &[EstimatorKind],
        degrees: &[usize],
        fold_seed: u64,
    ) -> Vec<ReplicationEstimate> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = trial
            .iter()
            .filter(|o| o.arm() == Some(self.arm))
            .filter_map(|o| o.y().map(|y| (o.x(), y)))
            .unzip();
        let arm = ArmData::new(xs, ys, self.predictor_ref());
        let needs_weights = estimators.iter().any(|e| e.uses_weights());
        let observed = needs_weights.then(|| CompositeSample::from_parts(trial, &self.target).observed());

        let mut out = Vec::with_capacity(estimators.len() * degrees.len());
        for &degree in degrees {
            let cfg = EstimatorConfig {
                penalty_grid: self.penalty_grid.clone(),
                ..EstimatorConfig::new(degree, self.arm, fold_seed)
            };
            let nuis = observed.as_ref().map(|s| NuisanceSet::fit(s, degree));
            for &est in estimators {
                let value = self.estimate_one(est, &arm, &cfg, nuis.as_ref());
                out.push(ReplicationEstimate { estimator: est, degree, value: value.ok() });
            }
        }
        out
    }

    fn estimate_one(
        &self,
        est: EstimatorKind,
        arm: &ArmData,
        cfg: &EstimatorConfig,
        nuis: Option<&Result<NuisanceSet>>,
    ) -> Result<f64> {
        let f = || self.predictor_ref().ok_or_else(|| Error::invalid(format!("{est} needs a predictor")));
        let nuis = || match nuis {
            Some(Ok(n)) => Ok(n),
            Some(Err(e)) => Err(Error::invalid(format!("participation model unavailable: {e}"))),
            None => Err(Error::invalid(format!("{est} needs nuisances"))),
        };
        let s = &self.summary;
        let rec = match est {
            EstimatorKind::Om => om_prepared(arm, s, cfg)?,
            EstimatorKind::OsOm => {
                f()?;
                os_om_prepared(s, cfg.arm)?
            }
            EstimatorKind::Abc => {
                f()?;
                abc_prepared(arm, s, cfg)?
            }
            EstimatorKind::Aom => {
                f()?;
                aom_prepared(arm, s, cfg)?
            }
            EstimatorKind::Ipw => ipw_prepared(arm, nuis()?, cfg.arm)?,
            EstimatorKind::Dr => {
                let g = fit_outcome(arm, cfg)?;
                dr_with_outcome(arm, &self.target_x, nuis()?, &g, cfg.arm, cfg.degree)?
            }
            EstimatorKind::DrAbc => {
                let b = fit_bias(arm, cfg)?;
                dr_abc_with_bias(arm, &self.target_x, f()?, nuis()?, &b, cfg.arm, cfg.degree)?
            }
            EstimatorKind::DrPa => {
                let h = fit_augmented(arm, cfg)?;
                let hf = |x: f64, fx: f64| h.predict_augmented(x, fx);
                dr_pa_with_augmented(arm, &self.target_x, f()?, nuis()?, &hf, cfg.arm, cfg.degree)?
            }
            EstimatorKind::OmCategorical => {
                return Err(Error::invalid("the stratified estimator needs a discrete covariate"))
            }
        };
        Ok(rec.point_estimate)
    }
}

/// Monte Carlo bias / variance / MSE of one estimator on one world: the
/// world and target sample are fixed, the trial is redrawn per replication.
pub fn decompose_mse(
    scenario: &ScenarioSpec,
    estimator: EstimatorKind,
    degree: usize,
    n_replications: usize,
) -> Result<DecompositionReport> {
    if n_replications < 2 {
        return Err(Error::invalid("at least two replications are needed"));
    }
    let prepared = PreparedScenario::new(scenario, Arm::Treated, degree, estimator.uses_predictor())?;
    let mut values = Vec::with_capacity(n_replications);
    let mut failures = 0;
    for r in 0..n_replications {
        let seed = derive_seed(scenario.master_seed, &[tag("decompose"), r as u64]);
        match prepared.replicate(scenario.n1, &[estimator], &[degree], seed)[0].value {
            Some(v) => values.push(v),
            None => failures += 1,
        }
    }
    Ok(decompose_estimates(&values, prepared.mu.mu_a, failures))
}
