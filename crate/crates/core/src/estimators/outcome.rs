use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::domain::{Arm, EstimateRecord, EstimatorKind, ObservedSample};
use crate::regression::{
    default_penalty_grid, ridge_cv_design, FittedRegressor, LegendreBasis, RidgeFit,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub degree: usize,
    pub penalty_grid: Vec<f64>,
    pub n_folds: usize,
    pub arm: Arm,
    /// Seed of the CV fold permutation. Shared by all estimators of one
    /// replication so that paired comparisons use the same folds.
    pub fold_seed: u64,
}

impl EstimatorConfig {
    pub fn new(degree: usize, arm: Arm, fold_seed: u64) -> Self {
        Self { degree, penalty_grid: default_penalty_grid(), n_folds: 5, arm, fold_seed }
    }
}

/// Target-sample quantities every linear-in-features estimator needs:
/// means of `phi_k(X)` and of `f(X)` over `S = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSummary {
    pub n0: usize,
    pub phi_means: Vec<f64>,
    pub f_mean: f64,
}

impl TargetSummary {
    pub fn new(target_x: &[f64], max_degree: usize, f: Option<&dyn FittedRegressor>) -> Self {
        let basis = LegendreBasis::new(max_degree);
        let n0 = target_x.len();
        let mut sums = vec![0.0; basis.len()];
        let mut row = vec![0.0; basis.len()];
        let mut f_sum = 0.0;
        for &x in target_x {
            basis.eval_into(x, &mut row);
            for (s, v) in sums.iter_mut().zip(&row) {
                *s += v;
            }
            if let Some(f) = f {
                f_sum += f.predict(x);
            }
        }
        let n = n0.max(1) as f64;
        Self { n0, phi_means: sums.iter().map(|s| s / n).collect(), f_mean: f_sum / n }
    }

    pub fn max_degree(&self) -> usize {
        self.phi_means.len() - 1
    }
}

/// Covariates, outcomes and predictor values of the trial arm `D_{1,a}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ArmData {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `f_a(x)` per record; empty when no predictor is in play.
    pub fx: Vec<f64>,
}

impl ArmData {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, f: Option<&dyn FittedRegressor>) -> Self {
        let fx = f.map(|f| f.predict_many(&xs)).unwrap_or_default();
        Self { xs, ys, fx }
    }

    pub fn from_sample(sample: &ObservedSample, arm: Arm, f: Option<&dyn FittedRegressor>) -> Self {
        let (xs, ys) = sample.trial_arm(arm);
        Self::new(xs, ys, f)
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }
}

fn check_sizes(arm: &ArmData, summary: &TargetSummary, degree: usize) -> Result<()> {
    if arm.len() < degree + 2 {
        return Err(Error::invalid(format!(
            "trial arm has {} records, degree {degree} needs at least {}",
            arm.len(),
            degree + 2
        )));
    }
    if summary.n0 == 0 {
        return Err(Error::invalid("target sample is empty"));
    }
    if summary.max_degree() < degree {
        return Err(Error::invalid("target summary computed for a lower degree"));
    }
    Ok(())
}

fn check_predictor(arm: &ArmData) -> Result<()> {
    if arm.fx.len() != arm.xs.len() {
        return Err(Error::invalid("predictor values missing for the trial arm"));
    }
    Ok(())
}

fn fit_design(design: &DMatrix<f64>, y: &[f64], cfg: &EstimatorConfig, augmented: bool) -> Result<RidgeFit> {
    let sol = ridge_cv_design(design, y, &cfg.penalty_grid, cfg.n_folds, cfg.fold_seed)?;
    Ok(RidgeFit {
        basis: LegendreBasis::new(cfg.degree),
        augmented,
        coefficients: sol.coefficients.as_slice().to_vec(),
        penalty: sol.penalty,
    })
}

/// `g_a`: ridge of `Y` on the Legendre features.
pub fn fit_outcome(arm: &ArmData, cfg: &EstimatorConfig) -> Result<RidgeFit> {
    let design = LegendreBasis::new(cfg.degree).design(&arm.xs);
    fit_design(&design, &arm.ys, cfg, false)
}

/// `b_a`: ridge of `Z = f_a(X) - Y` on the Legendre features.
pub fn fit_bias(arm: &ArmData, cfg: &EstimatorConfig) -> Result<RidgeFit> {
    check_predictor(arm)?;
    let z: Vec<f64> = arm.fx.iter().zip(&arm.ys).map(|(f, y)| f - y).collect();
    let design = LegendreBasis::new(cfg.degree).design(&arm.xs);
    fit_design(&design, &z, cfg, false)
}

/// `h_a`: ridge of `Y` on the Legendre features plus a trailing `f_a(X)`
/// column.
pub fn fit_augmented(arm: &ArmData, cfg: &EstimatorConfig) -> Result<RidgeFit> {
    check_predictor(arm)?;
    let basis = LegendreBasis::new(cfg.degree);
    let p = basis.len();
    let poly = basis.design(&arm.xs);
    let design = DMatrix::from_fn(arm.len(), p + 1, |i, j| if j < p { poly[(i, j)] } else { arm.fx[i] });
    fit_design(&design, &arm.ys, cfg, true)
}

/// Target mean of the polynomial part of a fit.
pub fn polynomial_mean(fit: &RidgeFit, summary: &TargetSummary) -> f64 {
    let p = fit.basis.len();
    fit.coefficients[..p].iter().zip(&summary.phi_means).map(|(c, m)| c * m).sum()
}

/// Target mean of an augmented fit.
pub fn augmented_mean(fit: &RidgeFit, summary: &TargetSummary) -> f64 {
    let p = fit.basis.len();
    polynomial_mean(fit, summary) + fit.coefficients[p] * summary.f_mean
}

fn record(kind: EstimatorKind, degree: usize, arm: Arm, value: f64) -> Result<EstimateRecord> {
    if !value.is_finite() {
        return Err(Error::IllConditioned(format!("{kind} produced a non-finite estimate")));
    }
    Ok(EstimateRecord { estimator: kind, degree, point_estimate: value, arm, warnings: Vec::new() })
}

pub fn om_prepared(arm: &ArmData, summary: &TargetSummary, cfg: &EstimatorConfig) -> Result<EstimateRecord> {
    check_sizes(arm, summary, cfg.degree)?;
    let g = fit_outcome(arm, cfg)?;
    record(EstimatorKind::Om, cfg.degree, cfg.arm, polynomial_mean(&g, summary))
}

pub fn os_om_prepared(summary: &TargetSummary, arm: Arm) -> Result<EstimateRecord> {
    if summary.n0 == 0 {
        return Err(Error::invalid("target sample is empty"));
    }
    record(EstimatorKind::OsOm, 0, arm, summary.f_mean)
}

pub fn abc_prepared(arm: &ArmData, summary: &TargetSummary, cfg: &EstimatorConfig) -> Result<EstimateRecord> {
    check_sizes(arm, summary, cfg.degree)?;
    let b = fit_bias(arm, cfg)?;
    record(EstimatorKind::Abc, cfg.degree, cfg.arm, summary.f_mean - polynomial_mean(&b, summary))
}

pub fn aom_prepared(arm: &ArmData, summary: &TargetSummary, cfg: &EstimatorConfig) -> Result<EstimateRecord> {
    check_sizes(arm, summary, cfg.degree)?;
    let h = fit_augmented(arm, cfg)?;
    record(EstimatorKind::Aom, cfg.degree, cfg.arm, augmented_mean(&h, summary))
}

/// Mean over the target of the trial-arm outcome fit.
pub fn estimate_om(sample: &ObservedSample, cfg: &EstimatorConfig) -> Result<EstimateRecord> {
    let summary = TargetSummary::new(&sample.target_x(), cfg.degree, None);
    om_prepared(&ArmData::from_sample(sample, cfg.arm, None), &summary, cfg)
}

/// Mean over the target of the observational predictor.
pub fn estimate_os_om(sample: &ObservedSample, f: &dyn FittedRegressor, arm: Arm) -> Result<EstimateRecord> {
    os_om_prepared(&TargetSummary::new(&sample.target_x(), 0, Some(f)), arm)
}

/// Predictor mean over the target minus the target mean of the fitted bias.
pub fn estimate_abc(sample: &ObservedSample, f: &dyn FittedRegressor, cfg: &EstimatorConfig) -> Result<EstimateRecord> {
    let summary = TargetSummary::new(&sample.target_x(), cfg.degree, Some(f));
    abc_prepared(&ArmData::from_sample(sample, cfg.arm, Some(f)), &summary, cfg)
}

/// Mean over the target of the outcome fit on augmented covariates.
pub fn estimate_aom(sample: &ObservedSample, f: &dyn FittedRegressor, cfg: &EstimatorConfig) -> Result<EstimateRecord> {
    let summary = TargetSummary::new(&sample.target_x(), cfg.degree, Some(f));
    aom_prepared(&ArmData::from_sample(sample, cfg.arm, Some(f)), &summary, cfg)
}

/// `sum_k p_k * mean_k` given target proportions and trial-arm outcomes per
/// group.
pub fn om_categorical_from_groups(target_props: &[f64], trial_groups: &[&[f64]]) -> Result<f64> {
    if target_props.len() != trial_groups.len() {
        return Err(Error::invalid("one trial group per target proportion required"));
    }
    let mut est = 0.0;
    for (k, (&p, ys)) in target_props.iter().zip(trial_groups).enumerate() {
        if p == 0.0 {
            continue;
        }
        if ys.is_empty() {
            return Err(Error::PositivityViolation(format!(
                "group {k} has target mass {p} but no trial-arm records"
            )));
        }
        est += p * ys.iter().sum::<f64>() / ys.len() as f64;
    }
    Ok(est)
}

/// Stratified estimator for a discrete covariate: target-proportion-weighted
/// average of trial-arm group means. Groups are distinct values of `X`.
pub fn estimate_om_categorical(sample: &ObservedSample, arm: Arm) -> Result<EstimateRecord> {
    let target = sample.target_x();
    if target.is_empty() {
        return Err(Error::invalid("target sample is empty"));
    }
    let mut groups: BTreeMap<u64, (usize, Vec<f64>)> = BTreeMap::new();
    for &x in &target {
        groups.entry(x.to_bits()).or_default().0 += 1;
    }
    let (xs, ys) = sample.trial_arm(arm);
    for (x, y) in xs.iter().zip(ys) {
        if let Some(g) = groups.get_mut(&x.to_bits()) {
            g.1.push(y);
        }
    }
    let n0 = target.len() as f64;
    let props: Vec<f64> = groups.values().map(|(c, _)| *c as f64 / n0).collect();
    let trial: Vec<&[f64]> = groups.values().map(|(_, v)| v.as_slice()).collect();
    let est = om_categorical_from_groups(&props, &trial)?;
    record(EstimatorKind::OmCategorical, 0, arm, est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Observation, CompositeSample};
    use crate::regression::{ConstantPredictor, FnPredictor};

    fn sample(trial: &[(f64, Arm, f64)], target: &[f64]) -> ObservedSample {
        let mut recs: Vec<Observation> =
            trial.iter().map(|&(x, a, y)| Observation::trial(x, 0.0, a, y)).collect();
        recs.extend(target.iter().map(|&x| Observation::target(x, 0.0)));
        CompositeSample::new(recs).observed()
    }

    fn linear_trial(n: usize, f: impl Fn(f64) -> f64) -> Vec<(f64, Arm, f64)> {
        (0..n).map(|i| {
            let x = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
            (x, Arm::Treated, f(x))
        }).collect()
    }

    fn tight(degree: usize) -> EstimatorConfig {
        EstimatorConfig { penalty_grid: vec![1e-10], ..EstimatorConfig::new(degree, Arm::Treated, 1) }
    }

    #[test]
    fn constant_outcomes() {
        let s = sample(&linear_trial(20, |_| 2.0), &[0.1, 0.5, -0.3]);
        let r = estimate_om(&s, &tight(0)).unwrap();
        assert!((r.point_estimate - 2.0).abs() < 1e-8);
    }

    #[test]
    fn linear_recovery() {
        let target: Vec<f64> = (0..101).map(|i| 0.2 + 0.5 * (i as f64 / 50.0 - 1.0)).collect();
        let s = sample(&linear_trial(30, |x| x), &target);
        let r = estimate_om(&s, &tight(1)).unwrap();
        assert!((r.point_estimate - 0.2).abs() < 1e-8);
    }

    #[test]
    fn os_om_ignores_trial() {
        let s = sample(&linear_trial(10, |x| x), &[0.1, 0.3]);
        let s2 = sample(&linear_trial(10, |x| 9.0 * x), &[0.1, 0.3]);
        let f = ConstantPredictor(5.0);
        assert_eq!(estimate_os_om(&s, &f, Arm::Treated).unwrap().point_estimate, 5.0);
        let g = FnPredictor(|x: f64| x);
        assert_eq!(
            estimate_os_om(&s, &g, Arm::Treated).unwrap(),
            estimate_os_om(&s2, &g, Arm::Treated).unwrap()
        );
    }

    #[test]
    fn abc_with_zero_predictor_is_om_bit_exact() {
        let trial: Vec<_> = linear_trial(40, |x| (3.0 * x).sin() + 0.1 * (17.0 * x).cos());
        let target: Vec<f64> = (0..57).map(|i| (i as f64 * 0.731).sin()).collect();
        let s = sample(&trial, &target);
        for d in [1, 3, 5] {
            let cfg = EstimatorConfig::new(d, Arm::Treated, 42);
            let om = estimate_om(&s, &cfg).unwrap().point_estimate;
            let abc = estimate_abc(&s, &ConstantPredictor(0.0), &cfg).unwrap().point_estimate;
            assert_eq!(om.to_bits(), abc.to_bits());
        }
    }

    #[test]
    fn zero_bias_predictor_gives_os_om() {
        let truth = |x: f64| x * x - 0.3 * x;
        let s = sample(&linear_trial(30, truth), &[0.1, 0.4, -0.8]);
        let f = FnPredictor(truth);
        let abc = estimate_abc(&s, &f, &EstimatorConfig::new(2, Arm::Treated, 0)).unwrap();
        let os = estimate_os_om(&s, &f, Arm::Treated).unwrap();
        assert!((abc.point_estimate - os.point_estimate).abs() < 1e-8);
    }

    #[test]
    fn aom_picks_up_exact_predictor() {
        let truth = |x: f64| (4.0 * x).sin();
        let s = sample(&linear_trial(60, truth), &[0.1, 0.4, -0.8, 0.9]);
        let f = FnPredictor(truth);
        let cfg = tight(1);
        let arm = ArmData::from_sample(&s, Arm::Treated, Some(&f));
        let h = fit_augmented(&arm, &cfg).unwrap();
        assert!((h.coefficients[2] - 1.0).abs() < 1e-6);
        assert!(h.coefficients[..2].iter().all(|c| c.abs() < 1e-6));
        let aom = estimate_aom(&s, &f, &cfg).unwrap().point_estimate;
        let os = estimate_os_om(&s, &f, Arm::Treated).unwrap().point_estimate;
        assert!((aom - os).abs() < 1e-6);
    }

    #[test]
    fn small_arm_rejected() {
        let s = sample(&linear_trial(3, |x| x), &[0.0]);
        assert!(matches!(estimate_om(&s, &tight(3)), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn categorical_weighted_average() {
        let v = om_categorical_from_groups(&[0.3, 0.7], &[&[1.0, 1.0], &[2.0]]).unwrap();
        assert!((v - 1.7).abs() < 1e-12);
        let v = om_categorical_from_groups(&[1.0], &[&[1.0, 2.0, 6.0]]).unwrap();
        assert!((v - 3.0).abs() < 1e-12);
        let e = om_categorical_from_groups(&[0.5, 0.5], &[&[1.0], &[]]).unwrap_err();
        assert!(matches!(e, Error::PositivityViolation(_)));
    }

    #[test]
    fn categorical_from_sample() {
        let trial = [(1.0, Arm::Treated, 1.0), (2.0, Arm::Treated, 2.0), (2.0, Arm::Treated, 2.0), (1.0, Arm::Control, 9.0)];
        let target = [1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0];
        let s = sample(&trial, &target);
        let r = estimate_om_categorical(&s, Arm::Treated).unwrap();
        assert!((r.point_estimate - 1.7).abs() < 1e-12);
    }
}
