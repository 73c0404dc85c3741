use std::sync::Arc;

use crate::domain::{Arm, EstimateRecord, EstimatorKind, ObservedSample, Population};
use crate::regression::{logistic_fit, FittedRegressor, LogisticConfig, RidgeFit};
use crate::{Error, Result};

use super::outcome::{fit_augmented, fit_bias, fit_outcome, ArmData, EstimatorConfig};

/// Propensities outside `(EXTREME, 1 - EXTREME)` are flagged.
pub const EXTREME: f64 = 1e-3;

/// Nuisance functions of the weighting estimators.
#[derive(Clone)]
pub struct NuisanceSet {
    /// `n1 / (n1 + n0)`.
    pub p_hat_marginal: f64,
    /// `P(S = 1 | X)`.
    pub p_hat: Arc<dyn FittedRegressor>,
    /// Known randomization probability of the arm.
    pub pi_hat: f64,
    pub n1: usize,
    pub n0: usize,
    pub warnings: Vec<String>,
}

impl std::fmt::Debug for NuisanceSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NuisanceSet")
            .field("p_hat_marginal", &self.p_hat_marginal)
            .field("pi_hat", &self.pi_hat)
            .field("n1", &self.n1)
            .field("n0", &self.n0)
            .finish_non_exhaustive()
    }
}

impl NuisanceSet {
    /// Uses a supplied participation model.
    pub fn with_propensity(n1: usize, n0: usize, p_hat: Arc<dyn FittedRegressor>) -> Result<Self> {
        if n1 == 0 || n0 == 0 {
            return Err(Error::invalid("weighting needs nonempty trial and target samples"));
        }
        Ok(Self {
            p_hat_marginal: n1 as f64 / (n1 + n0) as f64,
            p_hat,
            pi_hat: 0.5,
            n1,
            n0,
            warnings: Vec::new(),
        })
    }

    /// Penalized logistic fit of `S` on the Legendre features of `X` over
    /// trial and target records.
    pub fn fit(sample: &ObservedSample, degree: usize) -> Result<Self> {
        let recs: Vec<_> = sample
            .records()
            .iter()
            .filter(|r| matches!(r.s, Population::Trial | Population::Target))
            .collect();
        let xs: Vec<f64> = recs.iter().map(|r| r.x).collect();
        let labels: Vec<bool> = recs.iter().map(|r| r.s == Population::Trial).collect();
        let fit = logistic_fit(&xs, &labels, &LogisticConfig::new(degree))?;
        let converged = fit.converged;
        let mut set = Self::with_propensity(sample.n1(), sample.n0(), Arc::new(fit))?;
        if !converged {
            set.warnings.push("participation model did not converge".into());
        }
        Ok(set)
    }

    pub fn n(&self) -> usize {
        self.n1 + self.n0
    }

    /// Inverse-odds weight `(1 - p(x)) / (p(x) pi)`.
    pub fn weight(&self, x: f64) -> f64 {
        let p = self.p_hat.predict(x);
        (1.0 - p) / (p * self.pi_hat)
    }

    fn normalizer(&self) -> f64 {
        self.n() as f64 * (1.0 - self.p_hat_marginal)
    }

    fn extreme_warning(&self, xs: &[f64]) -> Option<String> {
        let bad = xs
            .iter()
            .filter(|&&x| {
                let p = self.p_hat.predict(x);
                !(p > EXTREME && p < 1.0 - EXTREME)
            })
            .count();
        (bad > 0).then(|| format!("{bad} records with extreme participation probability"))
    }
}

/// The generic doubly-robust functional
///
/// `1/(n (1 - p)) * sum [ 1{S=0} m(X) + 1{S=1, A=a} w(X) (R - m(X)) ]`
///
/// given the target-side total of `m`, and per trial-arm record the
/// covariate, the response `R` and `m(X)`.
pub fn dr_functional(
    nuis: &NuisanceSet,
    target_sum_m: f64,
    arm_x: &[f64],
    arm_r: &[f64],
    arm_m: &[f64],
) -> f64 {
    let resid: f64 = arm_x
        .iter()
        .zip(arm_r)
        .zip(arm_m)
        .map(|((&x, &r), &m)| nuis.weight(x) * (r - m))
        .sum();
    (target_sum_m + resid) / nuis.normalizer()
}

fn finish(
    kind: EstimatorKind,
    degree: usize,
    arm: Arm,
    value: f64,
    nuis: &NuisanceSet,
    arm_x: &[f64],
) -> Result<EstimateRecord> {
    if !value.is_finite() {
        return Err(Error::IllConditioned(format!("{kind} produced a non-finite estimate")));
    }
    let mut warnings = nuis.warnings.clone();
    warnings.extend(nuis.extreme_warning(arm_x));
    Ok(EstimateRecord { estimator: kind, degree, point_estimate: value, arm, warnings })
}

fn require_arm(arm: &ArmData) -> Result<()> {
    if arm.is_empty() {
        return Err(Error::invalid("trial arm is empty"));
    }
    Ok(())
}

/// Inverse-odds weighting estimator.
pub fn ipw_prepared(arm: &ArmData, nuis: &NuisanceSet, a: Arm) -> Result<EstimateRecord> {
    require_arm(arm)?;
    let zeros = vec![0.0; arm.len()];
    let v = dr_functional(nuis, 0.0, &arm.xs, &arm.ys, &zeros);
    finish(EstimatorKind::Ipw, 0, a, v, nuis, &arm.xs)
}

/// Doubly-robust estimator around a given outcome regression.
pub fn dr_with_outcome(
    arm: &ArmData,
    target_x: &[f64],
    nuis: &NuisanceSet,
    g: &dyn FittedRegressor,
    a: Arm,
    degree: usize,
) -> Result<EstimateRecord> {
    require_arm(arm)?;
    let target_sum: f64 = target_x.iter().map(|&x| g.predict(x)).sum();
    let m = g.predict_many(&arm.xs);
    let v = dr_functional(nuis, target_sum, &arm.xs, &arm.ys, &m);
    finish(EstimatorKind::Dr, degree, a, v, nuis, &arm.xs)
}

/// Doubly-robust ABC around a given bias regression: the predictor mean over
/// the target minus the DR functional applied to `Z = f - Y` with `b` as its
/// regression. The correction is subtracted so that both the exact-`b` limit
/// and the exact-weight limit recover the bias-corrected identification.
pub fn dr_abc_with_bias(
    arm: &ArmData,
    target_x: &[f64],
    f: &dyn FittedRegressor,
    nuis: &NuisanceSet,
    b: &dyn FittedRegressor,
    a: Arm,
    degree: usize,
) -> Result<EstimateRecord> {
    require_arm(arm)?;
    if arm.fx.len() != arm.len() {
        return Err(Error::invalid("predictor values missing for the trial arm"));
    }
    let f_mean = target_x.iter().map(|&x| f.predict(x)).sum::<f64>() / target_x.len() as f64;
    let target_sum_b: f64 = target_x.iter().map(|&x| b.predict(x)).sum();
    let z: Vec<f64> = arm.fx.iter().zip(&arm.ys).map(|(f, y)| f - y).collect();
    let m = b.predict_many(&arm.xs);
    let v = f_mean - dr_functional(nuis, target_sum_b, &arm.xs, &z, &m);
    finish(EstimatorKind::DrAbc, degree, a, v, nuis, &arm.xs)
}

/// Doubly-robust estimator around an augmented regression `h(x, f(x))`.
pub fn dr_pa_with_augmented(
    arm: &ArmData,
    target_x: &[f64],
    f: &dyn FittedRegressor,
    nuis: &NuisanceSet,
    h: &dyn Fn(f64, f64) -> f64,
    a: Arm,
    degree: usize,
) -> Result<EstimateRecord> {
    require_arm(arm)?;
    if arm.fx.len() != arm.len() {
        return Err(Error::invalid("predictor values missing for the trial arm"));
    }
    let target_sum: f64 = target_x.iter().map(|&x| h(x, f.predict(x))).sum();
    let m: Vec<f64> = arm.xs.iter().zip(&arm.fx).map(|(&x, &fx)| h(x, fx)).collect();
    let v = dr_functional(nuis, target_sum, &arm.xs, &arm.ys, &m);
    finish(EstimatorKind::DrPa, degree, a, v, nuis, &arm.xs)
}

fn fitted_arm(sample: &ObservedSample, cfg: &EstimatorConfig, f: Option<&dyn FittedRegressor>) -> Result<ArmData> {
    let arm = ArmData::from_sample(sample, cfg.arm, f);
    if arm.len() < cfg.degree + 2 {
        return Err(Error::invalid(format!(
            "trial arm has {} records, degree {} needs at least {}",
            arm.len(),
            cfg.degree,
            cfg.degree + 2
        )));
    }
    Ok(arm)
}

pub fn estimate_ipw(sample: &ObservedSample, nuis: &NuisanceSet, a: Arm) -> Result<EstimateRecord> {
    ipw_prepared(&ArmData::from_sample(sample, a, None), nuis, a)
}

pub fn estimate_dr_baseline(
    sample: &ObservedSample,
    nuis: &NuisanceSet,
    cfg: &EstimatorConfig,
) -> Result<EstimateRecord> {
    let arm = fitted_arm(sample, cfg, None)?;
    let g: RidgeFit = fit_outcome(&arm, cfg)?;
    dr_with_outcome(&arm, &sample.target_x(), nuis, &g, cfg.arm, cfg.degree)
}

pub fn estimate_dr_abc(
    sample: &ObservedSample,
    f: &dyn FittedRegressor,
    nuis: &NuisanceSet,
    cfg: &EstimatorConfig,
) -> Result<EstimateRecord> {
    let arm = fitted_arm(sample, cfg, Some(f))?;
    let b = fit_bias(&arm, cfg)?;
    dr_abc_with_bias(&arm, &sample.target_x(), f, nuis, &b, cfg.arm, cfg.degree)
}

/// The DR-PA estimator: DR functional around the augmented outcome model.
pub fn estimate_dr_aom(
    sample: &ObservedSample,
    f: &dyn FittedRegressor,
    nuis: &NuisanceSet,
    cfg: &EstimatorConfig,
) -> Result<EstimateRecord> {
    let arm = fitted_arm(sample, cfg, Some(f))?;
    let h = fit_augmented(&arm, cfg)?;
    let hf = |x: f64, fx: f64| h.predict_augmented(x, fx);
    dr_pa_with_augmented(&arm, &sample.target_x(), f, nuis, &hf, cfg.arm, cfg.degree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{CompositeSample, Observation};
    use crate::estimators::outcome::{estimate_abc, estimate_om, polynomial_mean, TargetSummary};
    use crate::regression::{ConstantPredictor, FnPredictor};

    fn sample() -> ObservedSample {
        let mut recs = Vec::new();
        for i in 0..40 {
            let x = -1.0 + 2.0 * i as f64 / 39.0;
            let a = if i % 2 == 0 { Arm::Treated } else { Arm::Control };
            recs.push(Observation::trial(x, 0.0, a, (2.0 * x).sin() + 0.3 * (i as f64).cos()));
        }
        for i in 0..60 {
            recs.push(Observation::target((i as f64 * 0.37).sin(), 0.0));
        }
        CompositeSample::new(recs).observed()
    }

    fn marginal(s: &ObservedSample) -> NuisanceSet {
        let p = s.n1() as f64 / (s.n1() + s.n0()) as f64;
        NuisanceSet::with_propensity(s.n1(), s.n0(), Arc::new(ConstantPredictor(p))).unwrap()
    }

    #[test]
    fn ipw_with_marginal_propensity_is_scaled_arm_mean() {
        let s = sample();
        let nuis = marginal(&s);
        let (_, ys) = s.trial_arm(Arm::Treated);
        let want = 2.0 / s.n1() as f64 * ys.iter().sum::<f64>();
        let got = estimate_ipw(&s, &nuis, Arm::Treated).unwrap().point_estimate;
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }

    #[test]
    fn dr_with_zero_regression_is_ipw() {
        let s = sample();
        let nuis = NuisanceSet::fit(&s, 2).unwrap();
        let arm = ArmData::from_sample(&s, Arm::Treated, Some(&ConstantPredictor(0.0)));
        let tx = s.target_x();
        let ipw = estimate_ipw(&s, &nuis, Arm::Treated).unwrap().point_estimate;
        let zero = ConstantPredictor(0.0);
        let dr = dr_with_outcome(&arm, &tx, &nuis, &zero, Arm::Treated, 0).unwrap().point_estimate;
        assert!((dr - ipw).abs() < 1e-10);
        let pa = dr_pa_with_augmented(&arm, &tx, &zero, &nuis, &|_, _| 0.0, Arm::Treated, 0)
            .unwrap()
            .point_estimate;
        assert!((pa - ipw).abs() < 1e-10);
        // With f = 0, Z = -Y and a zero bias fit the DR-ABC estimate is IPW too.
        let abc = dr_abc_with_bias(&arm, &tx, &zero, &nuis, &zero, Arm::Treated, 0)
            .unwrap()
            .point_estimate;
        assert!((abc - ipw).abs() < 1e-10);
    }

    #[test]
    fn zero_weights_give_regression_only() {
        let s = sample();
        // p = 1 everywhere makes every inverse-odds weight zero.
        let nuis = NuisanceSet::with_propensity(s.n1(), s.n0(), Arc::new(ConstantPredictor(1.0))).unwrap();
        let cfg = EstimatorConfig::new(3, Arm::Treated, 5);
        let f = FnPredictor(|x: f64| 0.5 * x);
        let arm = ArmData::from_sample(&s, Arm::Treated, Some(&f));
        let summary = TargetSummary::new(&s.target_x(), 3, Some(&f));

        let g = fit_outcome(&arm, &cfg).unwrap();
        let dr = dr_with_outcome(&arm, &s.target_x(), &nuis, &g, Arm::Treated, 3).unwrap();
        let om = estimate_om(&s, &cfg).unwrap();
        assert!((dr.point_estimate - om.point_estimate).abs() < 1e-10);
        assert!((polynomial_mean(&g, &summary) - om.point_estimate).abs() < 1e-12);

        let abc = estimate_abc(&s, &f, &cfg).unwrap();
        let dra = estimate_dr_abc(&s, &f, &nuis, &cfg).unwrap();
        assert!((dra.point_estimate - abc.point_estimate).abs() < 1e-10);
    }

    #[test]
    fn extreme_propensities_are_flagged() {
        let s = sample();
        let nuis = NuisanceSet::with_propensity(s.n1(), s.n0(), Arc::new(ConstantPredictor(1e-4))).unwrap();
        let r = estimate_ipw(&s, &nuis, Arm::Treated).unwrap();
        assert!(!r.warnings.is_empty());
        let r = estimate_ipw(&s, &marginal(&s), Arm::Treated).unwrap();
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn single_record_with_unit_weight() {
        let recs = vec![
            Observation::trial(0.2, 0.0, Arm::Treated, 3.5),
            Observation::target(0.1, 0.0),
        ];
        let s = CompositeSample::new(recs).observed();
        // p = 2/3 and pi = 1/2 give weight 1; the normalizer 2 * (1 - 1/2) is 1.
        let nuis = NuisanceSet::with_propensity(1, 1, Arc::new(ConstantPredictor(2.0 / 3.0))).unwrap();
        let r = estimate_ipw(&s, &nuis, Arm::Treated).unwrap();
        assert!((r.point_estimate - 3.5).abs() < 1e-12);
    }
}
