//! Point estimators of the target mean potential outcome `mu_a`.
//!
//! Outcome-based estimators ([`estimate_om`], [`estimate_os_om`],
//! [`estimate_abc`], [`estimate_aom`]) are linear in the target covariate
//! features, so each has a `*_prepared` form that takes precomputed target
//! means. The weighting family ([`estimate_ipw`] and the DR estimators) is
//! built on [`dr_functional`].

mod outcome;
mod weighting;

pub use outcome::{
    abc_prepared, aom_prepared, augmented_mean, estimate_abc, estimate_aom, estimate_om,
    estimate_om_categorical, estimate_os_om, fit_augmented, fit_bias, fit_outcome,
    om_categorical_from_groups, om_prepared, os_om_prepared, polynomial_mean, ArmData,
    EstimatorConfig, TargetSummary,
};
pub use weighting::{
    dr_abc_with_bias, dr_functional, dr_pa_with_augmented, dr_with_outcome, estimate_dr_abc,
    estimate_dr_aom, estimate_dr_baseline, estimate_ipw, ipw_prepared, NuisanceSet, EXTREME,
};
