//! Prediction-powered generalization of randomized-trial results to a target
//! population.
//!
//! The crate is split along the lines of the workflow:
//!
//! * [`domain`] holds observations, composite samples and scenario descriptions.
//! * [`regression`] fits Legendre ridge models, random cosine-feature
//!   predictors and penalized logistic models.
//! * [`dgp`] draws synthetic worlds (Gaussian-process or polynomial) and
//!   samples trial, target and observational cohorts from them.
//! * [`estimators`] computes the outcome-model, bias-corrected, augmented,
//!   weighting and doubly-robust estimates of the target mean potential outcome.
//! * [`analysis`] provides ground-truth oracles, Monte Carlo decompositions,
//!   the scenario-grid runner and the theory checks.

pub mod analysis;
pub mod dgp;
pub mod domain;
pub mod error;
pub mod estimators;
pub mod quadrature;
pub mod regression;
pub mod seeds;

pub use error::{Error, Result};
