//! Oracles, decompositions, theory checks and the scenario-grid runner.

mod checks;
mod export;
mod glm_study;
mod grid;
mod oracle;
mod scenario;
mod theory;

pub use checks::{check_world_spec, run_check, run_checks, CheckConfig, CheckKind, CheckOutcome};
pub use export::{export_scenario, export_world, ExportConfig};
pub use glm_study::{
    glm_scenario, run_glm_study, GlmFit, GlmPredictor, GlmStudyConfig, GlmStudyReport, Table2Row, GLM_PREDICTOR_DEGREE,
};
pub use grid::{
    gp_scenario, paired_rmse_gap, run_scenario_grid, run_seed, world_seeds, ComboFilter, GridCombo, GridConfig, GridMetadata,
    GridReport, GridRow,
};
pub use oracle::{
    target_weight, true_mu, true_mu_monte_carlo, OracleMethod, OracleResult, TargetExpectation, ORACLE_NODES,
};
pub use scenario::{build_predictor, decompose_mse, PreparedScenario, ReplicationEstimate, TABULATION_NODES};
pub use theory::{
    decompose_estimates, empirical_excess_risk, lemma2_bounds, prop1_formula, spectrum, RiskReport, Spectrum,
    SPECTRUM_NODES,
};
