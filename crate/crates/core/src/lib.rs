//! Correlation between log-rank statistics of several endpoints of the same
//! two-arm trial, estimated from per-subject influence values, together with
//! the conjunctive power and testing-order tools that consume it and a copula
//! trial simulator for checking the estimator.

pub mod dataset;
pub mod error;
pub mod influence;
pub mod mvn;
pub mod power;
pub mod simulator;
pub mod stats;
pub mod survival;

pub use dataset::{validate_dataset, RawDataset, SubjectRecord, TrialDataset};
pub use error::{Error, Result};
pub use influence::{
    correlation_from_influence, correlation_matrix, expected_numerator, influence_column,
    influence_matrix, raw_influence_column, CorrelationMatrix, InfluenceMatrix,
};
pub use mvn::{mvn_probability, psd_repair, MvnProblem, ProbabilityEstimate};
pub use power::{
    conjunctive_power, delta_from_hr, events_for_power, marginal_power, optimize_hierarchy,
    optimize_hierarchy_exhaustive, sensitivity_sweep, EndpointPlan, HierarchyResult, PowerSpec,
    SensitivityRow,
};
pub use simulator::{run_study, simulate_trial, CopulaFamily, ScenarioConfig, StudyResult};
pub use survival::{logrank_numerator, logrank_z};
