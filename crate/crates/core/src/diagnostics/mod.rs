//! Quantitative verification of the distributional approximation chain at
//! desk scale: total-variation distances between support mixtures, credible
//! sets and their coverage, support-recovery and score-envelope experiments,
//! Renyi separation tables, Hellinger contraction, and the assumption audit.

pub mod audit;
pub mod credible;
pub mod experiments;
pub mod renyi;
pub mod tv;

pub use audit::{assumption_audit, AssumptionAudit, AuditRow, DiagnosticsReport};
pub use credible::{
    chi2_quantile, oracle_credible_set, plugin_credible_set, posterior_mass_of_set, CredibleKind,
    CredibleSet,
};
pub use experiments::{
    chi2_union_tail, coverage_experiment, hellinger_contraction, score_envelope_experiment,
    support_recovery_experiment, ContractionRow, CoverageReport, RecoveryRow, ScoreEnvelopeReport,
};
pub use renyi::{grid_min_1d, renyi_separation, RenyiRow, RenyiTable};
pub use tv::{
    tv_between_support_mixtures, tv_mixture_vs_oracle, ComponentDensity, TvEstimate, TvMethod,
};
