//! Analyzer effects, correlators and Bell functionals.
//!
//! Each photon passes a polarization analyzer (half-wave plate + PBS, PBS
//! transmission reads `+1`) and an unbalanced Michelson interferometer whose
//! central coincidence slot projects the time bin onto
//! `(|E> +- e^{i phi}|L>)/sqrt(2)`. Probabilities are normalized within the
//! post-selected ensemble.

mod analyzer;
mod bell;
mod settings;

pub use analyzer::{
    arrival_effect, circular_effect, et_effect, pol_effect, Analyzer, AnalyzerConfig, EtEffect, PolSignConvention,
    CENTRAL_SLOT_WEIGHT,
};
pub use bell::{
    averaged_marginal_betas, beta_scan, chsh, correlation_table, generalized_beta, grid, is_chsh_pattern,
    marginal_tables, violation_sigmas, BetaScan, MarginalTables, ScanConfig, BETA_LOCAL_BOUND, BETA_QUANTUM_BOUND,
    CHSH_LOCAL_BOUND, DEFAULT_SIGNS,
};
pub use settings::{
    all_outcomes, normalize_degrees, normalize_phase, outcome_sign, AnalyzerSetting, CorrelationTable, JointSetting,
    Outcomes, PolBasis, SettingKey, SettingQuad, TimeBasis, ALL_PLUS,
};

pub(crate) use settings::check_outcome;
