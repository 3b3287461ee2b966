//! Campaign runner behind the `hypertwin` binary. Each command reads a
//! [`CampaignConfig`], runs the corresponding simulation or analysis and
//! writes its artifacts atomically into the output directory together with
//! the resolved configuration.

pub mod app;
pub mod commands;
pub mod config;
mod output;

use std::path::PathBuf;

pub use commands::{
    cmd_beta, cmd_budget, cmd_fringes, cmd_tomo, read_table_csv, BetaReport, ChannelSummary, FringeReport,
    FringeSurface, TomoReport,
};
pub use config::CampaignConfig;
pub use output::Format;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] hypertwin::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for configuration problems, 3 for numerical non-convergence,
    /// 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use hypertwin::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::NonConvergence { .. }) => 3,
            CliError::Core(
                E::InvalidParameter { .. } | E::FransonInvalid(_) | E::OutOfGrid(_) | E::DegenerateGrid(_),
            ) => 2,
            _ => 1,
        }
    }
}

/// Where and how a command writes.
#[derive(Clone, Debug)]
pub struct RunContext {
    pub out_dir: PathBuf,
    pub format: Format,
}
