//! Coincidence-count Monte Carlo, the one-outcome filter expansion and
//! separable fringe fitting.

mod counts;
mod filter;
mod fringe;

pub use counts::{
    read_counts_csv, record_counts, simulate_counts, subtract_dark, write_counts_csv, CountRecord, DarkCorrection,
    Probe, RunPlan,
};
pub use filter::{expand_filter_counts, filter_settings, filter_table, quad_filter_settings, CorrelatorEstimate};
pub use fringe::{fit_fringes, fringe_plan, fringe_points, FitOptions, FitWeighting, FringeFit, FringePoint};
