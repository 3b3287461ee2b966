//! Maximum-likelihood reconstruction of the two-photon density operator
//! and bootstrap fidelity intervals.

mod bootstrap;
mod dataset;
mod io;
mod mle;

pub use bootstrap::{bootstrap_fidelity, BootstrapInterval, MIN_RESAMPLES};
pub use dataset::{complete_settings, reduced_settings, TomographyDataset, TomographyEntry};
pub use io::{read_density_matrix, write_density_matrix};
pub use mle::{
    factor_log_likelihood, likelihood_gradient, log_likelihood, mle_reconstruct, MleOptions, MleResult,
    PROBABILITY_FLOOR,
};
