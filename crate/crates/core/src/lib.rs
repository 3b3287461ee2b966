//! Digital twin of a fibre source of polarization x energy-time hyperentangled
//! photon pairs demultiplexed into DWDM channel pairs.
//!
//! The crate is organised bottom-up:
//!
//! - [`hilbert`]: dense complex linear algebra at dimension <= 16, ideal and
//!   noisy hyperentangled states.
//! - [`measurement`]: polarization and Franson analyzer effects, correlators,
//!   CHSH and the generalized Bell operator `beta = beta1 (x) beta2`.
//! - [`experiment`]: Poisson coincidence simulation, the one-outcome filter
//!   expansion and separable 2-D fringe fitting.
//! - [`tomography`]: maximum-likelihood density-operator reconstruction with
//!   bootstrap fidelity intervals.
//! - [`dwdm`]: ITU grid arithmetic, channel pairing, spectral envelope and the
//!   pair-rate / coincidence-rate budget.
//!
//! Basis ordering for the 16-dimensional two-photon space is fixed as
//! `(pol_s, time_s, pol_i, time_i)` with `H = 0, V = 1` and `E = 0, L = 1`,
//! most significant factor first: index `8 p_s + 4 t_s + 2 p_i + t_i`.

pub mod dwdm;
pub mod experiment;
pub mod hilbert;
pub mod measurement;
pub mod presets;
pub mod tomography;

mod error;

pub use error::{Error, Result};

pub use dwdm::{ChannelPair, DetectorSpec, ItuChannel, LinkBudget};
pub use experiment::{CountRecord, FringeFit, RunPlan};
pub use hilbert::{ComplexMatrix, DensityOperator, NoiseModel, StateVector, C64};
pub use measurement::{AnalyzerConfig, AnalyzerSetting, CorrelationTable, JointSetting, SettingQuad};
pub use tomography::{MleResult, TomographyDataset};
