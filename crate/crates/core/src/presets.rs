//! Reference values and run plans for the fibre source as operated:
//! correlators measured on ITU10-33, the per-channel Bell results and
//! measurement-campaign sizes that reproduce the observed statistics.

use std::f64::consts::{FRAC_PI_4, TAU};

use crate::dwdm::{pair_for, ChannelPair, DEFAULT_PAIR_SUM};
use crate::experiment::{filter_settings, fringe_plan, RunPlan};
use crate::hilbert::{apply_noise, make_hyper_state, DensityOperator, NoiseModel};
use crate::measurement::{grid, AnalyzerSetting, SettingQuad};
use crate::tomography::complete_settings;
use crate::Result;

/// Correlators at the standard quad (`alpha_i = 22.5 deg`,
/// `phi_i = pi/4`); rows are phase pairs, columns polarization pairs.
pub const MEASURED_CORRELATIONS: [[f64; 4]; 4] = [
    [0.51, -0.33, -0.46, -0.41],
    [-0.57, 0.34, 0.50, 0.54],
    [-0.36, 0.30, 0.62, 0.52],
    [-0.69, 0.58, 0.55, 0.46],
];

/// Typical uncertainty of one measured correlator.
pub const CORRELATOR_UNCERTAINTY: f64 = 0.03;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelResult {
    pub signal: i32,
    pub idler: i32,
    pub beta: f64,
    pub sigma: f64,
    /// Violation in standard deviations, as reported (truncated).
    pub sigmas: u32,
}

pub const CHANNEL_RESULTS: [ChannelResult; 5] = [
    ChannelResult {
        signal: 10,
        idler: 33,
        beta: 7.73,
        sigma: 0.12,
        sigmas: 31,
    },
    ChannelResult {
        signal: 11,
        idler: 32,
        beta: 7.25,
        sigma: 0.12,
        sigmas: 27,
    },
    ChannelResult {
        signal: 12,
        idler: 31,
        beta: 7.63,
        sigma: 0.12,
        sigmas: 30,
    },
    ChannelResult {
        signal: 13,
        idler: 30,
        beta: 7.61,
        sigma: 0.11,
        sigmas: 32,
    },
    ChannelResult {
        signal: 14,
        idler: 29,
        beta: 7.78,
        sigma: 0.13,
        sigmas: 29,
    },
];

impl ChannelResult {
    pub fn pair(&self) -> ChannelPair {
        pair_for(self.signal, DEFAULT_PAIR_SUM).expect("standard pair")
    }
}

/// Fitted fringe visibility, both DOFs.
pub const FRINGE_VISIBILITY: f64 = 0.98;
pub const FRINGE_VISIBILITY_UNCERTAINTY: f64 = 0.015;

/// Marginal single-DOF Bell values `(energy-time, polarization)`.
pub const MARGINAL_BETAS: (f64, f64) = (2.69, 2.72);

/// Coincidence rate on the all-plus detectors at the fringe maximum.
pub const PEAK_COINCIDENCE_RATE: f64 = 100.0;
/// Post-selected coincidences summed over all 16 outcomes; the all-plus
/// maximum carries a quarter of them.
pub const POSTSELECTED_RATE: f64 = 4.0 * PEAK_COINCIDENCE_RATE;
pub const DARK_COUNTS_PER_MEASUREMENT: f64 = 20.0;

/// Per-setting window of the correlation-table campaign; gives about 0.03
/// uncertainty per correlator.
pub const TABLE_INTEGRATION_TIME: f64 = 2.0;
/// Per-point window and grid size of a fringe surface.
pub const FRINGE_INTEGRATION_TIME: f64 = 5.0;
pub const FRINGE_GRID: usize = 16;

/// The source state with equal polarization and energy-time visibility.
pub fn source_state(visibility: f64) -> Result<DensityOperator> {
    apply_noise(
        &make_hyper_state(0.0),
        &NoiseModel::with_visibilities(visibility, visibility),
    )
}

/// One-outcome filter campaign for a full correlation table.
pub fn table_plan(quad: &SettingQuad, seed: u64) -> RunPlan {
    RunPlan::one_outcome(
        &filter_settings(&quad.settings()),
        TABLE_INTEGRATION_TIME,
        seed,
        POSTSELECTED_RATE,
        DARK_COUNTS_PER_MEASUREMENT / TABLE_INTEGRATION_TIME,
    )
}

pub fn standard_quad() -> SettingQuad {
    SettingQuad::with_bob(22.5, FRAC_PI_4)
}

/// Fringe surface over Bob's settings with Alice fixed.
pub fn fringe_surface_plan(alpha_s: f64, phi_s: f64, seed: u64) -> RunPlan {
    let n = FRINGE_GRID;
    fringe_plan(
        alpha_s,
        phi_s,
        &grid(0.0, 180.0 / n as f64, n),
        &grid(0.0, TAU / n as f64, n),
        FRINGE_INTEGRATION_TIME,
        seed,
        POSTSELECTED_RATE,
        DARK_COUNTS_PER_MEASUREMENT / FRINGE_INTEGRATION_TIME,
    )
}

/// Tomography campaign: every outcome of the complete local setting set,
/// with the table campaign's window and dark level per outcome.
pub fn tomography_plan(seed: u64) -> RunPlan {
    let settings: Vec<AnalyzerSetting> = complete_settings();
    RunPlan::all_outcomes(
        &settings,
        TABLE_INTEGRATION_TIME,
        seed,
        POSTSELECTED_RATE,
        DARK_COUNTS_PER_MEASUREMENT / TABLE_INTEGRATION_TIME,
    )
}
