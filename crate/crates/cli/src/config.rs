//! Campaign configuration, read from TOML. Every section has defaults that
//! reproduce the reference campaign, and unknown keys are rejected.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, TAU};
use std::path::{Path, PathBuf};

use hypertwin::dwdm::{ChannelWeighting, DetectorSpec, LinkBudget, DEFAULT_PAIR_SUM};
use hypertwin::experiment::{DarkCorrection, FitOptions, FitWeighting};
use hypertwin::measurement::ScanConfig;
use hypertwin::presets;
use hypertwin::tomography::MleOptions;
use hypertwin::{AnalyzerConfig, NoiseModel};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    /// Master seed; per-command streams are derived from it.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub noise: NoiseModel,
    pub analyzer: AnalyzerConfig,
    pub fringes: FringeSection,
    pub beta: BetaSection,
    pub tomo: TomoSection,
    pub budget: BudgetSection,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            output_dir: PathBuf::from("out"),
            noise: NoiseModel::with_visibilities(presets::FRINGE_VISIBILITY, presets::FRINGE_VISIBILITY),
            analyzer: AnalyzerConfig::default(),
            fringes: FringeSection::default(),
            beta: BetaSection::default(),
            tomo: TomoSection::default(),
            budget: BudgetSection::default(),
        }
    }
}

/// Counting statistics shared by the simulated campaigns.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Counting {
    /// Seconds per measurement.
    pub integration_time: f64,
    /// Post-selected coincidences per second summed over all outcomes.
    pub pair_rate: f64,
    /// Dark coincidences per second per measurement.
    pub dark_rate: f64,
    pub dark_correction: DarkCorrection,
}

impl Counting {
    fn table() -> Self {
        Self {
            integration_time: presets::TABLE_INTEGRATION_TIME,
            pair_rate: presets::POSTSELECTED_RATE,
            dark_rate: presets::DARK_COUNTS_PER_MEASUREMENT / presets::TABLE_INTEGRATION_TIME,
            dark_correction: DarkCorrection::Clamped,
        }
    }
}

impl Default for Counting {
    fn default() -> Self {
        Self::table()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FringeSection {
    /// Alice's fixed `[alpha_s (deg), phi_s (rad)]`, one surface each.
    pub alice: Vec<[f64; 2]>,
    pub alpha_points: usize,
    pub phi_points: usize,
    pub counting: Counting,
    pub fit: FitOptions,
}

impl Default for FringeSection {
    fn default() -> Self {
        let t = presets::FRINGE_INTEGRATION_TIME;
        Self {
            alice: vec![[0.0, 0.0], [45.0, 0.0], [0.0, FRAC_PI_2], [45.0, FRAC_PI_2]],
            alpha_points: presets::FRINGE_GRID,
            phi_points: presets::FRINGE_GRID,
            counting: Counting {
                integration_time: t,
                pair_rate: presets::POSTSELECTED_RATE,
                dark_rate: presets::DARK_COUNTS_PER_MEASUREMENT / t,
                dark_correction: DarkCorrection::Unclamped,
            },
            fit: FitOptions {
                weighting: FitWeighting::Poisson {
                    background: presets::DARK_COUNTS_PER_MEASUREMENT,
                },
                ..FitOptions::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BetaSection {
    /// Scan over `alpha_i` in `[0, 180)` deg and `phi_i` in `[0, 2 pi)`.
    pub alpha_points: usize,
    pub phi_points: usize,
    pub scan: ScanConfig,
    /// Bob's unprimed settings for the correlation table.
    pub alpha_i: f64,
    pub phi_i: f64,
    /// Measured 4x4 correlation table (CSV, four numbers per row). When
    /// set, the table is read instead of simulated.
    pub table_file: Option<PathBuf>,
    /// Per-correlator uncertainty assumed for a table read from file.
    pub table_sigma: f64,
    /// Signal channels of the per-channel summary.
    pub channels: Vec<i32>,
    pub pair_sum: i32,
    pub counting: Counting,
}

impl Default for BetaSection {
    fn default() -> Self {
        Self {
            alpha_points: 100,
            phi_points: 100,
            scan: ScanConfig::default(),
            alpha_i: 22.5,
            phi_i: FRAC_PI_4,
            table_file: None,
            table_sigma: presets::CORRELATOR_UNCERTAINTY,
            channels: (10..=14).collect(),
            pair_sum: DEFAULT_PAIR_SUM,
            counting: Counting::table(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SettingSet {
    /// 81 local settings, informationally complete.
    #[default]
    Complete,
    /// The Bell quad plus arrival-time variants; needs `allow_reduced_rank`.
    Reduced,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TomoSection {
    pub settings: SettingSet,
    pub counting: Counting,
    pub resamples: usize,
    /// Relative phase of the target hyperentangled state.
    pub target_phase: f64,
    pub mle: MleOptions,
}

impl Default for TomoSection {
    fn default() -> Self {
        Self {
            settings: SettingSet::Complete,
            counting: Counting::table(),
            resamples: 200,
            target_phase: 0.0,
            mle: MleOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetSection {
    pub detector: DetectorSpec,
    pub link: LinkBudget,
    pub reference: LinkBudget,
    pub channels: Vec<i32>,
    pub pair_sum: i32,
    pub weighting: ChannelWeighting,
}

impl Default for BudgetSection {
    fn default() -> Self {
        Self {
            detector: DetectorSpec::IDQ220,
            link: LinkBudget::DWDM,
            reference: LinkBudget::SINGLE_CHANNEL,
            channels: (10..=14).collect(),
            pair_sum: DEFAULT_PAIR_SUM,
            weighting: ChannelWeighting::Uniform,
        }
    }
}

impl CampaignConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        // relative table files are resolved against the config's directory
        if let (Some(table), Some(dir)) = (&cfg.beta.table_file, path.parent()) {
            if table.is_relative() {
                cfg.beta.table_file = Some(dir.join(table));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    /// Checks everything that can be checked before a run starts. Errors
    /// name the offending field.
    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |field: &str, e: hypertwin::Error| CliError::Config(format!("{field}: {e}"));
        self.noise.validate().map_err(|e| cfg("noise", e))?;
        self.analyzer.validate().map_err(|e| cfg("analyzer", e))?;

        let f = &self.fringes;
        if f.alice.is_empty() {
            return Err(CliError::Config("fringes.alice: need at least one setting".into()));
        }
        if f.alpha_points < 5 || f.phi_points < 5 {
            return Err(CliError::Config("fringes: need at least 5 points per axis".into()));
        }
        check_counting("fringes.counting", &f.counting)?;

        let b = &self.beta;
        if b.alpha_points == 0 || b.phi_points == 0 {
            return Err(CliError::Config("beta: scan grid must be nonempty".into()));
        }
        for (name, signs) in [
            ("beta.scan.row_signs", b.scan.row_signs),
            ("beta.scan.col_signs", b.scan.col_signs),
        ] {
            if signs.iter().any(|s| s.abs() != 1) {
                return Err(CliError::Config(format!("{name}: entries must be +1 or -1")));
            }
        }
        if !(b.table_sigma.is_finite() && b.table_sigma > 0.0) {
            return Err(CliError::Config("beta.table_sigma: must be positive".into()));
        }
        check_counting("beta.counting", &b.counting)?;
        for &n in &b.channels {
            hypertwin::dwdm::pair_for(n, b.pair_sum).map_err(|e| cfg("beta.channels", e))?;
        }

        let t = &self.tomo;
        check_counting("tomo.counting", &t.counting)?;
        if t.resamples < hypertwin::tomography::MIN_RESAMPLES {
            return Err(CliError::Config(format!(
                "tomo.resamples: need at least {}",
                hypertwin::tomography::MIN_RESAMPLES
            )));
        }
        if t.settings == SettingSet::Reduced && !t.mle.allow_reduced_rank {
            return Err(CliError::Config(
                "tomo.settings: the reduced set is not informationally complete; set tomo.mle.allow_reduced_rank"
                    .into(),
            ));
        }

        let d = &self.budget;
        d.detector.validate().map_err(|e| cfg("budget.detector", e))?;
        d.link.validate().map_err(|e| cfg("budget.link", e))?;
        d.reference.validate().map_err(|e| cfg("budget.reference", e))?;
        if d.channels.is_empty() {
            return Err(CliError::Config("budget.channels: need at least one pair".into()));
        }
        for &n in &d.channels {
            hypertwin::dwdm::pair_for(n, d.pair_sum).map_err(|e| cfg("budget.channels", e))?;
        }
        Ok(())
    }
}

fn check_counting(name: &str, c: &Counting) -> Result<(), CliError> {
    let ok = c.integration_time.is_finite()
        && c.integration_time > 0.0
        && c.pair_rate.is_finite()
        && c.pair_rate >= 0.0
        && c.dark_rate.is_finite()
        && c.dark_rate >= 0.0;
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "{name}: integration_time must be positive and rates non-negative"
        )))
    }
}

/// Evenly spaced samples of one period.
pub(crate) fn period_grid(period: f64, n: usize) -> Vec<f64> {
    hypertwin::measurement::grid(0.0, period / n as f64, n)
}

pub(crate) const ALPHA_PERIOD: f64 = 180.0;
pub(crate) const PHI_PERIOD: f64 = TAU;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = CampaignConfig::default();
        let back = CampaignConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn empty_file_is_default() {
        assert_eq!(CampaignConfig::from_toml("").unwrap(), CampaignConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let err = CampaignConfig::from_toml("seed = 3\n[noise]\nv_poll = 0.9\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("v_poll"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let err = CampaignConfig::from_toml("[noise]\nv_pol = 1.5\n").unwrap_err();
        assert!(err.to_string().contains("v_pol"), "{err}");
        let err = CampaignConfig::from_toml("[budget]\nchannels = [99]\n").unwrap_err();
        assert!(err.to_string().contains("budget.channels"), "{err}");
        let err = CampaignConfig::from_toml("[tomo]\nsettings = \"reduced\"\n").unwrap_err();
        assert!(err.to_string().contains("allow_reduced_rank"), "{err}");
    }
}
