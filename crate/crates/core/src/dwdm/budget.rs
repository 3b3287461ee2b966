use serde::{Deserialize, Serialize};

use super::grid::ChannelPair;
use super::spectrum::{spectrum_weight, SpectralEnvelope};
use crate::error::invalid;
use crate::Result;

/// Tolerated multi-pair probability per coherence/timing window.
pub const MULTIPAIR_FRACTION: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    pub efficiency: f64,
    pub timing_resolution_ps: f64,
    pub saturation_cps: f64,
}

impl DetectorSpec {
    /// InGaAs gated detectors used in the experiment.
    pub const IDQ220: Self = Self {
        efficiency: 0.2,
        timing_resolution_ps: 100.0,
        saturation_cps: 20e3,
    };

    /// Superconducting detectors at the current state of the art.
    pub const BEST_IN_CLASS: Self = Self {
        efficiency: 0.9,
        timing_resolution_ps: 15.0,
        saturation_cps: 150e6,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(invalid("efficiency", "must lie in (0, 1]"));
        }
        if !(self.timing_resolution_ps.is_finite() && self.timing_resolution_ps > 0.0) {
            return Err(invalid("timing_resolution_ps", "must be positive"));
        }
        if !(self.saturation_cps.is_finite() && self.saturation_cps > 0.0) {
            return Err(invalid("saturation_cps", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkBudget {
    /// Per-photon transmission from source to detector, detector excluded.
    pub transmission_db: f64,
    pub singles_factor: f64,
    pub coincidence_factor: f64,
    pub coherence_time_ps: f64,
    pub channels: usize,
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self::DWDM
    }
}

impl LinkBudget {
    /// Five 100 GHz channel pairs behind the demultiplexers.
    pub const DWDM: Self = Self {
        transmission_db: -13.0,
        singles_factor: 0.25,
        coincidence_factor: 0.125,
        coherence_time_ps: 5.0,
        channels: 5,
    };

    /// Full bandwidth in a single channel.
    pub const SINGLE_CHANNEL: Self = Self {
        transmission_db: -10.0,
        singles_factor: 0.25,
        coincidence_factor: 0.125,
        coherence_time_ps: 1.0,
        channels: 1,
    };

    pub fn validate(&self) -> Result<()> {
        if self.transmission_db.is_nan() || self.transmission_db > 0.0 {
            return Err(invalid("transmission_db", "must be <= 0 dB"));
        }
        for (name, v) in [
            ("singles_factor", self.singles_factor),
            ("coincidence_factor", self.coincidence_factor),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(invalid(name, "must lie in (0, 1]"));
            }
        }
        if !(self.coherence_time_ps.is_finite() && self.coherence_time_ps > 0.0) {
            return Err(invalid("coherence_time_ps", "must be positive"));
        }
        if self.channels == 0 {
            return Err(invalid("channels", "must be at least 1"));
        }
        Ok(())
    }

    pub fn transmission(&self) -> f64 {
        10f64.powf(self.transmission_db / 10.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BindingConstraint {
    CoherenceTime,
    TimingResolution,
    Saturation,
}

impl std::fmt::Display for BindingConstraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::CoherenceTime => "coherence_time",
            Self::TimingResolution => "timing_resolution",
            Self::Saturation => "saturation",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateLimit {
    /// Pair rate per channel, 1/s.
    pub rate: f64,
    pub binding: BindingConstraint,
    pub coherence_limit: f64,
    pub timing_limit: f64,
    pub saturation_limit: f64,
}

pub fn max_pair_rate(budget: &LinkBudget, det: &DetectorSpec) -> Result<RateLimit> {
    budget.validate()?;
    det.validate()?;
    let coherence_limit = MULTIPAIR_FRACTION / (budget.coherence_time_ps * 1e-12);
    let timing_limit = MULTIPAIR_FRACTION / (det.timing_resolution_ps * 1e-12);
    let saturation_limit = det.saturation_cps / (budget.transmission() * det.efficiency * budget.singles_factor);
    let mut rate = coherence_limit;
    let mut binding = BindingConstraint::CoherenceTime;
    if timing_limit < rate {
        rate = timing_limit;
        binding = BindingConstraint::TimingResolution;
    }
    if saturation_limit < rate {
        rate = saturation_limit;
        binding = BindingConstraint::Saturation;
    }
    Ok(RateLimit {
        rate,
        binding,
        coherence_limit,
        timing_limit,
        saturation_limit,
    })
}

/// Singles per detector at pair rate `r`.
pub fn singles_rate(r: f64, budget: &LinkBudget, det: &DetectorSpec) -> f64 {
    r * budget.transmission() * det.efficiency * budget.singles_factor
}

/// Post-selected coincidences per channel pair at pair rate `r`.
pub fn coincidence_rate(r: f64, budget: &LinkBudget, det: &DetectorSpec) -> f64 {
    let te = budget.transmission() * det.efficiency;
    r * te * te * budget.coincidence_factor
}

/// How the pair rate is distributed across channels.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ChannelWeighting {
    /// Every channel is pumped to its own limit.
    #[default]
    Uniform,
    /// The strongest channel sits at the limit, others follow the envelope.
    Envelope(SpectralEnvelope),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCapacity {
    pub label: String,
    pub signal: i32,
    pub idler: i32,
    pub weight: f64,
    pub pair_rate: f64,
    pub singles_rate: f64,
    pub coincidence_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub limit: RateLimit,
    pub pairs: Vec<PairCapacity>,
    pub total_coincidence_rate: f64,
    pub reference_limit: RateLimit,
    pub reference_coincidence_rate: f64,
    pub ratio: f64,
    /// Channel count over the squared extra per-photon loss.
    pub asymptotic_ratio: f64,
}

/// Total coincidence rate over `pairs` under `budget`, compared against a
/// single-channel `reference` budget with the same detectors.
pub fn aggregate_capacity(
    pairs: &[ChannelPair],
    budget: &LinkBudget,
    reference: &LinkBudget,
    det: &DetectorSpec,
    weighting: &ChannelWeighting,
) -> Result<CapacityReport> {
    if pairs.is_empty() {
        return Err(invalid("pairs", "need at least one channel pair"));
    }
    let limit = max_pair_rate(budget, det)?;
    let reference_limit = max_pair_rate(reference, det)?;
    let weights: Vec<f64> = match weighting {
        ChannelWeighting::Uniform => vec![1.0; pairs.len()],
        ChannelWeighting::Envelope(env) => {
            let w = pairs
                .iter()
                .map(|p| spectrum_weight(p, env))
                .collect::<Result<Vec<_>>>()?;
            let peak = w.iter().cloned().fold(0.0, f64::max);
            w.into_iter().map(|x| x / peak).collect()
        }
    };
    let rows: Vec<PairCapacity> = pairs
        .iter()
        .zip(&weights)
        .map(|(p, &w)| {
            let r = limit.rate * w;
            PairCapacity {
                label: p.label(),
                signal: p.signal.number(),
                idler: p.idler.number(),
                weight: w,
                pair_rate: r,
                singles_rate: singles_rate(r, budget, det),
                coincidence_rate: coincidence_rate(r, budget, det),
            }
        })
        .collect();
    let total: f64 = rows.iter().map(|r| r.coincidence_rate).sum();
    let reference_rate = coincidence_rate(reference_limit.rate, reference, det);
    let extra_loss_db = reference.transmission_db - budget.transmission_db;
    let asymptotic_ratio = pairs.len() as f64 / 10f64.powf(2.0 * extra_loss_db / 10.0);
    Ok(CapacityReport {
        limit,
        pairs: rows,
        total_coincidence_rate: total,
        reference_limit,
        reference_coincidence_rate: reference_rate,
        ratio: total / reference_rate,
        asymptotic_ratio,
    })
}
