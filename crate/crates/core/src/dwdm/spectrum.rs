use serde::{Deserialize, Serialize};

use super::grid::ChannelPair;
use crate::error::invalid;
use crate::Result;

/// Shape of the pair-emission spectrum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeShape {
    #[default]
    Gaussian,
    /// `sinc^2` of a phase mismatch quadratic in the detuning, as for
    /// degenerate type-0 conversion. The crystal length only sets the width,
    /// so the shape is parameterized by its FWHM like the Gaussian.
    SincSquared,
}

/// Emission envelope in wavelength, peak-normalized to 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralEnvelope {
    pub center_nm: f64,
    pub fwhm_nm: f64,
    pub shape: EnvelopeShape,
}

impl Default for SpectralEnvelope {
    fn default() -> Self {
        Self {
            center_nm: 1560.0,
            fwhm_nm: 40.0,
            shape: EnvelopeShape::Gaussian,
        }
    }
}

/// `sinc^2(x) = 1/2` at this `x`.
const SINC2_HALF_POINT: f64 = 1.391_557_377_251_1;

impl SpectralEnvelope {
    pub fn validate(&self) -> Result<()> {
        if !(self.fwhm_nm.is_finite() && self.fwhm_nm > 0.0) {
            return Err(invalid("fwhm_nm", "must be positive"));
        }
        if !(self.center_nm.is_finite() && self.center_nm > 0.0) {
            return Err(invalid("center_nm", "must be positive"));
        }
        Ok(())
    }

    pub fn value_at(&self, lambda_nm: f64) -> f64 {
        let u = (lambda_nm - self.center_nm) / (0.5 * self.fwhm_nm);
        match self.shape {
            EnvelopeShape::Gaussian => (-std::f64::consts::LN_2 * u * u).exp(),
            EnvelopeShape::SincSquared => {
                let x = SINC2_HALF_POINT * u * u;
                if x.abs() < 1e-12 {
                    1.0
                } else {
                    let s = x.sin() / x;
                    s * s
                }
            }
        }
    }

    /// Mean of the envelope over `[lo, hi]` (Simpson, 256 panels).
    pub fn band_average(&self, lo: f64, hi: f64) -> f64 {
        let n = 256;
        let h = (hi - lo) / n as f64;
        let mut acc = self.value_at(lo) + self.value_at(hi);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * self.value_at(lo + k as f64 * h);
        }
        acc * h / 3.0 / (hi - lo)
    }
}

/// Relative pair-generation weight of a channel pair: the envelope
/// integrated over the signal passband, normalized to the peak.
pub fn spectrum_weight(pair: &ChannelPair, envelope: &SpectralEnvelope) -> Result<f64> {
    envelope.validate()?;
    let (lo, hi) = pair.signal.band_nm();
    Ok(envelope.band_average(lo, hi))
}
