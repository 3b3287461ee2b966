use std::f64::consts::{FRAC_PI_2, TAU};

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::{Error, Result};

/// Wraps an angle in degrees into `[0, 180)`.
pub fn normalize_degrees(alpha: f64) -> f64 {
    let a = alpha.rem_euclid(180.0);
    if a >= 180.0 {
        0.0
    } else {
        a
    }
}

/// Wraps a phase into `[0, 2 pi)`.
pub fn normalize_phase(phi: f64) -> f64 {
    let p = phi.rem_euclid(TAU);
    if p >= TAU {
        0.0
    } else {
        p
    }
}

/// Analyzer configuration of both parties: polarizer angles in degrees and
/// interferometer phases in radians. Always stored normalized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointSetting {
    pub alpha_s: f64,
    pub alpha_i: f64,
    pub phi_s: f64,
    pub phi_i: f64,
}

impl JointSetting {
    pub fn new(alpha_s: f64, alpha_i: f64, phi_s: f64, phi_i: f64) -> Self {
        Self {
            alpha_s: normalize_degrees(alpha_s),
            alpha_i: normalize_degrees(alpha_i),
            phi_s: normalize_phase(phi_s),
            phi_i: normalize_phase(phi_i),
        }
    }

    /// The setting whose all-plus outcome is the given outcome tuple of this
    /// setting: a `-1` polarization outcome is the `+1` outcome at `alpha +
    /// 90 deg`, a `-1` interferometer outcome the `+1` outcome at `phi + pi`.
    pub fn shifted_for(&self, outcomes: Outcomes) -> JointSetting {
        let pol = |o: i8| if o < 0 { 90.0 } else { 0.0 };
        let ph = |o: i8| if o < 0 { std::f64::consts::PI } else { 0.0 };
        JointSetting::new(
            self.alpha_s + pol(outcomes[0]),
            self.alpha_i + pol(outcomes[2]),
            self.phi_s + ph(outcomes[1]),
            self.phi_i + ph(outcomes[3]),
        )
    }

    /// Hashable key with angles quantized to 1e-7 deg / 1e-9 rad, periodic
    /// wrap included.
    pub fn key(&self) -> SettingKey {
        let q = |x: f64, scale: f64, period: f64| {
            let n = (x * scale).round() as i64;
            let p = (period * scale).round() as i64;
            n.rem_euclid(p)
        };
        SettingKey([
            q(self.alpha_s, 1e7, 180.0),
            q(self.alpha_i, 1e7, 180.0),
            q(self.phi_s, 1e9, TAU),
            q(self.phi_i, 1e9, TAU),
        ])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SettingKey([i64; 4]);

/// Polarization analyzer basis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PolBasis {
    /// Linear projection at the given angle in degrees.
    Linear(f64),
    /// Circular basis, `+1` on `(|H> + i|V>)/sqrt(2)`.
    Circular,
}

/// Time-bin analyzer basis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TimeBasis {
    /// Franson interferometer at the given phase, central slot.
    Phase(f64),
    /// Arrival-time discrimination, `+1` on `|E>`.
    Arrival,
}

/// General analyzer setting, a superset of [`JointSetting`] used for
/// tomographic completeness.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyzerSetting {
    pub pol_s: PolBasis,
    pub time_s: TimeBasis,
    pub pol_i: PolBasis,
    pub time_i: TimeBasis,
}

impl From<JointSetting> for AnalyzerSetting {
    fn from(s: JointSetting) -> Self {
        Self {
            pol_s: PolBasis::Linear(s.alpha_s),
            time_s: TimeBasis::Phase(s.phi_s),
            pol_i: PolBasis::Linear(s.alpha_i),
            time_i: TimeBasis::Phase(s.phi_i),
        }
    }
}

impl AnalyzerSetting {
    /// The equivalent [`JointSetting`] if every analyzer is a linear
    /// polarizer / interferometer.
    pub fn as_joint(&self) -> Option<JointSetting> {
        match (self.pol_s, self.time_s, self.pol_i, self.time_i) {
            (PolBasis::Linear(a), TimeBasis::Phase(p), PolBasis::Linear(b), TimeBasis::Phase(q)) => {
                Some(JointSetting::new(a, b, p, q))
            }
            _ => None,
        }
    }
}

/// Outcome signs in `(pol_s, time_s, pol_i, time_i)` order.
pub type Outcomes = [i8; 4];

pub const ALL_PLUS: Outcomes = [1, 1, 1, 1];

/// The 16 outcome tuples; index bit `k` set means factor `k` (most
/// significant first) reads `-1`.
pub fn all_outcomes() -> [Outcomes; 16] {
    let mut out = [ALL_PLUS; 16];
    for (idx, o) in out.iter_mut().enumerate() {
        for (k, v) in o.iter_mut().enumerate() {
            if (idx >> (3 - k)) & 1 == 1 {
                *v = -1;
            }
        }
    }
    out
}

pub fn outcome_sign(o: Outcomes) -> f64 {
    o.iter().map(|&x| x as f64).product()
}

pub(crate) fn check_outcome(o: i8) -> Result<()> {
    if o == 1 || o == -1 {
        Ok(())
    } else {
        Err(invalid("outcome", format!("{o} is not +1 or -1")))
    }
}

/// Unprimed and primed settings of both parties and both DOFs.
///
/// Rows of a [`CorrelationTable`] run over the phase pairs
/// `(phi_s, phi_i), (phi_s, phi_i'), (phi_s', phi_i), (phi_s', phi_i')`;
/// columns over the polarization pairs in the same pattern.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettingQuad {
    pub alpha_s: [f64; 2],
    pub alpha_i: [f64; 2],
    pub phi_s: [f64; 2],
    pub phi_i: [f64; 2],
}

impl SettingQuad {
    pub const ALPHA_OFFSET: f64 = 45.0;
    pub const PHI_OFFSET: f64 = FRAC_PI_2;

    /// Primed settings at the standard offsets `+45 deg` and `+pi/2`.
    pub fn new(alpha_s: f64, alpha_i: f64, phi_s: f64, phi_i: f64) -> Self {
        Self {
            alpha_s: [alpha_s, alpha_s + Self::ALPHA_OFFSET],
            alpha_i: [alpha_i, alpha_i + Self::ALPHA_OFFSET],
            phi_s: [phi_s, phi_s + Self::PHI_OFFSET],
            phi_i: [phi_i, phi_i + Self::PHI_OFFSET],
        }
    }

    /// Alice fixed at `alpha_s = 0, 45 deg` and `phi_s = 0, pi/2`.
    pub fn with_bob(alpha_i: f64, phi_i: f64) -> Self {
        Self::new(0.0, alpha_i, 0.0, phi_i)
    }

    /// Explicit primed values, for non-standard offsets.
    pub fn with_overrides(alpha_s: [f64; 2], alpha_i: [f64; 2], phi_s: [f64; 2], phi_i: [f64; 2]) -> Self {
        Self {
            alpha_s,
            alpha_i,
            phi_s,
            phi_i,
        }
    }

    /// Row/column index -> (unprimed/primed for s, unprimed/primed for i).
    #[inline]
    pub fn pair(index: usize) -> (usize, usize) {
        (index / 2, index % 2)
    }

    pub fn setting(&self, row: usize, col: usize) -> JointSetting {
        let (ps, pi) = Self::pair(row);
        let (as_, ai) = Self::pair(col);
        JointSetting::new(self.alpha_s[as_], self.alpha_i[ai], self.phi_s[ps], self.phi_i[pi])
    }

    pub fn settings(&self) -> Vec<JointSetting> {
        (0..4)
            .flat_map(|r| (0..4).map(move |c| (r, c)))
            .map(|(r, c)| self.setting(r, c))
            .collect()
    }
}

/// 4x4 grid of correlators `E[row][col]`, rows over phase pairs and columns
/// over polarization pairs (see [`SettingQuad`]).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    values: [[f64; 4]; 4],
}

impl CorrelationTable {
    pub fn new(values: [[f64; 4]; 4]) -> Result<Self> {
        for row in &values {
            for &e in row {
                if !(e.is_finite() && e.abs() <= 1.0 + 1e-12) {
                    return Err(Error::InvalidParameter {
                        name: "correlation",
                        reason: format!("{e} is outside [-1, 1]"),
                    });
                }
            }
        }
        Ok(Self { values })
    }

    pub fn zeros() -> Self {
        Self { values: [[0.0; 4]; 4] }
    }

    pub fn values(&self) -> &[[f64; 4]; 4] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row][col]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut v = self.values;
        v.iter_mut().flatten().for_each(|e| *e *= factor);
        Self { values: v }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn normalization_ranges() {
        let s = JointSetting::new(-22.5, 202.5, -PI / 2.0, 5.0 * PI);
        assert!((s.alpha_s - 157.5).abs() < 1e-12);
        assert!((s.alpha_i - 22.5).abs() < 1e-12);
        assert!((s.phi_s - 1.5 * PI).abs() < 1e-12);
        assert!((s.phi_i - PI).abs() < 1e-12);
        assert_eq!(normalize_degrees(-1e-18), 0.0);
    }

    #[test]
    fn keys_wrap_periodically() {
        let a = JointSetting::new(0.0, 45.0, 0.0, PI);
        let b = JointSetting::new(180.0 - 1e-12, 45.0 + 1e-12, TAU - 1e-13, PI);
        assert_eq!(a.key(), b.key());
    }

    #[test]
    fn quad_layout_and_offsets() {
        let q = SettingQuad::with_bob(22.5, PI / 4.0);
        assert_eq!(q.alpha_i, [22.5, 67.5]);
        assert!((q.phi_i[1] - 3.0 * PI / 4.0).abs() < 1e-15);
        // row 2 = (phi_s', phi_i), column 1 = (alpha_s, alpha_i')
        let s = q.setting(2, 1);
        assert_eq!((s.alpha_s, s.alpha_i), (0.0, 67.5));
        assert!((s.phi_s - PI / 2.0).abs() < 1e-15 && (s.phi_i - PI / 4.0).abs() < 1e-15);
        assert_eq!(q.settings().len(), 16);
    }

    #[test]
    fn outcome_enumeration() {
        let all = all_outcomes();
        assert_eq!(all[0], ALL_PLUS);
        assert_eq!(all[15], [-1, -1, -1, -1]);
        assert_eq!(all[0b0100], [1, -1, 1, 1]);
        assert_eq!(all.iter().map(|&o| outcome_sign(o)).sum::<f64>(), 0.0);
    }

    #[test]
    fn table_rejects_out_of_range() {
        let mut v = [[0.0; 4]; 4];
        v[1][2] = 1.2;
        assert!(CorrelationTable::new(v).is_err());
    }
}
