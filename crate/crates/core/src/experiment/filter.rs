use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::counts::{record_counts, CountRecord, DarkCorrection};
use crate::measurement::{
    all_outcomes, outcome_sign, CorrelationTable, JointSetting, SettingKey, SettingQuad, ALL_PLUS,
};
use crate::{Error, Result};

/// Correlator reconstructed from all-plus counts at the 16 shifted settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorEstimate {
    pub setting: JointSetting,
    /// Estimated counts of the 16 outcome tuples, [`all_outcomes`] order.
    pub counts: [f64; 16],
    pub total: f64,
    pub value: f64,
    pub sigma: f64,
}

/// The settings whose all-plus counts are needed to expand `targets`.
pub fn filter_settings(targets: &[JointSetting]) -> Vec<JointSetting> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for t in targets {
        for o in all_outcomes() {
            let s = t.shifted_for(o);
            if seen.insert(s.key()) {
                out.push(s);
            }
        }
    }
    out
}

/// Settings needed for the full 4x4 table of a quad.
pub fn quad_filter_settings(quad: &SettingQuad) -> Vec<JointSetting> {
    filter_settings(&quad.settings())
}

/// Expands one-outcome (all-plus) counts into per-setting correlators.
///
/// A `-1` outcome of a polarizer at `alpha` is the `+1` outcome at
/// `alpha + 90 deg`, and a `-1` interferometer outcome at `phi` is the `+1`
/// outcome at `phi + pi`, so the 16 outcome counts of a target setting are
/// read off the all-plus counts at the 16 shifted settings. The pair flux is
/// assumed constant across settings; each target is normalized by its own
/// 16-count total, which absorbs the differing integration windows.
///
/// `sigma` propagates independent Poisson errors:
/// `sigma^2 = sum_k (s_k - E)^2 N_k / N^2`.
pub fn expand_filter_counts(
    records: &[CountRecord],
    targets: &[JointSetting],
    correction: DarkCorrection,
) -> Result<Vec<CorrelatorEstimate>> {
    let mut counts: HashMap<SettingKey, f64> = HashMap::new();
    for r in records.iter().filter(|r| r.outcomes == ALL_PLUS) {
        if let Some(s) = r.joint_setting() {
            *counts.entry(s.key()).or_insert(0.0) += record_counts(r, correction);
        }
    }
    targets
        .iter()
        .map(|t| {
            let mut n = [0.0; 16];
            for (slot, o) in n.iter_mut().zip(all_outcomes()) {
                let s = t.shifted_for(o);
                *slot = *counts.get(&s.key()).ok_or_else(|| {
                    Error::MissingSetting(format!(
                        "alpha_s={} alpha_i={} phi_s={} phi_i={}",
                        s.alpha_s, s.alpha_i, s.phi_s, s.phi_i
                    ))
                })?;
            }
            Ok(estimate(*t, n))
        })
        .collect()
}

fn estimate(setting: JointSetting, counts: [f64; 16]) -> CorrelatorEstimate {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return CorrelatorEstimate {
            setting,
            counts,
            total,
            value: 0.0,
            sigma: 1.0,
        };
    }
    let signs = all_outcomes().map(outcome_sign);
    let value = signs.iter().zip(&counts).map(|(s, n)| s * n).sum::<f64>() / total;
    let var = signs
        .iter()
        .zip(&counts)
        .map(|(s, n)| (s - value).powi(2) * n)
        .sum::<f64>()
        / (total * total);
    CorrelatorEstimate {
        setting,
        counts,
        total,
        value,
        sigma: var.sqrt(),
    }
}

/// Correlation table and per-entry uncertainties for a quad.
pub fn filter_table(
    records: &[CountRecord],
    quad: &SettingQuad,
    correction: DarkCorrection,
) -> Result<(CorrelationTable, [[f64; 4]; 4])> {
    let est = expand_filter_counts(records, &quad.settings(), correction)?;
    let mut values = [[0.0; 4]; 4];
    let mut sigmas = [[0.0; 4]; 4];
    for (k, e) in est.iter().enumerate() {
        values[k / 4][k % 4] = e.value.clamp(-1.0, 1.0);
        sigmas[k / 4][k % 4] = e.sigma;
    }
    Ok((CorrelationTable::new(values)?, sigmas))
}
