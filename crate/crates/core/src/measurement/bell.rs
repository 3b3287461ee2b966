use serde::{Deserialize, Serialize};

use super::analyzer::Analyzer;
use super::settings::{CorrelationTable, SettingQuad};
use crate::error::invalid;
use crate::hilbert::DensityOperator;
use crate::Result;

/// Local-realistic bound of a single-DOF CHSH operator.
pub const CHSH_LOCAL_BOUND: f64 = 2.0;
/// Local-realistic bound of `beta = beta1 (x) beta2`.
pub const BETA_LOCAL_BOUND: f64 = 4.0;
/// Quantum maximum of `beta`.
pub const BETA_QUANTUM_BOUND: f64 = 8.0;

/// Default weighting for both CHSH factors: `(-, +, +, +)`.
pub const DEFAULT_SIGNS: [i8; 4] = [-1, 1, 1, 1];

/// True when exactly one sign differs from the other three.
pub fn is_chsh_pattern(signs: [i8; 4]) -> bool {
    let minus = signs.iter().filter(|&&s| s < 0).count();
    minus == 1 || minus == 3
}

/// Signed CHSH sum `sum_k s_k E_k`.
pub fn chsh(correlators: [f64; 4], signs: [i8; 4]) -> f64 {
    correlators.iter().zip(signs).map(|(e, s)| e * s as f64).sum()
}

/// `<beta> = sum_rc t_r u_c E_rc`.
pub fn generalized_beta(table: &CorrelationTable, row_signs: [i8; 4], col_signs: [i8; 4]) -> f64 {
    let mut acc = 0.0;
    for (r, &t) in row_signs.iter().enumerate() {
        for (c, &u) in col_signs.iter().enumerate() {
            acc += (t as f64) * (u as f64) * table.get(r, c);
        }
    }
    acc
}

/// Distance of `|beta|` above the local bound in units of `sigma`, floored
/// at zero.
pub fn violation_sigmas(beta: f64, sigma: f64) -> Result<f64> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(invalid("sigma", "must be positive"));
    }
    Ok(((beta.abs() - BETA_LOCAL_BOUND) / sigma).max(0.0))
}

/// The 16 correlators of a setting quad.
pub fn correlation_table(analyzer: &Analyzer, rho: &DensityOperator, quad: &SettingQuad) -> Result<CorrelationTable> {
    let mut v = [[0.0; 4]; 4];
    for (r, row) in v.iter_mut().enumerate() {
        for (c, e) in row.iter_mut().enumerate() {
            *e = analyzer.correlator(rho, &quad.setting(r, c))?;
        }
    }
    CorrelationTable::new(v)
}

/// Single-DOF correlators of a quad. `et[r][c]` and `pol[r][c]` use the
/// table layout; each is marginalized over the other DOF's outcomes.
pub struct MarginalTables {
    pub pol: [[f64; 4]; 4],
    pub et: [[f64; 4]; 4],
}

pub fn marginal_tables(analyzer: &Analyzer, rho: &DensityOperator, quad: &SettingQuad) -> Result<MarginalTables> {
    let mut pol = [[0.0; 4]; 4];
    let mut et = [[0.0; 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            let (p, e) = analyzer.marginal_correlators(rho, &quad.setting(r, c))?;
            pol[r][c] = p;
            et[r][c] = e;
        }
    }
    Ok(MarginalTables { pol, et })
}

/// Per-DOF CHSH values after averaging the single-DOF correlators over all
/// settings of the other DOF: `(beta1 energy-time, beta2 polarization)`.
pub fn averaged_marginal_betas(m: &MarginalTables, row_signs: [i8; 4], col_signs: [i8; 4]) -> (f64, f64) {
    let mut et = [0.0; 4];
    let mut pol = [0.0; 4];
    for k in 0..4 {
        et[k] = (0..4).map(|c| m.et[k][c]).sum::<f64>() / 4.0;
        pol[k] = (0..4).map(|r| m.pol[r][k]).sum::<f64>() / 4.0;
    }
    (chsh(et, row_signs), chsh(pol, col_signs))
}

/// `<beta>` over a grid of Bob's unprimed settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BetaScan {
    pub alpha_i: Vec<f64>,
    pub phi_i: Vec<f64>,
    /// `values[a][p]` at `(alpha_i[a], phi_i[p])`.
    pub values: Vec<Vec<f64>>,
    /// Grid indices of the largest `|beta|` (first in row-major order on ties).
    pub argmax: (usize, usize),
    /// Signed value at `argmax`.
    pub max: f64,
}

impl BetaScan {
    pub fn argmax_setting(&self) -> (f64, f64) {
        (self.alpha_i[self.argmax.0], self.phi_i[self.argmax.1])
    }
}

/// Weighting and Alice settings for [`beta_scan`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub alpha_s: [f64; 2],
    pub phi_s: [f64; 2],
    pub row_signs: [i8; 4],
    pub col_signs: [i8; 4],
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            alpha_s: [0.0, 45.0],
            phi_s: [0.0, std::f64::consts::FRAC_PI_2],
            row_signs: DEFAULT_SIGNS,
            col_signs: DEFAULT_SIGNS,
        }
    }
}

/// Evaluates `<beta>` with one fixed weighting at every `(alpha_i, phi_i)`
/// grid point; Bob's primed settings follow at `+45 deg` and `+pi/2`.
pub fn beta_scan(
    analyzer: &Analyzer,
    rho: &DensityOperator,
    alpha_grid: &[f64],
    phi_grid: &[f64],
    cfg: &ScanConfig,
) -> Result<BetaScan> {
    if alpha_grid.is_empty() || phi_grid.is_empty() {
        return Err(invalid("grid", "alpha and phi grids must be nonempty"));
    }
    if rho.dim() != crate::hilbert::HYPER_DIM {
        return Err(crate::Error::DimensionMismatch {
            expected: crate::hilbert::HYPER_DIM,
            got: rho.dim(),
        });
    }
    // Alice's four (phi, alpha) combinations, contracted once.
    let mut contracted = Vec::with_capacity(4);
    for ps in 0..2 {
        for as_ in 0..2 {
            contracted.push(analyzer.alice_contracted(rho, cfg.alpha_s[as_], cfg.phi_s[ps]));
        }
    }

    let mut values = vec![vec![0.0; phi_grid.len()]; alpha_grid.len()];
    let mut best = (0, 0);
    let mut best_abs = f64::NEG_INFINITY;
    for (a, &alpha) in alpha_grid.iter().enumerate() {
        let alphas_i = [alpha, alpha + SettingQuad::ALPHA_OFFSET];
        for (p, &phi) in phi_grid.iter().enumerate() {
            let phis_i = [phi, phi + SettingQuad::PHI_OFFSET];
            let mut beta = 0.0;
            for r in 0..4 {
                let (ps, pi) = SettingQuad::pair(r);
                for c in 0..4 {
                    let (as_, ai) = SettingQuad::pair(c);
                    let e = analyzer.bob_correlator(&contracted[2 * ps + as_], alphas_i[ai], phis_i[pi]);
                    beta += (cfg.row_signs[r] * cfg.col_signs[c]) as f64 * e;
                }
            }
            values[a][p] = beta;
            if beta.abs() > best_abs + 1e-12 {
                best_abs = beta.abs();
                best = (a, p);
            }
        }
    }
    Ok(BetaScan {
        alpha_i: alpha_grid.to_vec(),
        phi_i: phi_grid.to_vec(),
        max: values[best.0][best.1],
        argmax: best,
        values,
    })
}

/// Evenly spaced grid of `n` points starting at `start` with step `step`.
pub fn grid(start: f64, step: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| start + step * k as f64).collect()
}
