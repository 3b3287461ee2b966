use nalgebra::{Matrix5, Vector5};
use serde::{Deserialize, Serialize};

use super::counts::{record_counts, CountRecord, DarkCorrection, Probe, RunPlan};
use crate::measurement::{normalize_degrees, normalize_phase, JointSetting};
use crate::{Error, Result};

/// One sample of a coincidence surface over Bob's settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringePoint {
    /// Degrees.
    pub alpha_i: f64,
    /// Radians.
    pub phi_i: f64,
    pub counts: f64,
}

/// Separable fringe `A [1 + V_pol cos 2(alpha - a0)] [1 + V_et cos(phi - p0)]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub amplitude: f64,
    pub visibility_pol: f64,
    pub visibility_et: f64,
    /// Degrees in `[0, 180)`.
    pub alpha_offset: f64,
    /// Radians in `[0, 2 pi)`.
    pub phi_offset: f64,
    /// Sum of squared residuals.
    pub residual: f64,
    pub iterations: usize,
}

impl FringeFit {
    pub fn model(&self, alpha_i: f64, phi_i: f64) -> f64 {
        model(
            &[
                self.amplitude,
                self.visibility_pol,
                self.alpha_offset.to_radians(),
                self.visibility_et,
                self.phi_offset,
            ],
            alpha_i.to_radians(),
            phi_i,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Relative change of the residual below which the fit has converged.
    pub tolerance: f64,
    pub weighting: FitWeighting,
}

/// Residual weighting of the least-squares fit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FitWeighting {
    /// Plain least squares.
    #[default]
    Uniform,
    /// Inverse-variance weights `1 / (model + background)`, refined over two
    /// reweighting passes after an unweighted start. `background` is the
    /// extra per-point variance, e.g. the expected dark counts.
    Poisson { background: f64 },
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-12,
            weighting: FitWeighting::Uniform,
        }
    }
}

type Params = [f64; 5];

fn model(p: &Params, a: f64, f: f64) -> f64 {
    p[0] * (1.0 + p[1] * (2.0 * (a - p[2])).cos()) * (1.0 + p[3] * (f - p[4]).cos())
}

fn gradient(p: &Params, a: f64, f: f64) -> [f64; 5] {
    let ca = (2.0 * (a - p[2])).cos();
    let sa = (2.0 * (a - p[2])).sin();
    let cf = (f - p[4]).cos();
    let sf = (f - p[4]).sin();
    let pa = 1.0 + p[1] * ca;
    let pf = 1.0 + p[3] * cf;
    [
        pa * pf,
        p[0] * ca * pf,
        p[0] * p[1] * 2.0 * sa * pf,
        p[0] * pa * cf,
        p[0] * pa * p[3] * sf,
    ]
}

/// Builds a plan of all-plus probes over Bob's `(alpha_i, phi_i)` grid with
/// Alice fixed. Probe order is alpha-major.
#[allow(clippy::too_many_arguments)]
pub fn fringe_plan(
    alpha_s: f64,
    phi_s: f64,
    alpha_grid: &[f64],
    phi_grid: &[f64],
    integration_time: f64,
    seed: u64,
    pair_rate: f64,
    dark_rate: f64,
) -> RunPlan {
    let probes = alpha_grid
        .iter()
        .flat_map(|&a| {
            phi_grid
                .iter()
                .map(move |&p| Probe::plus(JointSetting::new(alpha_s, a, phi_s, p)))
        })
        .collect();
    RunPlan::new(probes, integration_time, seed, pair_rate, dark_rate)
}

/// Fringe samples from all-plus records of plain polarizer/interferometer
/// settings. Bob's angles are taken unnormalized from the record.
pub fn fringe_points(records: &[CountRecord], correction: DarkCorrection) -> Vec<FringePoint> {
    records
        .iter()
        .filter_map(|r| {
            let s = r.joint_setting()?;
            Some(FringePoint {
                alpha_i: s.alpha_i,
                phi_i: s.phi_i,
                counts: record_counts(r, correction),
            })
        })
        .collect()
}

fn distinct_mod(values: impl Iterator<Item = f64>, period: f64) -> Vec<f64> {
    let mut v: Vec<f64> = values.map(|x| x.rem_euclid(period)).collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * period);
    if v.len() > 1 && (v[0] + period - v[v.len() - 1]) < 1e-9 * period {
        v.pop();
    }
    v
}

/// Largest circular gap between sampled positions on one period.
fn max_gap(v: &[f64], period: f64) -> f64 {
    let mut gap = v[0] + period - v[v.len() - 1];
    for w in v.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    gap
}

fn check_axis(values: impl Iterator<Item = f64>, period: f64, name: &str) -> Result<()> {
    let v = distinct_mod(values, period);
    if v.len() < 5 {
        return Err(Error::DegenerateGrid(format!(
            "{name} axis has {} distinct values per period, need at least 5",
            v.len()
        )));
    }
    // A half-period hole leaves the phase and visibility poorly determined.
    if max_gap(&v, period) >= 0.5 * period {
        return Err(Error::DegenerateGrid(format!(
            "{name} axis does not cover a full period"
        )));
    }
    Ok(())
}

/// Projection of axis marginals onto `[1, cos, sin]` at the known
/// frequency: returns `(mean, visibility, phase)`.
fn harmonic_guess(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut atb = nalgebra::Vector3::<f64>::zeros();
    for (&xi, &yi) in x.iter().zip(y) {
        let row = nalgebra::Vector3::new(1.0, xi.cos(), xi.sin());
        ata += row * row.transpose();
        atb += row * yi;
    }
    let c = ata
        .lu()
        .solve(&atb)
        .unwrap_or_else(|| nalgebra::Vector3::new(y.iter().sum::<f64>() / y.len() as f64, 0.0, 0.0));
    let amp = c[1].hypot(c[2]);
    let vis = if c[0].abs() > 0.0 { (amp / c[0]).min(1.0) } else { 0.0 };
    (c[0], vis, c[2].atan2(c[1]))
}

fn ssr(p: &Params, pts: &[(f64, f64, f64)], w: &[f64]) -> f64 {
    pts.iter()
        .zip(w)
        .map(|(&(a, f, y), w)| w * (y - model(p, a, f)).powi(2))
        .sum()
}

fn levenberg_marquardt(
    pts: &[(f64, f64, f64)],
    w: &[f64],
    mut p: Params,
    opts: &FitOptions,
) -> Result<(Params, usize)> {
    let mut cost = ssr(&p, pts, w);
    let floor = 1e-28 * pts.iter().zip(w).map(|(q, w)| w * q.2 * q.2).sum::<f64>();
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = cost <= floor;
    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        let mut jtj = Matrix5::<f64>::zeros();
        let mut jtr = Vector5::<f64>::zeros();
        for (&(a, f, yv), &wk) in pts.iter().zip(w) {
            let g = Vector5::from(gradient(&p, a, f));
            jtj += wk * g * g.transpose();
            jtr += wk * g * (yv - model(&p, a, f));
        }
        let diag_floor = 1e-12 * jtj.diagonal().max();
        let mut accepted = false;
        while lambda < 1e16 {
            let mut damped = jtj;
            for k in 0..5 {
                damped[(k, k)] += lambda * jtj[(k, k)].max(diag_floor);
            }
            let Some(step) = damped.cholesky().map(|c| c.solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Params = std::array::from_fn(|k| p[k] + step[k]);
            let trial_cost = ssr(&trial, pts, w);
            if trial_cost.is_finite() && trial_cost <= cost {
                let rel = (cost - trial_cost) / cost.max(floor);
                let small_step = step
                    .iter()
                    .zip(&trial)
                    .all(|(s, t)| s.abs() <= 1e-12 * (t.abs() + 1e-12));
                p = trial;
                cost = trial_cost;
                lambda = (lambda * 0.3).max(1e-12);
                accepted = true;
                converged = rel < opts.tolerance || small_step || cost <= floor;
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no descent direction left: at a minimum to machine precision
            converged = true;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            what: "fringe fit".into(),
            iterations,
        });
    }
    Ok((p, iterations))
}

/// Least-squares fit of the separable fringe model to a surface.
///
/// Starts from per-axis harmonic projections of the marginals and refines
/// with Levenberg-Marquardt damped Gauss-Newton steps.
pub fn fit_fringes(points: &[FringePoint], opts: &FitOptions) -> Result<FringeFit> {
    if points.len() < 25 {
        return Err(Error::DegenerateGrid(format!(
            "{} points, need at least 25",
            points.len()
        )));
    }
    if points
        .iter()
        .any(|p| !(p.counts.is_finite() && p.alpha_i.is_finite() && p.phi_i.is_finite()))
    {
        return Err(Error::DegenerateGrid("non-finite sample".into()));
    }
    check_axis(points.iter().map(|p| p.alpha_i), 180.0, "alpha")?;
    check_axis(points.iter().map(|p| p.phi_i), std::f64::consts::TAU, "phi")?;

    let pts: Vec<(f64, f64, f64)> = points
        .iter()
        .map(|p| (p.alpha_i.to_radians(), p.phi_i, p.counts))
        .collect();
    let scale = pts.iter().map(|p| p.2.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(FringeFit {
            amplitude: 0.0,
            visibility_pol: 0.0,
            visibility_et: 0.0,
            alpha_offset: 0.0,
            phi_offset: 0.0,
            residual: 0.0,
            iterations: 0,
        });
    }

    let xa: Vec<f64> = pts.iter().map(|p| 2.0 * p.0).collect();
    let xf: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.2).collect();
    let (mean_a, va, pa) = harmonic_guess(&xa, &y);
    let (_, vf, pf) = harmonic_guess(&xf, &y);
    let p: Params = [mean_a, va, 0.5 * pa, vf, pf];

    let unit = vec![1.0; pts.len()];
    let (mut p, mut iterations) = levenberg_marquardt(&pts, &unit, p, opts)?;
    if let FitWeighting::Poisson { background } = opts.weighting {
        // two reweighting passes with variances from the current model
        for _ in 0..2 {
            let w: Vec<f64> = pts
                .iter()
                .map(|&(a, f, _)| 1.0 / (model(&p, a, f).max(0.0) + background.max(0.0) + 1.0))
                .collect();
            let (q, it) = levenberg_marquardt(&pts, &w, p, opts)?;
            p = q;
            iterations += it;
        }
    }
    let cost = ssr(&p, &pts, &unit);

    let (mut vp, mut a0) = (p[1], p[2].to_degrees());
    if vp < 0.0 {
        vp = -vp;
        a0 += 90.0;
    }
    let (mut ve, mut p0) = (p[3], p[4]);
    if ve < 0.0 {
        ve = -ve;
        p0 += std::f64::consts::PI;
    }
    Ok(FringeFit {
        amplitude: p[0],
        visibility_pol: vp.min(1.0),
        visibility_et: ve.min(1.0),
        alpha_offset: normalize_degrees(a0),
        phi_offset: normalize_phase(p0),
        residual: cost,
        iterations,
    })
}
