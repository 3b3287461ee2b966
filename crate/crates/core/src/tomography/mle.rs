use std::collections::VecDeque;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::dataset::{from_hermitian_coords, hermitian_coords, TomographyDataset};
use crate::error::invalid;
use crate::hilbert::{ComplexMatrix, DensityOperator, C64};
use crate::Result;

/// Probabilities below this are floored inside the logarithm.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MleOptions {
    /// Stop when the per-iteration likelihood gain, relative to
    /// `max(1, |log L|)`, stays below this for several iterations, or when
    /// the normalized fixed-point residual drops below it.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Accept effect sets that do not span the full operator space.
    pub allow_reduced_rank: bool,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 100_000,
            allow_reduced_rank: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MleResult {
    pub rho_hat: DensityOperator,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `|| rho (M - Tr(rho M)) ||_F / N` at the returned iterate.
    pub residual: f64,
    pub rank: usize,
    pub warning: Option<String>,
    pub fidelity_interval: Option<(f64, f64)>,
}

/// `sum_k n_k ln max(p_k, floor) - sum_k T_k p_k` with `p_k = Tr(rho E_k)`
/// and `T_k` the total counts of the setting group of entry `k`.
pub fn log_likelihood(rho: &DensityOperator, data: &TomographyDataset) -> Result<f64> {
    if rho.dim() != data.dim() {
        return Err(crate::Error::DimensionMismatch {
            expected: data.dim(),
            got: rho.dim(),
        });
    }
    let p = probabilities(rho.matrix(), data);
    Ok(likelihood_from(&p, data))
}

fn probabilities(rho: &ComplexMatrix, data: &TomographyDataset) -> DVector<f64> {
    let r = DVector::from_vec(hermitian_coords(rho));
    &data.set.design * r
}

fn likelihood_from(p: &DVector<f64>, data: &TomographyDataset) -> f64 {
    let mut ll = 0.0;
    for ((&pk, &n), &t) in p.iter().zip(data.counts()).zip(data.trials()) {
        if n > 0.0 {
            ll += n * pk.max(PROBABILITY_FLOOR).ln();
        }
        ll -= t * pk;
    }
    ll
}

struct Evaluation {
    ll: f64,
    /// Gradient with respect to `(Re G, Im G)`, interleaved row-major.
    grad: Vec<f64>,
    rho: ComplexMatrix,
    /// `M - Tr(rho M) I`.
    shifted: ComplexMatrix,
}

fn factor_from(x: &[f64], d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, d, |i, j| C64::new(x[2 * (i * d + j)], x[2 * (i * d + j) + 1]))
}

fn flatten(g: &ComplexMatrix) -> Vec<f64> {
    g.as_slice().iter().flat_map(|z| [z.re, z.im]).collect()
}

fn gram(g: &ComplexMatrix) -> ComplexMatrix {
    let t: f64 = g.as_slice().iter().map(|z| z.norm_sqr()).sum();
    g.dagger().matmul(g).expect("square").scale_real(1.0 / t)
}

fn evaluate(x: &[f64], data: &TomographyDataset) -> Evaluation {
    let d = data.dim();
    let g = factor_from(x, d);
    let t: f64 = g.as_slice().iter().map(|z| z.norm_sqr()).sum();
    let rho = gram(&g);
    let p = probabilities(&rho, data);
    let ll = likelihood_from(&p, data);
    let w = DVector::from_iterator(
        p.len(),
        p.iter().zip(data.counts()).zip(data.trials()).map(|((&pk, &n), &tk)| {
            let ratio = if n > 0.0 && pk >= PROBABILITY_FLOOR {
                n / pk
            } else {
                0.0
            };
            ratio - tk
        }),
    );
    let m = data.set.design.transpose() * w;
    let mut shifted = from_hermitian_coords(m.as_slice(), d);
    let c: f64 = hermitian_coords(&rho).iter().zip(m.iter()).map(|(a, b)| a * b).sum();
    for i in 0..d {
        shifted.as_mut_slice()[i * d + i] -= C64::new(c, 0.0);
    }
    let gamma = g.matmul(&shifted).expect("square").scale_real(2.0 / t);
    Evaluation {
        ll,
        grad: flatten(&gamma),
        rho,
        shifted,
    }
}

/// Gradient of the log-likelihood with respect to the real and imaginary
/// parts of the factor `G` in `rho = G^dag G / Tr(G^dag G)`. Returned as a
/// matrix whose real (imaginary) parts are the derivatives with respect to
/// the real (imaginary) parts of `G`.
pub fn likelihood_gradient(factor: &ComplexMatrix, data: &TomographyDataset) -> Result<(f64, ComplexMatrix)> {
    if factor.rows() != data.dim() || factor.cols() != data.dim() {
        return Err(crate::Error::DimensionMismatch {
            expected: data.dim(),
            got: factor.rows(),
        });
    }
    let e = evaluate(&flatten(factor), data);
    let d = data.dim();
    Ok((e.ll, factor_from(&e.grad, d)))
}

/// Log-likelihood as a function of the factor `G`.
pub fn factor_log_likelihood(factor: &ComplexMatrix, data: &TomographyDataset) -> Result<f64> {
    log_likelihood(&DensityOperator::from_factor(factor)?, data)
}

fn residual(e: &Evaluation, total: f64) -> f64 {
    let prod = e.rho.matmul(&e.shifted).expect("square");
    let fro: f64 = prod.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    fro / total.max(1.0)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Warm start: linear inversion with eigenvalues clipped from below and the
/// result renormalized, factored as `G = sqrt(Lambda) U^dag`.
fn warm_start(data: &TomographyDataset) -> Result<ComplexMatrix> {
    let d = data.dim();
    let lin = data.linear_inversion();
    let sym = (&lin + &lin.dagger()).scale_real(0.5);
    let (vals, vecs) = sym.hermitian_eigen()?;
    let clipped: Vec<f64> = vals.iter().map(|&l| l.max(1e-9)).collect();
    let sum: f64 = clipped.iter().sum();
    Ok(ComplexMatrix::from_fn(d, d, |k, j| {
        vecs[(j, k)].conj() * (clipped[k] / sum).sqrt()
    }))
}

const MEMORY: usize = 12;
const STALL_ITERATIONS: usize = 5;

/// Maximum-likelihood density operator over the positive cone.
///
/// The estimate is parameterized as `rho = G^dag G / Tr(G^dag G)`, so every
/// iterate is a valid state. `G` is improved by limited-memory quasi-Newton
/// ascent with backtracking. When no quasi-Newton step increases the
/// likelihood a diluted fixed-point step `G -> G (I + eps (M - Tr(rho M)))`
/// is tried. Only strictly improving steps are accepted.
pub fn mle_reconstruct(data: &TomographyDataset, opts: &MleOptions) -> Result<MleResult> {
    if !(opts.tolerance.is_finite() && opts.tolerance > 0.0) {
        return Err(invalid("tolerance", "must be positive"));
    }
    let rank = data.rank();
    let d2 = data.dim() * data.dim();
    let mut warning = None;
    if rank < d2 {
        if !opts.allow_reduced_rank {
            return Err(invalid(
                "dataset",
                format!("effects span {rank} of {d2} operator dimensions; reduced-rank reconstruction not enabled"),
            ));
        }
        warning = Some(format!(
            "effects span {rank} of {d2} operator dimensions; the estimate is not unique"
        ));
    }
    let total = data.total_counts();
    let d = data.dim();

    let mut x = flatten(&warm_start(data)?);
    let mut cur = evaluate(&x, data);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    let mut stalled = 0;
    let mut converged = false;

    while iterations < opts.max_iterations {
        let res = residual(&cur, total);
        if res < opts.tolerance || !cur.ll.is_finite() {
            converged = res < opts.tolerance;
            break;
        }
        iterations += 1;

        // two-loop recursion on the ascent problem
        let mut q = cur.grad.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho_k) in history.iter().rev() {
            let a = rho_k * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        let gamma = history.back().map_or_else(
            || 1.0 / dot(&cur.grad, &cur.grad).sqrt().max(1e-300),
            |(s, y, _)| dot(s, y) / dot(y, y),
        );
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
        for ((s, y, rho_k), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho_k * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        // q approximates the Newton direction for the maximization
        let mut dir = q;
        let mut slope = dot(&dir, &cur.grad);
        if slope.is_nan() || slope <= 0.0 {
            history.clear();
            dir = cur.grad.clone();
            let n = dot(&dir, &dir).sqrt().max(1e-300);
            for v in dir.iter_mut() {
                *v /= n;
            }
            slope = dot(&dir, &cur.grad);
        }

        let mut step = 1.0;
        let mut next = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            let e = evaluate(&trial, data);
            if e.ll.is_finite() && e.ll > cur.ll && e.ll >= cur.ll + 1e-4 * step * slope.min(e.ll - cur.ll) {
                next = Some((trial, e));
                break;
            }
            step *= 0.5;
        }
        let (nx, ne) = match next {
            Some(n) => n,
            None => match diluted_step(&x, &cur, data, total) {
                Some(n) => {
                    history.clear();
                    n
                }
                None => {
                    // no improving step at working precision
                    converged = residual(&cur, total) < opts.tolerance.sqrt();
                    break;
                }
            },
        };

        let gain = ne.ll - cur.ll;
        let s: Vec<f64> = nx.iter().zip(&x).map(|(a, b)| a - b).collect();
        // ascent: y is the decrease of the gradient
        let y: Vec<f64> = cur.grad.iter().zip(&ne.grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-16 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            history.push_back((s, y, 1.0 / sy));
            if history.len() > MEMORY {
                history.pop_front();
            }
        }
        // rescale G to unit norm; the likelihood is scale invariant
        let norm = dot(&nx, &nx).sqrt();
        x = nx.iter().map(|v| v / norm).collect();
        cur = ne;
        if norm != 1.0 {
            cur.grad.iter_mut().for_each(|g| *g *= norm);
            for (s, y, _) in history.iter_mut() {
                s.iter_mut().for_each(|v| *v /= norm);
                y.iter_mut().for_each(|v| *v *= norm);
            }
        }

        if gain <= opts.tolerance * cur.ll.abs().max(1.0) {
            stalled += 1;
            if stalled >= STALL_ITERATIONS {
                converged = true;
                break;
            }
        } else {
            stalled = 0;
        }
    }

    let rho_hat = DensityOperator::from_factor(&factor_from(&x, d))?;
    let log_likelihood = log_likelihood(&rho_hat, data)?;
    Ok(MleResult {
        residual: residual(&cur, total),
        rho_hat,
        log_likelihood,
        iterations,
        converged,
        rank,
        warning,
        fidelity_interval: None,
    })
}

fn diluted_step(x: &[f64], cur: &Evaluation, data: &TomographyDataset, total: f64) -> Option<(Vec<f64>, Evaluation)> {
    let d = data.dim();
    let g = factor_from(x, d);
    let mut eps = 1.0;
    for _ in 0..50 {
        let r = &ComplexMatrix::identity(d) + &cur.shifted.scale_real(eps / total.max(1.0));
        let ng = g.matmul(&r).ok()?;
        let nx = flatten(&ng);
        let e = evaluate(&nx, data);
        if e.ll.is_finite() && e.ll > cur.ll {
            return Some((nx, e));
        }
        eps *= 0.5;
    }
    None
}
