use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::TomographyDataset;
use super::mle::{mle_reconstruct, MleOptions};
use crate::error::invalid;
use crate::hilbert::{fidelity, StateVector};
use crate::Result;

pub const MIN_RESAMPLES: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapInterval {
    /// 2.5th percentile.
    pub low: f64,
    /// 97.5th percentile.
    pub high: f64,
    /// Fidelities of the successful resamples, in resample order.
    pub fidelities: Vec<f64>,
    /// Resamples whose fit errored or did not converge.
    pub failed: usize,
}

impl BootstrapInterval {
    pub fn width(&self) -> f64 {
        self.high - self.low
    }
}

/// Linear-interpolated percentile of sorted data, `q` in `[0, 1]`.
pub(crate) fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Percentile bootstrap of the fidelity with `target`: each resample redraws
/// every count from a Poisson law around the observed value and is refit.
/// Resample `k` uses stream `k` of a ChaCha8 generator keyed by `seed`.
pub fn bootstrap_fidelity(
    data: &TomographyDataset,
    target: &StateVector,
    resamples: usize,
    seed: u64,
    opts: &MleOptions,
) -> Result<BootstrapInterval> {
    if resamples < MIN_RESAMPLES {
        return Err(invalid("resamples", format!("need at least {MIN_RESAMPLES}")));
    }
    if target.dim() != data.dim() {
        return Err(crate::Error::DimensionMismatch {
            expected: data.dim(),
            got: target.dim(),
        });
    }
    // shared between workers
    let _ = data.rank();
    let outcomes: Vec<Option<f64>> = (0..resamples)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let sample = data.resample(&mut rng);
            match mle_reconstruct(&sample, opts) {
                Ok(r) if r.converged => fidelity(&r.rho_hat, target).ok(),
                _ => None,
            }
        })
        .collect();
    let fidelities: Vec<f64> = outcomes.iter().flatten().copied().collect();
    let failed = resamples - fidelities.len();
    if fidelities.is_empty() {
        return Err(crate::Error::NonConvergence {
            what: "every bootstrap resample failed".into(),
            iterations: 0,
        });
    }
    let mut sorted = fidelities.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(BootstrapInterval {
        low: percentile(&sorted, 0.025),
        high: percentile(&sorted, 0.975),
        fidelities,
        failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{apply_noise, make_hyper_state, NoiseModel};
    use crate::measurement::Analyzer;
    use crate::tomography::dataset::complete_settings;

    #[test]
    fn percentile_interpolates() {
        let v: Vec<f64> = (0..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.025), 2.5);
        assert_eq!(percentile(&v, 0.975), 97.5);
        assert_eq!(percentile(&[3.0], 0.5), 3.0);
    }

    #[test]
    fn rejects_too_few_resamples() {
        let psi = make_hyper_state(0.0);
        let data =
            TomographyDataset::from_probabilities(&Analyzer::default(), &psi.to_density(), &complete_settings(), 10.0)
                .unwrap();
        assert!(bootstrap_fidelity(&data, &psi, 10, 0, &MleOptions::default()).is_err());
    }

    #[test]
    fn huge_counts_collapse_and_seed_reproduces() {
        let psi = make_hyper_state(0.0);
        let rho = apply_noise(&psi, &NoiseModel::with_visibilities(0.95, 0.95)).unwrap();
        let data =
            TomographyDataset::from_probabilities(&Analyzer::default(), &rho, &complete_settings(), 1e9).unwrap();
        let a = bootstrap_fidelity(&data, &psi, 100, 42, &MleOptions::default()).unwrap();
        assert!(a.width() < 1e-3, "{}", a.width());
        let expected = fidelity(&rho, &psi).unwrap();
        assert!((a.low - expected).abs() < 1e-3);
        let b = bootstrap_fidelity(&data, &psi, 100, 42, &MleOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}
