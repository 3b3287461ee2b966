use serde::{Deserialize, Serialize};

use super::state::{basis_digits, DensityOperator, StateVector, HYPER_DIM};
use super::{ComplexMatrix, C64};
use crate::error::invalid;
use crate::{Error, Result};

/// Noise acting on the ideal hyperentangled state.
///
/// Applied in this order by [`apply_noise`]:
///
/// 1. pump imbalance `epsilon`: the `|HH>` and `|VV>` branches are reweighted
///    to probabilities `1/2 +- epsilon` (coherence `sqrt(1 - 4 epsilon^2)/2`);
/// 2. Gaussian jitter of the interferometer phase sum with standard deviation
///    `phase_jitter_sigma`, which multiplies the `EE <-> LL` coherence by
///    `exp(-sigma^2 / 2)`;
/// 3. per-DOF visibilities `v_et` and `v_pol`: isotropic (depolarizing) mixing
///    of the time-bin and polarization pairs, which scales every correlator
///    of that DOF by the visibility;
/// 4. white noise `(1 - w) rho + w I/16`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    /// Radians.
    pub phase_jitter_sigma: f64,
    pub pump_imbalance: f64,
    pub white_noise_weight: f64,
    pub v_pol: f64,
    pub v_et: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::NOISELESS
    }
}

impl NoiseModel {
    pub const NOISELESS: NoiseModel = NoiseModel {
        phase_jitter_sigma: 0.0,
        pump_imbalance: 0.0,
        white_noise_weight: 0.0,
        v_pol: 1.0,
        v_et: 1.0,
    };

    /// Pure per-DOF visibility reduction.
    pub fn with_visibilities(v_pol: f64, v_et: f64) -> Self {
        Self {
            v_pol,
            v_et,
            ..Self::NOISELESS
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.phase_jitter_sigma.is_finite() && self.phase_jitter_sigma >= 0.0) {
            return Err(invalid("phase_jitter_sigma", "must be finite and >= 0"));
        }
        if !(-0.5..=0.5).contains(&self.pump_imbalance) {
            return Err(invalid("pump_imbalance", "must lie in [-0.5, 0.5]"));
        }
        for (name, v) in [
            ("white_noise_weight", self.white_noise_weight),
            ("v_pol", self.v_pol),
            ("v_et", self.v_et),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(name, format!("{v} is outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// `exp(-sigma^2/2)`: the mean of `exp(i delta)` for Gaussian `delta`.
    pub fn dephasing_factor(&self) -> f64 {
        (-0.5 * self.phase_jitter_sigma * self.phase_jitter_sigma).exp()
    }

    /// Polarization coherence left by the pump imbalance, `sqrt(1 - 4 eps^2)`.
    pub fn imbalance_factor(&self) -> f64 {
        (1.0 - 4.0 * self.pump_imbalance * self.pump_imbalance).max(0.0).sqrt()
    }

    /// Fringe visibility of the energy-time DOF predicted by the model.
    pub fn energy_time_visibility(&self) -> f64 {
        self.dephasing_factor() * self.v_et * (1.0 - self.white_noise_weight)
    }

    /// Diagonal-basis fringe visibility of the polarization DOF.
    pub fn polarization_visibility(&self) -> f64 {
        self.imbalance_factor() * self.v_pol * (1.0 - self.white_noise_weight)
    }
}

/// Coherence factor of a phase jitter uniform on `[-half_width, half_width]`,
/// `sin(a)/a`. Kept for comparison against the Gaussian model.
pub fn uniform_jitter_factor(half_width: f64) -> f64 {
    if half_width == 0.0 {
        1.0
    } else {
        half_width.sin() / half_width
    }
}

/// Applies `model` to a 16-dimensional pure state.
pub fn apply_noise(state: &StateVector, model: &NoiseModel) -> Result<DensityOperator> {
    model.validate()?;
    if state.dim() != HYPER_DIM {
        return Err(Error::DimensionMismatch {
            expected: HYPER_DIM,
            got: state.dim(),
        });
    }

    // pump imbalance filter on the co-polarized branches
    let eps = model.pump_imbalance;
    let filtered: Vec<C64> = state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(idx, &a)| {
            let [ps, _, pi, _] = basis_digits(idx);
            match (ps, pi) {
                (0, 0) => a * (1.0 + 2.0 * eps).sqrt(),
                (1, 1) => a * (1.0 - 2.0 * eps).sqrt(),
                _ => a,
            }
        })
        .collect();
    let mut rho = StateVector::new(filtered)
        .map_err(|_| invalid("pump_imbalance", "filters the state to zero"))?
        .projector();

    if model.phase_jitter_sigma > 0.0 {
        let s2 = model.phase_jitter_sigma * model.phase_jitter_sigma;
        for r in 0..HYPER_DIM {
            let [_, tsr, _, tir] = basis_digits(r);
            for c in 0..HYPER_DIM {
                let [_, tsc, _, tic] = basis_digits(c);
                let dk = (tsr + tir) as f64 - (tsc + tic) as f64;
                if dk != 0.0 {
                    rho[(r, c)] *= (-s2 * dk * dk / 8.0).exp();
                }
            }
        }
    }

    if model.v_et < 1.0 {
        rho = depolarize_pair(&rho, Dof::Time, model.v_et);
    }
    if model.v_pol < 1.0 {
        rho = depolarize_pair(&rho, Dof::Polarization, model.v_pol);
    }
    if model.white_noise_weight > 0.0 {
        let w = model.white_noise_weight;
        rho = &rho.scale_real(1.0 - w) + &ComplexMatrix::identity(HYPER_DIM).scale_real(w / HYPER_DIM as f64);
    }
    Ok(DensityOperator::from_trusted(rho))
}

#[derive(Clone, Copy, Debug)]
enum Dof {
    Polarization,
    Time,
}

/// `v rho + (1 - v) Tr_dof(rho) (x) I_dof / 4` in the interleaved basis.
fn depolarize_pair(rho: &ComplexMatrix, dof: Dof, v: f64) -> ComplexMatrix {
    // split an index into (dof part, rest part), each a 2-bit number
    let split = |idx: usize| {
        let [ps, ts, pi, ti] = basis_digits(idx);
        match dof {
            Dof::Polarization => (2 * ps + pi, 2 * ts + ti),
            Dof::Time => (2 * ts + ti, 2 * ps + pi),
        }
    };
    let mut rest = [[C64::new(0.0, 0.0); 4]; 4];
    for r in 0..HYPER_DIM {
        let (dr, rr) = split(r);
        for c in 0..HYPER_DIM {
            let (dc, rc) = split(c);
            if dr == dc {
                rest[rr][rc] += rho[(r, c)];
            }
        }
    }
    ComplexMatrix::from_fn(HYPER_DIM, HYPER_DIM, |r, c| {
        let (dr, rr) = split(r);
        let (dc, rc) = split(c);
        let mixed = if dr == dc {
            rest[rr][rc] * 0.25
        } else {
            C64::new(0.0, 0.0)
        };
        rho[(r, c)] * v + mixed * (1.0 - v)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::state::{eigen_floor_check, fidelity, make_hyper_state, random_pure_state, HERMITIAN_TOL};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::PI;

    /// Composite Simpson integration of `cos(delta)` against the Gaussian
    /// density over +-12 sigma.
    fn gaussian_cos_quadrature(sigma: f64) -> f64 {
        let n = 20_000;
        let (a, b) = (-12.0 * sigma, 12.0 * sigma);
        let h = (b - a) / n as f64;
        let f = |x: f64| (-(x * x) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt()) * x.cos();
        let mut acc = f(a) + f(b);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + k as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn dephasing_factor_matches_quadrature() {
        let sigma = 2.0 * PI / 40.0;
        let model = NoiseModel {
            phase_jitter_sigma: sigma,
            ..NoiseModel::NOISELESS
        };
        let quad = gaussian_cos_quadrature(sigma);
        assert!((model.dephasing_factor() - quad).abs() < 1e-10);
        // frozen from the quadrature oracle
        assert!((quad - 0.987_738).abs() < 1e-6);
        // the uniform alternative only gives ~0.4 %
        assert!((1.0 - uniform_jitter_factor(sigma) - 0.0041).abs() < 1e-4);
    }

    #[test]
    fn dephasing_factor_matches_monte_carlo() {
        let sigma = 2.0 * PI / 40.0;
        let normal = Normal::new(0.0, sigma).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 1_000_000;
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..n {
            let c = normal.sample(&mut rng).cos();
            sum += c;
            sum2 += c * c;
        }
        let mean = sum / n as f64;
        let se = ((sum2 / n as f64 - mean * mean) / n as f64).sqrt();
        let exact = (-sigma * sigma / 2.0).exp();
        assert!((mean - exact).abs() < 3.0 * se, "mean {mean}, exact {exact}, se {se}");
    }

    #[test]
    fn jitter_multiplies_the_ee_ll_coherence() {
        let sigma = 2.0 * PI / 40.0;
        let psi = make_hyper_state(0.0);
        let rho = apply_noise(
            &psi,
            &NoiseModel {
                phase_jitter_sigma: sigma,
                ..NoiseModel::NOISELESS
            },
        )
        .unwrap();
        let ee = crate::hilbert::state::basis_index(0, 0, 0, 0);
        let ll = crate::hilbert::state::basis_index(0, 1, 0, 1);
        let factor = rho.matrix()[(ee, ll)].re / 0.25;
        assert!((factor - (-sigma * sigma / 2.0).exp()).abs() < 1e-15);
        assert!((1.0 - factor - 0.0123).abs() < 1e-4);
    }

    #[test]
    fn noiseless_model_is_exact_projector() {
        let psi = make_hyper_state(0.4);
        let rho = apply_noise(&psi, &NoiseModel::NOISELESS).unwrap();
        assert!(rho.matrix().max_abs_diff(&psi.projector()) < 1e-14);
    }

    #[test]
    fn full_white_noise_is_maximally_mixed() {
        let model = NoiseModel {
            white_noise_weight: 1.0,
            ..NoiseModel::NOISELESS
        };
        let rho = apply_noise(&make_hyper_state(0.0), &model).unwrap();
        assert!(rho.matrix().max_abs_diff(DensityOperator::maximally_mixed(16).matrix()) < 1e-15);
    }

    #[test]
    fn imbalance_reweights_populations() {
        let eps = 0.01;
        let model = NoiseModel {
            pump_imbalance: eps,
            ..NoiseModel::NOISELESS
        };
        let pol = apply_noise(&make_hyper_state(0.0), &model)
            .unwrap()
            .polarization_part()
            .unwrap();
        assert!((pol.matrix()[(0, 0)].re - (0.5 + eps)).abs() < 1e-14);
        assert!((pol.matrix()[(3, 3)].re - (0.5 - eps)).abs() < 1e-14);
        assert!((pol.matrix()[(0, 3)].re - 0.5 * (1.0 - 4.0 * eps * eps).sqrt()).abs() < 1e-14);
        // 0.02 % coherence loss, an order of magnitude below the 0.2 % often quoted
        assert!((1.0 - model.imbalance_factor() - 2.0e-4).abs() < 1e-6);
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        let psi = make_hyper_state(0.0);
        for bad in [
            NoiseModel {
                white_noise_weight: 1.5,
                ..NoiseModel::NOISELESS
            },
            NoiseModel {
                v_pol: -0.1,
                ..NoiseModel::NOISELESS
            },
            NoiseModel {
                pump_imbalance: 0.6,
                ..NoiseModel::NOISELESS
            },
            NoiseModel {
                phase_jitter_sigma: f64::NAN,
                ..NoiseModel::NOISELESS
            },
        ] {
            assert!(apply_noise(&psi, &bad).is_err());
        }
        assert!(apply_noise(&crate::hilbert::state::make_pol_bell(), &NoiseModel::NOISELESS).is_err());
    }

    #[test]
    fn visibility_overrides_keep_fidelity_bookkeeping() {
        let psi = make_hyper_state(0.0);
        let rho = apply_noise(&psi, &NoiseModel::with_visibilities(0.98, 0.98)).unwrap();
        // isotropic mixing per DOF: F = (v + (1-v)/4)^2 for the product of two Bell pairs
        let per = 0.98 + 0.02 / 4.0;
        assert!((fidelity(&rho, &psi).unwrap() - per * per).abs() < 1e-14);
    }

    fn check_valid(rho: &DensityOperator) -> std::result::Result<(), TestCaseError> {
        prop_assert!(rho.matrix().hermiticity_error() < HERMITIAN_TOL);
        prop_assert!((rho.trace() - 1.0).abs() < 1e-10);
        prop_assert!(eigen_floor_check(rho).unwrap());
        Ok(())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn apply_noise_preserves_density_invariants(
            sigma in 0.0..3.0f64,
            eps in -0.5..0.5f64,
            w in 0.0..=1.0f64,
            vp in 0.0..=1.0f64,
            ve in 0.0..=1.0f64,
            phase in 0.0..(2.0 * PI),
            seed in any::<u64>(),
            random_input in any::<bool>(),
        ) {
            let psi = if random_input {
                random_pure_state(16, &mut ChaCha8Rng::seed_from_u64(seed))
            } else {
                make_hyper_state(phase)
            };
            let model = NoiseModel { phase_jitter_sigma: sigma, pump_imbalance: eps, white_noise_weight: w, v_pol: vp, v_et: ve };
            if let Ok(rho) = apply_noise(&psi, &model) {
                check_valid(&rho)?;
            }
        }
    }
}
