use std::f64::consts::FRAC_1_SQRT_2;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{ComplexMatrix, C64};
use crate::{Error, Result};

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const EIGEN_FLOOR: f64 = -1e-9;
pub const NORM_TOL: f64 = 1e-12;

/// Dimension of the full polarization x time-bin two-photon space.
pub const HYPER_DIM: usize = 16;

/// Index into the 16-dimensional basis `(pol_s, time_s, pol_i, time_i)`.
///
/// `pol`: 0 = H, 1 = V. `time`: 0 = E (early), 1 = L (late).
#[inline]
pub fn basis_index(pol_s: usize, time_s: usize, pol_i: usize, time_i: usize) -> usize {
    8 * pol_s + 4 * time_s + 2 * pol_i + time_i
}

/// Inverse of [`basis_index`].
#[inline]
pub fn basis_digits(index: usize) -> [usize; 4] {
    [(index >> 3) & 1, (index >> 2) & 1, (index >> 1) & 1, index & 1]
}

/// Normalised pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<C64>,
}

impl StateVector {
    /// Normalises `amplitudes`; fails on the zero vector.
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if amplitudes.is_empty() || norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidParameter {
                name: "amplitudes",
                reason: "zero or non-finite vector".into(),
            });
        }
        Ok(Self {
            amplitudes: amplitudes.into_iter().map(|a| a / norm).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|psi><psi|`.
    pub fn projector(&self) -> ComplexMatrix {
        ComplexMatrix::outer(&self.amplitudes, &self.amplitudes)
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator {
            matrix: self.projector(),
        }
    }
}

/// `(|EE> + e^{i phase_sum} |LL>) (x) (|HH> + |VV>) / 2` in the crate basis.
///
/// `phase_sum` is the sum of the two interferometer phases; only the sum ever
/// enters the post-selected state.
pub fn make_hyper_state(phase_sum: f64) -> StateVector {
    let mut amps = vec![C64::new(0.0, 0.0); HYPER_DIM];
    let late = C64::from_polar(0.5, phase_sum);
    for pol in 0..2 {
        amps[basis_index(pol, 0, pol, 0)] = C64::new(0.5, 0.0);
        amps[basis_index(pol, 1, pol, 1)] = late;
    }
    StateVector { amplitudes: amps }
}

/// `(|HH> + |VV>)/sqrt(2)` over `(pol_s, pol_i)`.
pub fn make_pol_bell() -> StateVector {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    let z = C64::new(0.0, 0.0);
    StateVector {
        amplitudes: vec![h, z, z, h],
    }
}

/// `(|EE> + e^{i phase_sum}|LL>)/sqrt(2)` over `(time_s, time_i)`.
pub fn make_time_bell(phase_sum: f64) -> StateVector {
    let z = C64::new(0.0, 0.0);
    StateVector {
        amplitudes: vec![
            C64::new(FRAC_1_SQRT_2, 0.0),
            z,
            z,
            C64::from_polar(FRAC_1_SQRT_2, phase_sum),
        ],
    }
}

/// Hermitian, unit-trace, positive semi-definite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
}

impl DensityOperator {
    /// Validates `matrix` against the density-operator tolerances.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidDensity(format!(
                "{}x{} is not square",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let herm = matrix.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidDensity(format!("hermiticity error {herm:e}")));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidDensity(format!("trace {tr}")));
        }
        let min = matrix.hermitian_eigenvalues()?[0];
        if min < EIGEN_FLOOR {
            return Err(Error::InvalidDensity(format!("minimum eigenvalue {min:e}")));
        }
        Ok(Self { matrix })
    }

    /// Wraps a matrix that is a density operator by construction.
    pub(crate) fn from_trusted(matrix: ComplexMatrix) -> Self {
        debug_assert!(matrix.is_square());
        Self { matrix }
    }

    /// Normalises `G^dagger G` by its trace. Always a valid state.
    pub fn from_factor(g: &ComplexMatrix) -> Result<Self> {
        let m = g.dagger().matmul(g)?;
        let t = m.trace().re;
        if t <= 0.0 || !t.is_finite() {
            return Err(Error::InvalidDensity("zero factor".into()));
        }
        let mut m = m.scale_real(1.0 / t);
        // exact hermiticity
        let n = m.rows();
        for r in 0..n {
            m[(r, r)].im = 0.0;
            for c in r + 1..n {
                let avg = (m[(r, c)] + m[(c, r)].conj()) * 0.5;
                m[(r, c)] = avg;
                m[(c, r)] = avg.conj();
            }
        }
        Ok(Self { matrix: m })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        self.matrix.hermitian_eigenvalues()
    }

    pub fn purity(&self) -> f64 {
        self.matrix
            .trace_product(&self.matrix)
            .map(|z| z.re)
            .unwrap_or(f64::NAN)
    }

    /// `Tr(rho E)` for an operator of matching dimension.
    pub fn expectation(&self, op: &ComplexMatrix) -> Result<f64> {
        if op.rows() != self.dim() || op.cols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: op.rows(),
            });
        }
        Ok(self.matrix.trace_product(op)?.re)
    }

    /// Partial trace over a register of subsystems with dimensions `dims`,
    /// keeping the subsystems listed in `keep` (in register order).
    pub fn partial_trace(&self, dims: &[usize], keep: &[usize]) -> Result<DensityOperator> {
        let total: usize = dims.iter().product();
        if total != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: total,
            });
        }
        if keep.iter().any(|&k| k >= dims.len()) || keep.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Shape(format!("bad keep list {keep:?}")));
        }
        let kept_dims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
        let out_dim: usize = kept_dims.iter().product();
        let mut out = ComplexMatrix::zeros(out_dim, out_dim);

        let digits = |mut idx: usize| {
            let mut d = vec![0; dims.len()];
            for k in (0..dims.len()).rev() {
                d[k] = idx % dims[k];
                idx /= dims[k];
            }
            d
        };
        let kept_index = |d: &[usize]| keep.iter().fold(0, |acc, &k| acc * dims[k] + d[k]);

        for r in 0..total {
            let dr = digits(r);
            for c in 0..total {
                let dc = digits(c);
                let traced_equal = (0..dims.len()).filter(|k| !keep.contains(k)).all(|k| dr[k] == dc[k]);
                if traced_equal {
                    out[(kept_index(&dr), kept_index(&dc))] += self.matrix[(r, c)];
                }
            }
        }
        Ok(DensityOperator { matrix: out })
    }

    /// Reduced state on `(pol_s, pol_i)` of a 16-dimensional operator.
    pub fn polarization_part(&self) -> Result<DensityOperator> {
        self.partial_trace(&[2, 2, 2, 2], &[0, 2])
    }

    /// Reduced state on `(time_s, time_i)` of a 16-dimensional operator.
    pub fn time_part(&self) -> Result<DensityOperator> {
        self.partial_trace(&[2, 2, 2, 2], &[1, 3])
    }
}

/// True iff the smallest eigenvalue is at least `-1e-9`.
pub fn eigen_floor_check(rho: &DensityOperator) -> Result<bool> {
    Ok(rho.eigenvalues()?[0] >= EIGEN_FLOOR)
}

/// `<psi| rho |psi>`.
pub fn fidelity(rho: &DensityOperator, target: &StateVector) -> Result<f64> {
    if rho.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: target.dim(),
        });
    }
    Ok(rho.matrix().expectation(target.amplitudes())?.re.clamp(0.0, 1.0))
}

/// `0.5 * || rho - sigma ||_1`.
pub fn trace_distance(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: sigma.dim(),
        });
    }
    let diff = rho.matrix() - sigma.matrix();
    Ok(0.5 * diff.hermitian_eigenvalues()?.iter().map(|x| x.abs()).sum::<f64>())
}

/// Haar-random pure state.
pub fn random_pure_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> StateVector {
    loop {
        let amps: Vec<C64> = (0..dim)
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        if let Ok(s) = StateVector::new(amps) {
            return s;
        }
    }
}

/// Random density operator `G G^dagger / Tr` with a `dim x rank` complex
/// Gaussian `G` (Hilbert-Schmidt measure when `rank == dim`).
pub fn random_density<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> DensityOperator {
    let g = ComplexMatrix::from_fn(rank.max(1), dim, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    DensityOperator::from_factor(&g).expect("gaussian factor is nonzero")
}

/// `rho_s (x) rho_i` with each factor a random 4-dimensional state over the
/// party's `(pol, time)` pair, reordered into the crate basis.
pub fn random_product_state<R: Rng + ?Sized>(rng: &mut R) -> DensityOperator {
    let a = random_density(4, 1 + rng.random_range(0..4), rng);
    let b = random_density(4, 1 + rng.random_range(0..4), rng);
    // (pol_s, time_s) (x) (pol_i, time_i) is already the crate ordering.
    DensityOperator::from_trusted(a.matrix().tensor(b.matrix()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn hyper_state_amplitudes_at_zero_phase() {
        let psi = make_hyper_state(0.0);
        assert!((psi.norm() - 1.0).abs() < NORM_TOL);
        let nonzero: Vec<usize> = psi
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() > 0.0)
            .map(|(i, _)| i)
            .collect();
        // HH(x)EE, HH(x)LL, VV(x)EE, VV(x)LL
        assert_eq!(
            nonzero,
            vec![
                basis_index(0, 0, 0, 0),
                basis_index(0, 1, 0, 1),
                basis_index(1, 0, 1, 0),
                basis_index(1, 1, 1, 1)
            ]
        );
        for &i in &nonzero {
            assert!((psi.amplitudes()[i] - C64::new(0.5, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn hyper_state_pi_negates_late_branch() {
        let a = make_hyper_state(0.0);
        let b = make_hyper_state(PI);
        for i in 0..HYPER_DIM {
            let [_, ts, _, ti] = basis_digits(i);
            let expected = if ts == 1 && ti == 1 {
                -a.amplitudes()[i]
            } else {
                a.amplitudes()[i]
            };
            assert!((b.amplitudes()[i] - expected).norm() < 1e-15);
        }
        assert!((b.norm() - 1.0).abs() < NORM_TOL);
    }

    #[test]
    fn hyper_state_overlap_at_quarter_turn() {
        // <psi_0|psi_{pi/2}> = (2 + 2i)/4, modulus squared 1/2
        let rho = make_hyper_state(0.0).to_density();
        let f = fidelity(&rho, &make_hyper_state(PI / 2.0)).unwrap();
        assert!((f - 0.5).abs() < 1e-14);
    }

    #[test]
    fn pol_bell_amplitudes() {
        let b = make_pol_bell();
        let expect = [FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2];
        for (a, e) in b.amplitudes().iter().zip(expect) {
            assert!((a - C64::new(e, 0.0)).norm() < 1e-15);
        }
        assert!((b.norm() - 1.0).abs() < NORM_TOL);
    }

    #[test]
    fn pol_bell_is_the_time_traced_hyper_state() {
        let reduced = make_hyper_state(0.0).to_density().polarization_part().unwrap();
        assert!((fidelity(&reduced, &make_pol_bell()).unwrap() - 1.0).abs() < 1e-14);
        let time = make_hyper_state(0.3).to_density().time_part().unwrap();
        assert!((fidelity(&time, &make_time_bell(0.3)).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn fidelity_floors_and_mixtures() {
        let psi = make_hyper_state(0.0);
        assert!((fidelity(&psi.to_density(), &psi).unwrap() - 1.0).abs() < 1e-14);
        let mixed = DensityOperator::maximally_mixed(16);
        assert!((fidelity(&mixed, &psi).unwrap() - 1.0 / 16.0).abs() < 1e-15);
        for w in [0.0, 0.1, 0.37, 1.0] {
            let m = &psi.projector().scale_real(1.0 - w) + &mixed.matrix().scale_real(w);
            let rho = DensityOperator::new(m).unwrap();
            let direct = rho.matrix().expectation(psi.amplitudes()).unwrap().re;
            let f = fidelity(&rho, &psi).unwrap();
            assert!((f - (1.0 - 15.0 * w / 16.0)).abs() < 1e-14);
            assert!((f - direct).abs() < 1e-14);
        }
        assert!(fidelity(&mixed, &make_pol_bell()).is_err());
    }

    #[test]
    fn density_validation_rejects_bad_matrices() {
        let not_unit = ComplexMatrix::identity(4);
        assert!(DensityOperator::new(not_unit).is_err());
        let negative = ComplexMatrix::from_real(2, 2, &[1.5, 0.0, 0.0, -0.5]).unwrap();
        assert!(DensityOperator::new(negative).is_err());
        let non_herm = ComplexMatrix::from_real(2, 2, &[0.5, 0.1, 0.0, 0.5]).unwrap();
        assert!(DensityOperator::new(non_herm).is_err());
    }

    #[test]
    fn random_states_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for rank in [1, 3, 16] {
            let rho = random_density(16, rank, &mut rng);
            assert!((rho.trace() - 1.0).abs() < 1e-12);
            assert!(eigen_floor_check(&rho).unwrap());
            assert!(DensityOperator::new(rho.matrix().clone()).is_ok());
        }
        let p = random_product_state(&mut rng);
        assert!(DensityOperator::new(p.matrix().clone()).is_ok());
    }

    #[test]
    fn trace_distance_basics() {
        let a = make_hyper_state(0.0).to_density();
        let b = make_hyper_state(PI).to_density();
        assert!(trace_distance(&a, &a).unwrap() < 1e-14);
        // orthogonal pure states
        let ab = fidelity(&a, &make_hyper_state(PI)).unwrap();
        assert!(ab < 1e-15);
        assert!((trace_distance(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    }
}
