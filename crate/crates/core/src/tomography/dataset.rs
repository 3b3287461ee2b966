use std::f64::consts::FRAC_PI_2;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::invalid;
use crate::experiment::{record_counts, CountRecord, DarkCorrection};
use crate::hilbert::{ComplexMatrix, DensityOperator, C64, HERMITIAN_TOL};
use crate::measurement::{all_outcomes, Analyzer, AnalyzerSetting, PolBasis, SettingQuad, TimeBasis};
use crate::{Error, Result};

/// Real coordinates of a Hermitian matrix such that
/// `Tr(A B) = coords(A) . coords(B)`: the diagonal, then `sqrt 2` times the
/// real and imaginary parts of the upper triangle (real parts above the
/// diagonal slot, imaginary parts mirrored below it).
pub(crate) fn hermitian_coords(m: &ComplexMatrix) -> Vec<f64> {
    let d = m.rows();
    let mut x = vec![0.0; d * d];
    for i in 0..d {
        x[i * d + i] = m[(i, i)].re;
        for j in i + 1..d {
            let v = m[(i, j)];
            x[i * d + j] = std::f64::consts::SQRT_2 * v.re;
            x[j * d + i] = std::f64::consts::SQRT_2 * v.im;
        }
    }
    x
}

pub(crate) fn from_hermitian_coords(x: &[f64], d: usize) -> ComplexMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_fn(d, d, |i, j| {
        if i == j {
            C64::new(x[i * d + i], 0.0)
        } else if i < j {
            C64::new(h * x[i * d + j], h * x[j * d + i])
        } else {
            C64::new(h * x[j * d + i], -h * x[i * d + j])
        }
    })
}

/// One measured effect.
#[derive(Clone, Debug, PartialEq)]
pub struct TomographyEntry {
    pub effect: ComplexMatrix,
    pub count: f64,
    /// Entries of one group share a setting; their counts sum to the trials.
    pub group: usize,
}

#[derive(Debug)]
pub(crate) struct EffectSet {
    pub dim: usize,
    pub effects: Vec<ComplexMatrix>,
    pub groups: Vec<usize>,
    /// `K x d^2` design matrix of effect coordinates.
    pub design: DMatrix<f64>,
    gram_pinv: OnceLock<(DMatrix<f64>, usize)>,
}

impl EffectSet {
    /// Pseudo-inverse of the Gram matrix and the rank of the effect span.
    pub fn gram_pinv(&self) -> &(DMatrix<f64>, usize) {
        self.gram_pinv.get_or_init(|| {
            let gram = self.design.transpose() * &self.design;
            let n = gram.nrows();
            let eig = gram.symmetric_eigen();
            let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
            let cut = 1e-10 * max;
            let mut pinv = DMatrix::zeros(n, n);
            let mut rank = 0;
            for (k, &l) in eig.eigenvalues.iter().enumerate() {
                if l > cut {
                    rank += 1;
                    let v = eig.eigenvectors.column(k);
                    pinv += (v * v.transpose()) / l;
                }
            }
            (pinv, rank)
        })
    }
}

/// Counts on a fixed set of effects, grouped by analyzer setting.
#[derive(Clone, Debug)]
pub struct TomographyDataset {
    pub(crate) set: Arc<EffectSet>,
    pub(crate) counts: Vec<f64>,
    pub(crate) trials: Vec<f64>,
}

impl TomographyDataset {
    pub fn new(dim: usize, entries: Vec<TomographyEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(invalid("entries", "dataset is empty"));
        }
        let d2 = dim * dim;
        let mut design = DMatrix::zeros(entries.len(), d2);
        for (k, e) in entries.iter().enumerate() {
            if e.effect.rows() != dim || e.effect.cols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: e.effect.rows(),
                });
            }
            if e.effect.hermiticity_error() > HERMITIAN_TOL {
                return Err(invalid("effect", format!("entry {k} is not Hermitian")));
            }
            let eig = e.effect.hermitian_eigenvalues()?;
            if eig.iter().any(|&l| !(-1e-9..=1.0 + 1e-9).contains(&l)) {
                return Err(invalid("effect", format!("entry {k} has eigenvalues outside [0, 1]")));
            }
            if !(e.count.is_finite() && e.count >= 0.0) {
                return Err(invalid("count", format!("entry {k} has count {}", e.count)));
            }
            for (c, v) in hermitian_coords(&e.effect).into_iter().enumerate() {
                design[(k, c)] = v;
            }
        }
        let counts: Vec<f64> = entries.iter().map(|e| e.count).collect();
        let groups: Vec<usize> = entries.iter().map(|e| e.group).collect();
        let set = EffectSet {
            dim,
            effects: entries.into_iter().map(|e| e.effect).collect(),
            groups,
            design,
            gram_pinv: OnceLock::new(),
        };
        Ok(Self::with_counts(Arc::new(set), counts))
    }

    fn with_counts(set: Arc<EffectSet>, counts: Vec<f64>) -> Self {
        let ngroups = set.groups.iter().max().map_or(0, |g| g + 1);
        let mut totals = vec![0.0; ngroups];
        for (&g, &n) in set.groups.iter().zip(&counts) {
            totals[g] += n;
        }
        let trials = set.groups.iter().map(|&g| totals[g]).collect();
        Self { set, counts, trials }
    }

    /// One group per setting, the 16 outcome effects of the analyzer.
    pub fn from_probabilities(
        analyzer: &Analyzer,
        rho: &DensityOperator,
        settings: &[AnalyzerSetting],
        counts_per_setting: f64,
    ) -> Result<Self> {
        let mut entries = Vec::with_capacity(settings.len() * 16);
        for (g, s) in settings.iter().enumerate() {
            for o in all_outcomes() {
                let effect = analyzer.joint_effect(s, o)?;
                let p = rho.expectation(&effect)?.max(0.0);
                entries.push(TomographyEntry {
                    effect,
                    count: p * counts_per_setting,
                    group: g,
                });
            }
        }
        Self::new(rho.dim(), entries)
    }

    /// Groups records by setting. Records of a setting may cover any subset
    /// of the outcomes.
    pub fn from_records(analyzer: &Analyzer, records: &[CountRecord], correction: DarkCorrection) -> Result<Self> {
        let mut seen: Vec<AnalyzerSetting> = Vec::new();
        let mut entries = Vec::with_capacity(records.len());
        for r in records {
            let group = match seen.iter().position(|s| *s == r.setting) {
                Some(g) => g,
                None => {
                    seen.push(r.setting);
                    seen.len() - 1
                }
            };
            entries.push(TomographyEntry {
                effect: analyzer.joint_effect(&r.setting, r.outcomes)?,
                count: record_counts(r, correction),
                group,
            });
        }
        Self::new(crate::hilbert::HYPER_DIM, entries)
    }

    pub fn dim(&self) -> usize {
        self.set.dim
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    /// Group totals, per entry.
    pub fn trials(&self) -> &[f64] {
        &self.trials
    }

    pub fn effect(&self, k: usize) -> &ComplexMatrix {
        &self.set.effects[k]
    }

    pub fn total_counts(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Dimension of the operator space spanned by the effects.
    pub fn rank(&self) -> usize {
        self.set.gram_pinv().1
    }

    pub fn is_informationally_complete(&self) -> bool {
        self.rank() == self.dim() * self.dim()
    }

    /// Same effects, counts multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self::with_counts(self.set.clone(), self.counts.iter().map(|n| n * k).collect())
    }

    /// Same effects, counts redrawn as Poisson variates around the observed
    /// counts.
    pub fn resample<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        let counts = self
            .counts
            .iter()
            .map(|&n| {
                if n > 0.0 {
                    Poisson::new(n).map(|d| d.sample(rng)).unwrap_or(0.0)
                } else {
                    0.0
                }
            })
            .collect();
        Self::with_counts(self.set.clone(), counts)
    }

    /// Unconstrained least-squares estimate of the operator from outcome
    /// frequencies, as Hermitian coordinates.
    pub(crate) fn linear_inversion(&self) -> ComplexMatrix {
        let (pinv, _) = self.set.gram_pinv();
        let f = DVector::from_iterator(
            self.len(),
            self.counts
                .iter()
                .zip(&self.trials)
                .map(|(&n, &t)| if t > 0.0 { n / t } else { 0.0 }),
        );
        let x = pinv * (self.set.design.transpose() * f);
        from_hermitian_coords(x.as_slice(), self.dim())
    }
}

/// Informationally complete local setting set: polarization in the
/// `{0 deg, 45 deg, circular}` bases and time bins in the
/// `{phase 0, phase pi/2, arrival}` bases, 81 settings.
pub fn complete_settings() -> Vec<AnalyzerSetting> {
    let pol = [PolBasis::Linear(0.0), PolBasis::Linear(45.0), PolBasis::Circular];
    let time = [TimeBasis::Phase(0.0), TimeBasis::Phase(FRAC_PI_2), TimeBasis::Arrival];
    let mut out = Vec::with_capacity(81);
    for &pol_s in &pol {
        for &time_s in &time {
            for &pol_i in &pol {
                for &time_i in &time {
                    out.push(AnalyzerSetting {
                        pol_s,
                        time_s,
                        pol_i,
                        time_i,
                    });
                }
            }
        }
    }
    out
}

/// The 16 Bell-test settings of a quad plus the four local bases that add
/// arrival-time discrimination at one DOF. Not informationally complete.
pub fn reduced_settings(quad: &SettingQuad) -> Vec<AnalyzerSetting> {
    let mut out: Vec<AnalyzerSetting> = quad.settings().into_iter().map(AnalyzerSetting::from).collect();
    let base = quad.setting(0, 0);
    let arrival = |s: AnalyzerSetting, signal: bool| AnalyzerSetting {
        time_s: if signal { TimeBasis::Arrival } else { s.time_s },
        time_i: if signal { s.time_i } else { TimeBasis::Arrival },
        ..s
    };
    let b = AnalyzerSetting::from(base);
    out.push(arrival(b, true));
    out.push(arrival(b, false));
    out.push(AnalyzerSetting {
        time_s: TimeBasis::Arrival,
        time_i: TimeBasis::Arrival,
        ..b
    });
    out.push(AnalyzerSetting {
        pol_s: PolBasis::Linear(0.0),
        pol_i: PolBasis::Linear(0.0),
        time_s: TimeBasis::Arrival,
        time_i: TimeBasis::Arrival,
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{make_hyper_state, random_density};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn coordinates_reproduce_trace_inner_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_density(16, 16, &mut rng);
        let b = random_density(16, 3, &mut rng);
        let lhs = a.matrix().trace_product(b.matrix()).unwrap().re;
        let xa = hermitian_coords(a.matrix());
        let xb = hermitian_coords(b.matrix());
        let rhs: f64 = xa.iter().zip(&xb).map(|(x, y)| x * y).sum();
        assert!((lhs - rhs).abs() < 1e-12);
        assert!(from_hermitian_coords(&xa, 16).max_abs_diff(a.matrix()) < 1e-15);
    }

    #[test]
    fn complete_set_spans_operator_space() {
        let rho = make_hyper_state(0.0).to_density();
        let a = Analyzer::default();
        let data = TomographyDataset::from_probabilities(&a, &rho, &complete_settings(), 1.0).unwrap();
        assert_eq!(data.len(), 81 * 16);
        assert!(data.is_informationally_complete());
        let reduced = TomographyDataset::from_probabilities(
            &a,
            &rho,
            &reduced_settings(&SettingQuad::with_bob(22.5, 0.785)),
            1.0,
        )
        .unwrap();
        assert!(reduced.rank() < 256);
    }

    #[test]
    fn trials_are_group_sums() {
        let rho = make_hyper_state(0.0).to_density();
        let data = TomographyDataset::from_probabilities(&Analyzer::default(), &rho, &complete_settings()[..3], 1000.0)
            .unwrap();
        for (k, &t) in data.trials().iter().enumerate() {
            assert!((t - 1000.0).abs() < 1e-9);
            assert!(data.counts()[k] <= t + 1e-9);
        }
    }

    #[test]
    fn rejects_bad_entries() {
        let e = ComplexMatrix::identity(4).scale_real(2.0);
        assert!(TomographyDataset::new(
            4,
            vec![TomographyEntry {
                effect: e,
                count: 1.0,
                group: 0
            }]
        )
        .is_err());
        let e = ComplexMatrix::identity(4);
        assert!(TomographyDataset::new(
            4,
            vec![TomographyEntry {
                effect: e.clone(),
                count: -1.0,
                group: 0
            }]
        )
        .is_err());
        assert!(TomographyDataset::new(
            16,
            vec![TomographyEntry {
                effect: e,
                count: 1.0,
                group: 0
            }]
        )
        .is_err());
        assert!(TomographyDataset::new(4, vec![]).is_err());
    }
}
