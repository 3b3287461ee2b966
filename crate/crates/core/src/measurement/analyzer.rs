use serde::{Deserialize, Serialize};

use super::settings::{all_outcomes, check_outcome, AnalyzerSetting, JointSetting, Outcomes, PolBasis, TimeBasis};
use crate::hilbert::{basis_digits, ComplexMatrix, DensityOperator, C64, HYPER_DIM};
use crate::{Error, Result};

/// How the idler polarizer angle enters the polarization correlator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolSignConvention {
    /// `E_pol ~ cos 2(alpha_s + alpha_i)`: the idler analyzer is mirrored.
    #[default]
    Sum,
    /// `E_pol ~ cos 2(alpha_s - alpha_i)`.
    Difference,
}

/// Interferometer and polarization analyzer parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzerConfig {
    /// Travel-time difference of each unbalanced interferometer, ps.
    pub mi_imbalance_ps: f64,
    /// Achieved matching of the two interferometers, ps.
    pub mi_match_tolerance_ps: f64,
    /// Single-photon coherence time, ps.
    pub coherence_time_ps: f64,
    pub pol_sign_convention: PolSignConvention,
}

impl Default for AnalyzerConfig {
    fn default() -> Self {
        Self {
            mi_imbalance_ps: 300.0,
            mi_match_tolerance_ps: 0.03,
            coherence_time_ps: 5.0,
            pol_sign_convention: PolSignConvention::Sum,
        }
    }
}

impl AnalyzerConfig {
    /// "Much larger / much smaller" is read as a factor of ten.
    pub const SEPARATION_FACTOR: f64 = 10.0;

    /// Franson validity: the imbalance must exceed the coherence time by
    /// [`Self::SEPARATION_FACTOR`] (no single-photon interference) and the
    /// interferometer mismatch must stay below the coherence time by the same
    /// factor (two-photon interference survives).
    pub fn validate(&self) -> Result<()> {
        let finite_pos = |x: f64| x.is_finite() && x > 0.0;
        if !finite_pos(self.coherence_time_ps) || !finite_pos(self.mi_imbalance_ps) {
            return Err(Error::FransonInvalid("times must be positive".into()));
        }
        if !(self.mi_match_tolerance_ps.is_finite() && self.mi_match_tolerance_ps >= 0.0) {
            return Err(Error::FransonInvalid("match tolerance must be >= 0".into()));
        }
        if self.mi_imbalance_ps < Self::SEPARATION_FACTOR * self.coherence_time_ps {
            return Err(Error::FransonInvalid(format!(
                "imbalance {} ps is not much larger than the coherence time {} ps",
                self.mi_imbalance_ps, self.coherence_time_ps
            )));
        }
        if self.mi_match_tolerance_ps * Self::SEPARATION_FACTOR > self.coherence_time_ps {
            return Err(Error::FransonInvalid(format!(
                "interferometer mismatch {} ps is not small against the coherence time {} ps",
                self.mi_match_tolerance_ps, self.coherence_time_ps
            )));
        }
        Ok(())
    }
}

/// Projector onto `cos(a)|H> + sin(a)|V>` (`+1`) or its complement (`-1`).
pub fn pol_effect(alpha_deg: f64, outcome: i8) -> ComplexMatrix {
    let a = alpha_deg.to_radians();
    let (s, c) = a.sin_cos();
    let sign = if outcome < 0 { -1.0 } else { 1.0 };
    // P+ = [[c^2, cs], [cs, s^2]], P- = I - P+
    let (c2, s2, cs) = (c * c, s * s, c * s);
    let m = if sign > 0.0 {
        [c2, cs, cs, s2]
    } else {
        [s2, -cs, -cs, c2]
    };
    ComplexMatrix::from_real(2, 2, &m).expect("2x2")
}

/// Circular-basis projector, `+1` on `(|H> + i|V>)/sqrt(2)`.
pub fn circular_effect(outcome: i8) -> ComplexMatrix {
    let s = if outcome < 0 { -0.5 } else { 0.5 };
    ComplexMatrix::from_row_major(
        2,
        2,
        vec![
            C64::new(0.5, 0.0),
            C64::new(0.0, -s),
            C64::new(0.0, s),
            C64::new(0.5, 0.0),
        ],
    )
    .expect("2x2")
}

/// Arrival-time projector, `+1` on `|E>`.
pub fn arrival_effect(outcome: i8) -> ComplexMatrix {
    let d = if outcome < 0 {
        [0.0, 0.0, 0.0, 1.0]
    } else {
        [1.0, 0.0, 0.0, 0.0]
    };
    ComplexMatrix::from_real(2, 2, &d).expect("2x2")
}

/// Effect of one Franson interferometer output inside the central time slot.
#[derive(Clone, Debug, PartialEq)]
pub struct EtEffect {
    /// Projector onto `(|E> +- e^{i phi}|L>)/sqrt(2)` in the `{E, L}` basis.
    pub matrix: ComplexMatrix,
    /// Fraction of pairs that land in the central coincidence slot (both
    /// photons short or both long).
    pub postselection_weight: f64,
}

/// Central-slot acceptance of a Franson pair of interferometers.
pub const CENTRAL_SLOT_WEIGHT: f64 = 0.5;

/// Interferometer effect at phase `phi` for the given outcome.
pub fn et_effect(config: &AnalyzerConfig, phi: f64, outcome: i8) -> Result<EtEffect> {
    config.validate()?;
    check_outcome(outcome)?;
    Ok(EtEffect {
        matrix: phase_projector(phi, outcome),
        postselection_weight: CENTRAL_SLOT_WEIGHT,
    })
}

fn phase_projector(phi: f64, outcome: i8) -> ComplexMatrix {
    let s = if outcome < 0 { -0.5 } else { 0.5 };
    let e = C64::from_polar(s, phi);
    ComplexMatrix::from_row_major(2, 2, vec![C64::new(0.5, 0.0), e.conj(), e, C64::new(0.5, 0.0)]).expect("2x2")
}

/// `Z . M . Z`, the effect seen through a mirrored (half-wave plate) analyzer.
fn mirrored(m: &ComplexMatrix) -> ComplexMatrix {
    let mut out = m.clone();
    out[(0, 1)] = -out[(0, 1)];
    out[(1, 0)] = -out[(1, 0)];
    out
}

/// Dichotomic observable `P(+1) - P(-1)` for one analyzer.
fn observable(effect: impl Fn(i8) -> ComplexMatrix) -> ComplexMatrix {
    &effect(1) - &effect(-1)
}

/// Validated analyzer chain shared by both parties.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Analyzer {
    config: AnalyzerConfig,
}

impl Analyzer {
    pub fn new(config: AnalyzerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &AnalyzerConfig {
        &self.config
    }

    fn pol(&self, basis: PolBasis, outcome: i8, idler: bool) -> ComplexMatrix {
        let m = match basis {
            PolBasis::Linear(a) => pol_effect(a, outcome),
            PolBasis::Circular => circular_effect(outcome),
        };
        if idler && self.config.pol_sign_convention == PolSignConvention::Sum {
            mirrored(&m)
        } else {
            m
        }
    }

    fn time(&self, basis: TimeBasis, outcome: i8) -> ComplexMatrix {
        match basis {
            TimeBasis::Phase(phi) => phase_projector(phi, outcome),
            TimeBasis::Arrival => arrival_effect(outcome),
        }
    }

    /// The four single-photon 2x2 effects, `(pol_s, time_s, pol_i, time_i)`.
    pub fn factor_effects(&self, setting: &AnalyzerSetting, outcomes: Outcomes) -> Result<[ComplexMatrix; 4]> {
        for &o in &outcomes {
            check_outcome(o)?;
        }
        Ok([
            self.pol(setting.pol_s, outcomes[0], false),
            self.time(setting.time_s, outcomes[1]),
            self.pol(setting.pol_i, outcomes[2], true),
            self.time(setting.time_i, outcomes[3]),
        ])
    }

    /// The four dichotomic observables of a setting.
    pub fn factor_observables(&self, setting: &AnalyzerSetting) -> [ComplexMatrix; 4] {
        [
            observable(|o| self.pol(setting.pol_s, o, false)),
            observable(|o| self.time(setting.time_s, o)),
            observable(|o| self.pol(setting.pol_i, o, true)),
            observable(|o| self.time(setting.time_i, o)),
        ]
    }

    /// Full 16x16 joint effect.
    pub fn joint_effect(&self, setting: &AnalyzerSetting, outcomes: Outcomes) -> Result<ComplexMatrix> {
        let [a, b, c, d] = self.factor_effects(setting, outcomes)?;
        Ok(a.tensor(&b).tensor(&c).tensor(&d))
    }

    /// `Tr(rho E_pol,s (x) E_et,s (x) E_pol,i (x) E_et,i)` within the
    /// post-selected ensemble.
    pub fn coincidence_probability(
        &self,
        rho: &DensityOperator,
        setting: &JointSetting,
        outcomes: Outcomes,
    ) -> Result<f64> {
        self.probability(rho, &AnalyzerSetting::from(*setting), outcomes)
    }

    /// As [`Self::coincidence_probability`] for a general analyzer setting.
    pub fn probability(&self, rho: &DensityOperator, setting: &AnalyzerSetting, outcomes: Outcomes) -> Result<f64> {
        check_dim(rho)?;
        let f = self.factor_effects(setting, outcomes)?;
        Ok(product_expectation(rho.matrix(), [&f[0], &f[1], &f[2], &f[3]]).re)
    }

    /// Probabilities of the 16 outcome tuples, in [`all_outcomes`] order.
    pub fn outcome_distribution(&self, rho: &DensityOperator, setting: &AnalyzerSetting) -> Result<[f64; 16]> {
        let mut p = [0.0; 16];
        for (slot, o) in p.iter_mut().zip(all_outcomes()) {
            *slot = self.probability(rho, setting, o)?;
        }
        Ok(p)
    }

    /// Expectation of the product of all four outcome signs.
    pub fn correlator(&self, rho: &DensityOperator, setting: &JointSetting) -> Result<f64> {
        self.general_correlator(rho, &AnalyzerSetting::from(*setting))
    }

    pub fn general_correlator(&self, rho: &DensityOperator, setting: &AnalyzerSetting) -> Result<f64> {
        check_dim(rho)?;
        let o = self.factor_observables(setting);
        Ok(product_expectation(rho.matrix(), [&o[0], &o[1], &o[2], &o[3]])
            .re
            .clamp(-1.0, 1.0))
    }

    /// Single-DOF correlators `(E_pol, E_et)`, each marginalized over the
    /// other DOF's outcomes.
    pub fn marginal_correlators(&self, rho: &DensityOperator, setting: &JointSetting) -> Result<(f64, f64)> {
        check_dim(rho)?;
        let o = self.factor_observables(&AnalyzerSetting::from(*setting));
        let id = ComplexMatrix::identity(2);
        let pol = product_expectation(rho.matrix(), [&o[0], &id, &o[2], &id]).re;
        let et = product_expectation(rho.matrix(), [&id, &o[1], &id, &o[3]]).re;
        Ok((pol.clamp(-1.0, 1.0), et.clamp(-1.0, 1.0)))
    }

    /// Bob's 4x4 operator over `(pol_i, time_i)` after contracting Alice's
    /// two observables against `rho`: `Tr_s[(A (x) T (x) I) rho]`.
    pub(crate) fn alice_contracted(&self, rho: &DensityOperator, alpha_s: f64, phi_s: f64) -> [[C64; 4]; 4] {
        let a = observable(|o| self.pol(PolBasis::Linear(alpha_s), o, false));
        let t = observable(|o| self.time(TimeBasis::Phase(phi_s), o));
        let m = rho.matrix();
        let mut out = [[C64::new(0.0, 0.0); 4]; 4];
        for r in 0..HYPER_DIM {
            let [r0, r1, r2, r3] = basis_digits(r);
            for c in 0..HYPER_DIM {
                let [c0, c1, c2, c3] = basis_digits(c);
                // element (bob_c, bob_r) of the conditioned operator, so that
                // Tr(K B) = sum K[c][r] B[r][c] with B in (pol_i, time_i)
                out[2 * c2 + c3][2 * r2 + r3] += m[(r, c)] * a[(c0, r0)] * t[(c1, r1)];
            }
        }
        out
    }

    /// Correlator from an Alice-contracted operator and Bob's settings.
    pub(crate) fn bob_correlator(&self, contracted: &[[C64; 4]; 4], alpha_i: f64, phi_i: f64) -> f64 {
        let b = observable(|o| self.pol(PolBasis::Linear(alpha_i), o, true));
        let t = observable(|o| self.time(TimeBasis::Phase(phi_i), o));
        let mut acc = C64::new(0.0, 0.0);
        for r in 0..4 {
            for c in 0..4 {
                // contracted[c][r] holds sum rho(.., r; .., c) A T; pair with O[c][r]
                acc += contracted[c][r] * b[(c / 2, r / 2)] * t[(c % 2, r % 2)];
            }
        }
        acc.re.clamp(-1.0, 1.0)
    }
}

fn check_dim(rho: &DensityOperator) -> Result<()> {
    if rho.dim() != HYPER_DIM {
        return Err(Error::DimensionMismatch {
            expected: HYPER_DIM,
            got: rho.dim(),
        });
    }
    Ok(())
}

/// `Tr(rho (A (x) B (x) C (x) D))` for 2x2 factors, without forming the
/// 16x16 product.
pub(crate) fn product_expectation(rho: &ComplexMatrix, f: [&ComplexMatrix; 4]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for r in 0..HYPER_DIM {
        let [r0, r1, r2, r3] = basis_digits(r);
        for c in 0..HYPER_DIM {
            let [c0, c1, c2, c3] = basis_digits(c);
            let o = f[0][(c0, r0)] * f[1][(c1, r1)] * f[2][(c2, r2)] * f[3][(c3, r3)];
            if o != C64::new(0.0, 0.0) {
                acc += rho[(r, c)] * o;
            }
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{make_hyper_state, random_density, StateVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn close(a: &ComplexMatrix, b: &[f64]) -> bool {
        a.max_abs_diff(&ComplexMatrix::from_real(2, 2, b).unwrap()) < 1e-15
    }

    #[test]
    fn polarizer_effects() {
        assert!(close(&pol_effect(0.0, 1), &[1.0, 0.0, 0.0, 0.0]));
        assert!(close(&pol_effect(45.0, 1), &[0.5, 0.5, 0.5, 0.5]));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let a = rng.random_range(-360.0..360.0);
            let sum = &pol_effect(a, 1) + &pol_effect(a, -1);
            assert!(sum.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-15);
        }
    }

    #[test]
    fn interferometer_effects() {
        let cfg = AnalyzerConfig::default();
        let e0 = et_effect(&cfg, 0.0, 1).unwrap();
        assert!(close(&e0.matrix, &[0.5, 0.5, 0.5, 0.5]));
        assert_eq!(e0.postselection_weight, 0.5);
        assert!(
            et_effect(&cfg, PI, 1)
                .unwrap()
                .matrix
                .max_abs_diff(&ComplexMatrix::from_real(2, 2, &[0.5, -0.5, -0.5, 0.5]).unwrap())
                < 1e-15
        );
        for phi in [0.0, 0.3, 2.0, 5.5] {
            let sum = &et_effect(&cfg, phi, 1).unwrap().matrix + &et_effect(&cfg, phi, -1).unwrap().matrix;
            assert!(sum.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-15);
        }
        assert!(et_effect(&cfg, 0.0, 0).is_err());
    }

    #[test]
    fn franson_validity_checks() {
        let short = AnalyzerConfig {
            mi_imbalance_ps: 20.0,
            ..AnalyzerConfig::default()
        };
        assert!(matches!(et_effect(&short, 0.0, 1), Err(Error::FransonInvalid(_))));
        let mismatched = AnalyzerConfig {
            mi_match_tolerance_ps: 2.0,
            ..AnalyzerConfig::default()
        };
        assert!(matches!(Analyzer::new(mismatched), Err(Error::FransonInvalid(_))));
        assert!(Analyzer::new(AnalyzerConfig::default()).is_ok());
    }

    /// Brute force: amplitude of the projected product vector, enumerated
    /// over all 16 basis states.
    fn brute_probability(psi: &StateVector, alpha_s: f64, phi_s: f64, alpha_i: f64, phi_i: f64) -> f64 {
        let pol = |a: f64, k: usize| {
            if k == 0 {
                a.to_radians().cos()
            } else {
                a.to_radians().sin()
            }
        };
        let time = |p: f64, k: usize| {
            if k == 0 {
                C64::new(FRAC_1_SQRT_2, 0.0)
            } else {
                C64::from_polar(FRAC_1_SQRT_2, p)
            }
        };
        let mut amp = C64::new(0.0, 0.0);
        for idx in 0..16 {
            let [ps, ts, pi, ti] = basis_digits(idx);
            let bra = time(phi_s, ts).conj() * time(phi_i, ti).conj() * pol(alpha_s, ps) * pol(alpha_i, pi);
            amp += bra * psi.amplitudes()[idx];
        }
        amp.norm_sqr()
    }

    #[test]
    fn ideal_state_all_plus_at_origin() {
        let psi = make_hyper_state(0.0);
        let an = Analyzer::new(AnalyzerConfig {
            pol_sign_convention: PolSignConvention::Difference,
            ..Default::default()
        })
        .unwrap();
        let p = an
            .coincidence_probability(&psi.to_density(), &JointSetting::new(0.0, 0.0, 0.0, 0.0), [1; 4])
            .unwrap();
        assert!((p - brute_probability(&psi, 0.0, 0.0, 0.0, 0.0)).abs() < 1e-15);
        assert!((p - 0.25).abs() < 1e-15);
        let sum = Analyzer::default();
        assert!(
            (sum.coincidence_probability(&psi.to_density(), &JointSetting::new(0.0, 0.0, 0.0, 0.0), [1; 4])
                .unwrap()
                - 0.25)
                .abs()
                < 1e-15
        );
    }

    #[test]
    fn probability_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let an = Analyzer::new(AnalyzerConfig {
            pol_sign_convention: PolSignConvention::Difference,
            ..Default::default()
        })
        .unwrap();
        for _ in 0..20 {
            let psi = crate::hilbert::random_pure_state(16, &mut rng);
            let (a, b) = (rng.random_range(0.0..180.0), rng.random_range(0.0..180.0));
            let (p, q) = (rng.random_range(0.0..6.0), rng.random_range(0.0..6.0));
            let direct = an
                .coincidence_probability(&psi.to_density(), &JointSetting::new(a, b, p, q), [1; 4])
                .unwrap();
            assert!((direct - brute_probability(&psi, a, p, b, q)).abs() < 1e-13);
        }
    }

    #[test]
    fn maximally_mixed_is_uniform() {
        let rho = DensityOperator::maximally_mixed(16);
        let an = Analyzer::default();
        let s = AnalyzerSetting::from(JointSetting::new(12.0, 77.0, 1.0, 2.0));
        for p in an.outcome_distribution(&rho, &s).unwrap() {
            assert!((p - 1.0 / 16.0).abs() < 1e-15);
        }
        assert!(an.general_correlator(&rho, &s).unwrap().abs() < 1e-15);
    }

    #[test]
    fn correlator_equals_signed_outcome_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let an = Analyzer::default();
        for _ in 0..20 {
            let rho = random_density(16, 4, &mut rng);
            let s = JointSetting::new(
                rng.random_range(0.0..180.0),
                rng.random_range(0.0..180.0),
                rng.random_range(0.0..6.0),
                1.0,
            );
            let dist = an.outcome_distribution(&rho, &s.into()).unwrap();
            let signed: f64 = dist
                .iter()
                .zip(all_outcomes())
                .map(|(p, o)| p * super::super::settings::outcome_sign(o))
                .sum();
            assert!((signed - an.correlator(&rho, &s).unwrap()).abs() < 1e-13);
        }
    }

    #[test]
    fn ideal_marginals_follow_cosines() {
        let rho = make_hyper_state(0.0).to_density();
        let an = Analyzer::default();
        let (ep, _) = an
            .marginal_correlators(&rho, &JointSetting::new(0.0, 22.5, 0.0, 0.0))
            .unwrap();
        assert!((ep.abs() - FRAC_1_SQRT_2).abs() < 1e-14);
        let (_, ee) = an
            .marginal_correlators(&rho, &JointSetting::new(0.0, 0.0, 0.0, PI / 4.0))
            .unwrap();
        assert!((ee - FRAC_1_SQRT_2).abs() < 1e-14);
        // sum convention: cos 2(alpha_s + alpha_i)
        let (ep, ee) = an
            .marginal_correlators(&rho, &JointSetting::new(10.0, 20.0, 0.4, 0.5))
            .unwrap();
        assert!((ep - (60f64).to_radians().cos()).abs() < 1e-14);
        assert!((ee - 0.9f64.cos()).abs() < 1e-14);
        let diff = Analyzer::new(AnalyzerConfig {
            pol_sign_convention: PolSignConvention::Difference,
            ..Default::default()
        })
        .unwrap();
        let (ep, _) = diff
            .marginal_correlators(&rho, &JointSetting::new(10.0, 20.0, 0.4, 0.5))
            .unwrap();
        assert!((ep - (-20f64).to_radians().cos()).abs() < 1e-14);
    }

    #[test]
    fn contracted_path_matches_direct_correlator() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let an = Analyzer::default();
        let rho = random_density(16, 16, &mut rng);
        let k = an.alice_contracted(&rho, 45.0, PI / 2.0);
        for _ in 0..10 {
            let (a, p) = (rng.random_range(0.0..180.0), rng.random_range(0.0..6.2));
            let direct = an.correlator(&rho, &JointSetting::new(45.0, a, PI / 2.0, p)).unwrap();
            assert!((direct - an.bob_correlator(&k, a, p)).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_wrong_dimension() {
        let rho = DensityOperator::maximally_mixed(4);
        assert!(Analyzer::default()
            .correlator(&rho, &JointSetting::new(0.0, 0.0, 0.0, 0.0))
            .is_err());
    }
}
