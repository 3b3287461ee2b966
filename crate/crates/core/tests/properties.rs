use std::f64::consts::TAU;

use hypertwin::dwdm::{
    coincidence_rate, max_pair_rate, pair_for, singles_rate, DetectorSpec, ItuChannel, LinkBudget, DEFAULT_PAIR_SUM,
    MAX_CHANNEL, MIN_CHANNEL,
};
use hypertwin::hilbert::{apply_noise, make_hyper_state, random_density, random_product_state, NoiseModel};
use hypertwin::measurement::{
    all_outcomes, chsh, correlation_table, generalized_beta, is_chsh_pattern, marginal_tables, Analyzer, PolBasis,
    SettingQuad, TimeBasis,
};
use hypertwin::{AnalyzerConfig, AnalyzerSetting, CorrelationTable};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn analyzer() -> Analyzer {
    Analyzer::new(AnalyzerConfig::default()).unwrap()
}

fn pol(rng: &mut ChaCha8Rng) -> PolBasis {
    if rng.random_bool(0.25) {
        PolBasis::Circular
    } else {
        PolBasis::Linear(rng.random_range(-180.0..360.0))
    }
}

fn time(rng: &mut ChaCha8Rng) -> TimeBasis {
    if rng.random_bool(0.25) {
        TimeBasis::Arrival
    } else {
        TimeBasis::Phase(rng.random_range(-TAU..2.0 * TAU))
    }
}

fn setting(rng: &mut ChaCha8Rng) -> AnalyzerSetting {
    AnalyzerSetting {
        pol_s: pol(rng),
        time_s: time(rng),
        pol_i: pol(rng),
        time_i: time(rng),
    }
}

fn quad(rng: &mut ChaCha8Rng) -> SettingQuad {
    let mut a = || rng.random_range(0.0..180.0);
    let (a0, a1, a2, a3) = (a(), a(), a(), a());
    let mut p = || rng.random_range(0.0..TAU);
    SettingQuad::with_overrides([a0, a1], [a2, a3], [p(), p()], [p(), p()])
}

fn signs(rng: &mut ChaCha8Rng) -> [i8; 4] {
    loop {
        let s = [0; 4].map(|_: i8| if rng.random_bool(0.5) { 1 } else { -1 });
        if is_chsh_pattern(s) {
            return s;
        }
    }
}

/// Marginal of one party's `(pol, time)` outcomes.
fn party_marginal(p: &[f64; 16], bob: bool) -> [f64; 4] {
    let mut m = [0.0; 4];
    for (k, o) in all_outcomes().iter().enumerate() {
        let (x, y) = if bob { (o[2], o[3]) } else { (o[0], o[1]) };
        m[usize::from(x < 0) * 2 + usize::from(y < 0)] += p[k];
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn outcome_probabilities_form_a_distribution(seed in any::<u64>(), rank in 1usize..=16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density(16, rank, &mut rng);
        let p = analyzer().outcome_distribution(&rho, &setting(&mut rng)).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| x > -1e-13));
    }

    #[test]
    fn neither_party_can_signal(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = analyzer();
        let rho = random_density(16, 16, &mut rng);
        let s = setting(&mut rng);
        let mut bob_moves = setting(&mut rng);
        bob_moves.pol_s = s.pol_s;
        bob_moves.time_s = s.time_s;
        let mut alice_moves = setting(&mut rng);
        alice_moves.pol_i = s.pol_i;
        alice_moves.time_i = s.time_i;
        let p = a.outcome_distribution(&rho, &s).unwrap();
        let pb = a.outcome_distribution(&rho, &bob_moves).unwrap();
        let pa = a.outcome_distribution(&rho, &alice_moves).unwrap();
        for k in 0..4 {
            prop_assert!((party_marginal(&p, false)[k] - party_marginal(&pb, false)[k]).abs() < 1e-12);
            prop_assert!((party_marginal(&p, true)[k] - party_marginal(&pa, true)[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn noisy_states_stay_physical(
        phase in 0.0..TAU,
        sigma in 0.0..3.0f64,
        eps in -0.5..0.5f64,
        w in 0.0..=1.0f64,
        vp in 0.0..=1.0f64,
        ve in 0.0..=1.0f64,
    ) {
        let model = NoiseModel { phase_jitter_sigma: sigma, pump_imbalance: eps, white_noise_weight: w, v_pol: vp, v_et: ve };
        let rho = apply_noise(&make_hyper_state(phase), &model).unwrap();
        prop_assert!((rho.trace() - 1.0).abs() < 1e-12);
        prop_assert!(rho.eigenvalues().unwrap().iter().all(|&e| e > -1e-12));
        prop_assert!(rho.purity() <= 1.0 + 1e-12);
    }

    #[test]
    fn product_states_obey_local_bounds(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = analyzer();
        let rho = random_product_state(&mut rng);
        let q = quad(&mut rng);
        let (rs, cs) = (signs(&mut rng), signs(&mut rng));
        let t = correlation_table(&a, &rho, &q).unwrap();
        prop_assert!(generalized_beta(&t, rs, cs).abs() <= 4.0 + 1e-12);
        let m = marginal_tables(&a, &rho, &q).unwrap();
        for r in 0..4 {
            prop_assert!(chsh(m.et[r], rs).abs() <= 2.0 + 1e-12);
        }
        for c in 0..4 {
            let col = [m.pol[0][c], m.pol[1][c], m.pol[2][c], m.pol[3][c]];
            prop_assert!(chsh(col, cs).abs() <= 2.0 + 1e-12);
        }
    }

    #[test]
    fn coincidences_scale_with_squared_transmission(db in -40.0..0.0f64, rate in 1.0..1e9f64) {
        let det = DetectorSpec::IDQ220;
        let base = LinkBudget { transmission_db: 0.0, ..LinkBudget::DWDM };
        let lossy = LinkBudget { transmission_db: db, ..LinkBudget::DWDM };
        let t = lossy.transmission();
        let c0 = coincidence_rate(rate, &base, &det);
        let c = coincidence_rate(rate, &lossy, &det);
        prop_assert!((c / c0 - t * t).abs() <= 1e-12 * t * t);
        let s0 = singles_rate(rate, &base, &det);
        prop_assert!((singles_rate(rate, &lossy, &det) / s0 - t).abs() <= 1e-12 * t);
    }

    #[test]
    fn rate_limit_is_monotone(
        db in -40.0..-0.1f64,
        extra in 0.01..10.0f64,
        sat in 1e3..1e9f64,
        jitter in 1.0..500.0f64,
    ) {
        let det = DetectorSpec { efficiency: 0.5, timing_resolution_ps: jitter, saturation_cps: sat };
        let b = LinkBudget { transmission_db: db, ..LinkBudget::DWDM };
        let r = max_pair_rate(&b, &det).unwrap();
        prop_assert!(r.rate <= r.coherence_limit && r.rate <= r.timing_limit && r.rate <= r.saturation_limit);
        // more loss never lowers the admissible pair rate
        let lossier = LinkBudget { transmission_db: db - extra, ..b };
        prop_assert!(max_pair_rate(&lossier, &det).unwrap().rate >= r.rate);
        let faster = DetectorSpec { timing_resolution_ps: jitter / 2.0, ..det };
        prop_assert!(max_pair_rate(&b, &faster).unwrap().rate >= r.rate);
        let bigger = DetectorSpec { saturation_cps: sat * 2.0, ..det };
        prop_assert!(max_pair_rate(&b, &bigger).unwrap().rate >= r.rate);
    }

    #[test]
    fn channel_frequency_round_trips(n in MIN_CHANNEL..=MAX_CHANNEL) {
        let ch = ItuChannel::new(n).unwrap();
        prop_assert_eq!(ItuChannel::from_frequency_thz(ch.frequency_thz()).unwrap(), ch);
        prop_assert_eq!(ItuChannel::from_wavelength_nm(ch.wavelength_nm()).unwrap(), ch);
        if n < MAX_CHANNEL {
            prop_assert!(ItuChannel::new(n + 1).unwrap().wavelength_nm() < ch.wavelength_nm());
        }
        if let Ok(p) = pair_for(n, DEFAULT_PAIR_SUM) {
            prop_assert_eq!(p.frequency_sum_ghz(), 384_300);
            prop_assert!(p.signal.wavelength_nm() > p.idler.wavelength_nm());
            prop_assert!(p.energy_conservation_residual().abs() < 1e-15);
        }
    }
}

/// Deterministic local strategies: each party fixes the outcome of each of
/// its two settings per DOF. Every CHSH weighting stays within 2 per DOF and
/// 4 for the product operator, and 4 is reached.
#[test]
fn local_deterministic_strategies_reach_but_never_exceed_four() {
    let patterns: Vec<[i8; 4]> = (0..16u8)
        .map(|m| [0, 1, 2, 3].map(|k| if m >> k & 1 == 1 { -1 } else { 1 }))
        .filter(|&s| is_chsh_pattern(s))
        .collect();
    assert_eq!(patterns.len(), 8);
    let bit = |m: u32, k: u32| if m >> k & 1 == 1 { -1.0 } else { 1.0 };
    let mut best: f64 = 0.0;
    for strategy in 0..256u32 {
        // bits: pol_s(2), pol_i(2), time_s(2), time_i(2)
        let mut values = [[0.0; 4]; 4];
        for (r, row) in values.iter_mut().enumerate() {
            let (ps, pi) = SettingQuad::pair(r);
            let t = bit(strategy, 4 + ps as u32) * bit(strategy, 6 + pi as u32);
            for (c, e) in row.iter_mut().enumerate() {
                let (a_s, a_i) = SettingQuad::pair(c);
                *e = t * bit(strategy, a_s as u32) * bit(strategy, 2 + a_i as u32);
            }
        }
        let table = CorrelationTable::new(values).unwrap();
        for &rs in &patterns {
            for &cs in &patterns {
                let b = generalized_beta(&table, rs, cs);
                assert!(b.abs() <= 4.0 + 1e-12);
                best = best.max(b.abs());
            }
        }
    }
    assert_eq!(best, 4.0);
}
