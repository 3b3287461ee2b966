use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dwdm::ChannelPair;
use crate::error::invalid;
use crate::hilbert::DensityOperator;
use crate::measurement::{
    all_outcomes, check_outcome, Analyzer, AnalyzerSetting, JointSetting, Outcomes, PolBasis, TimeBasis, ALL_PLUS,
};
use crate::{Error, Result};

/// One measured configuration: analyzer setting plus the outcome tuple whose
/// detectors are counted in coincidence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub setting: AnalyzerSetting,
    pub outcomes: Outcomes,
}

impl Probe {
    pub fn plus(setting: JointSetting) -> Self {
        Self {
            setting: setting.into(),
            outcomes: ALL_PLUS,
        }
    }
}

/// A measurement campaign on one channel pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunPlan {
    pub probes: Vec<Probe>,
    /// Integration time per probe, s.
    pub integration_time: f64,
    pub seed: u64,
    /// Post-selected coincidence rate summed over all 16 outcomes, 1/s.
    pub pair_rate: f64,
    /// Accidental coincidence rate from detector dark counts, 1/s.
    pub dark_rate: f64,
    pub channel: Option<ChannelPair>,
}

impl RunPlan {
    pub fn new(probes: Vec<Probe>, integration_time: f64, seed: u64, pair_rate: f64, dark_rate: f64) -> Self {
        Self {
            probes,
            integration_time,
            seed,
            pair_rate,
            dark_rate,
            channel: None,
        }
    }

    /// All-plus probes at each setting, as in the one-outcome filter setup.
    pub fn one_outcome(
        settings: &[JointSetting],
        integration_time: f64,
        seed: u64,
        pair_rate: f64,
        dark_rate: f64,
    ) -> Self {
        Self::new(
            settings.iter().map(|&s| Probe::plus(s)).collect(),
            integration_time,
            seed,
            pair_rate,
            dark_rate,
        )
    }

    /// All 16 outcome tuples at each setting.
    pub fn all_outcomes(
        settings: &[AnalyzerSetting],
        integration_time: f64,
        seed: u64,
        pair_rate: f64,
        dark_rate: f64,
    ) -> Self {
        let probes = settings
            .iter()
            .flat_map(|&setting| all_outcomes().map(|outcomes| Probe { setting, outcomes }))
            .collect();
        Self::new(probes, integration_time, seed, pair_rate, dark_rate)
    }

    pub fn with_channel(mut self, channel: ChannelPair) -> Self {
        self.channel = Some(channel);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !nonneg(self.integration_time) {
            return Err(invalid("integration_time", "must be finite and >= 0"));
        }
        if !nonneg(self.pair_rate) {
            return Err(invalid("pair_rate", "must be finite and >= 0"));
        }
        if !nonneg(self.dark_rate) {
            return Err(invalid("dark_rate", "must be finite and >= 0"));
        }
        for p in &self.probes {
            for &o in &p.outcomes {
                check_outcome(o)?;
            }
        }
        Ok(())
    }

    pub fn expected_dark(&self) -> f64 {
        self.dark_rate * self.integration_time
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub setting: AnalyzerSetting,
    pub outcomes: Outcomes,
    pub integration_time: f64,
    /// Registered coincidences, signal plus dark.
    pub raw: u64,
    /// The dark part of `raw` (known in simulation only).
    pub dark: u64,
    /// Mean dark coincidences for this integration window.
    pub expected_dark: f64,
    pub channel: Option<ChannelPair>,
}

impl CountRecord {
    pub fn joint_setting(&self) -> Option<JointSetting> {
        self.setting.as_joint()
    }
}

/// `max(0, raw - expected_dark)`.
pub fn subtract_dark(record: &CountRecord) -> f64 {
    (record.raw as f64 - record.expected_dark).max(0.0)
}

/// How dark coincidences are removed before analysis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DarkCorrection {
    /// Raw counts.
    None,
    /// [`subtract_dark`], clamped at zero.
    #[default]
    Clamped,
    /// `raw - expected_dark`, may go negative. Unbiased, which matters for
    /// fringe minima where the clamp lifts the mean.
    Unclamped,
}

/// Counts of a record after dark correction.
pub fn record_counts(record: &CountRecord, correction: DarkCorrection) -> f64 {
    match correction {
        DarkCorrection::None => record.raw as f64,
        DarkCorrection::Clamped => subtract_dark(record),
        DarkCorrection::Unclamped => record.raw as f64 - record.expected_dark,
    }
}

fn poisson<R: rand::Rng>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
}

/// Poisson coincidence counts for every probe of the plan. Probe `k` draws
/// from stream `k` of a ChaCha8 generator keyed by the plan seed, so the
/// result does not depend on scheduling.
pub fn simulate_counts(analyzer: &Analyzer, rho: &DensityOperator, plan: &RunPlan) -> Result<Vec<CountRecord>> {
    plan.validate()?;
    let expected_dark = plan.expected_dark();
    plan.probes
        .par_iter()
        .enumerate()
        .map(|(k, probe)| {
            let p = analyzer.probability(rho, &probe.setting, probe.outcomes)?.max(0.0);
            let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
            rng.set_stream(k as u64);
            let signal = poisson(plan.pair_rate * p * plan.integration_time, &mut rng);
            let dark = poisson(expected_dark, &mut rng);
            Ok(CountRecord {
                setting: probe.setting,
                outcomes: probe.outcomes,
                integration_time: plan.integration_time,
                raw: signal + dark,
                dark,
                expected_dark,
                channel: plan.channel,
            })
        })
        .collect()
}

const CSV_HEADER: [&str; 15] = [
    "pol_s",
    "time_s",
    "pol_i",
    "time_i",
    "out_pol_s",
    "out_time_s",
    "out_pol_i",
    "out_time_i",
    "integration_time_s",
    "raw",
    "dark",
    "expected_dark",
    "corrected",
    "signal_channel",
    "idler_channel",
];

fn pol_field(b: PolBasis) -> String {
    match b {
        PolBasis::Linear(a) => format!("{a}"),
        PolBasis::Circular => "circ".into(),
    }
}

fn time_field(b: TimeBasis) -> String {
    match b {
        TimeBasis::Phase(p) => format!("{p}"),
        TimeBasis::Arrival => "arrival".into(),
    }
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Shape(format!("bad {what} field '{s}'")))
}

fn parse_pol(s: &str) -> Result<PolBasis> {
    if s.trim() == "circ" {
        Ok(PolBasis::Circular)
    } else {
        parse_f64(s, "polarization").map(PolBasis::Linear)
    }
}

fn parse_time(s: &str) -> Result<TimeBasis> {
    if s.trim() == "arrival" {
        Ok(TimeBasis::Arrival)
    } else {
        parse_f64(s, "phase").map(TimeBasis::Phase)
    }
}

/// Writes records as CSV. Polarization columns hold the analyzer angle in
/// degrees or `circ`; time columns the phase in radians or `arrival`.
pub fn write_counts_csv<W: Write>(records: &[CountRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for r in records {
        let (sc, ic) = match r.channel {
            Some(c) => (c.signal.number().to_string(), c.idler.number().to_string()),
            None => (String::new(), String::new()),
        };
        w.write_record([
            pol_field(r.setting.pol_s),
            time_field(r.setting.time_s),
            pol_field(r.setting.pol_i),
            time_field(r.setting.time_i),
            r.outcomes[0].to_string(),
            r.outcomes[1].to_string(),
            r.outcomes[2].to_string(),
            r.outcomes[3].to_string(),
            format!("{}", r.integration_time),
            r.raw.to_string(),
            r.dark.to_string(),
            format!("{}", r.expected_dark),
            format!("{}", subtract_dark(r)),
            sc,
            ic,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_counts_csv<R: Read>(reader: R) -> Result<Vec<CountRecord>> {
    let mut rd = csv::Reader::from_reader(reader);
    let headers = rd.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::Shape("unexpected count CSV header".into()));
    }
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        let int = |i: usize| -> Result<i64> {
            row[i]
                .trim()
                .parse()
                .map_err(|_| Error::Shape(format!("bad integer field '{}'", &row[i])))
        };
        let mut outcomes = [0i8; 4];
        for (k, o) in outcomes.iter_mut().enumerate() {
            *o = int(4 + k)? as i8;
            check_outcome(*o)?;
        }
        let channel = if row[13].trim().is_empty() {
            None
        } else {
            Some(crate::dwdm::pair_for(int(13)? as i32, (int(13)? + int(14)?) as i32)?)
        };
        out.push(CountRecord {
            setting: AnalyzerSetting {
                pol_s: parse_pol(&row[0])?,
                time_s: parse_time(&row[1])?,
                pol_i: parse_pol(&row[2])?,
                time_i: parse_time(&row[3])?,
            },
            outcomes,
            integration_time: parse_f64(&row[8], "time")?,
            raw: int(9)?.max(0) as u64,
            dark: int(10)?.max(0) as u64,
            expected_dark: parse_f64(&row[11], "expected_dark")?,
            channel,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::make_hyper_state;

    fn ideal() -> DensityOperator {
        make_hyper_state(0.0).to_density()
    }

    #[test]
    fn zero_probability_without_darks_gives_zero() {
        // at alpha_s + alpha_i = 90 deg the ++ polarization outcome vanishes
        let s = JointSetting::new(0.0, 90.0, 0.0, 0.0);
        let plan = RunPlan::one_outcome(&vec![s; 50], 10.0, 3, 1e4, 0.0);
        let recs = simulate_counts(&Analyzer::default(), &ideal(), &plan).unwrap();
        assert!(recs.iter().all(|r| r.raw == 0 && r.dark == 0));
    }

    #[test]
    fn poisson_mean_within_three_standard_errors() {
        let s = JointSetting::new(0.0, 0.0, 0.0, 0.0);
        let n = 10_000;
        let plan = RunPlan::one_outcome(&vec![s; n], 1.0, 11, 40.0, 0.0);
        let recs = simulate_counts(&Analyzer::default(), &ideal(), &plan).unwrap();
        let lambda = 40.0 * 0.25;
        let mean = recs.iter().map(|r| r.raw as f64).sum::<f64>() / n as f64;
        assert!((mean - lambda).abs() < 3.0 * (lambda / n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn dark_mean_matches_configuration() {
        let s = JointSetting::new(0.0, 90.0, 0.0, 0.0);
        let n = 4000;
        let plan = RunPlan::one_outcome(&vec![s; n], 2.0, 5, 0.0, 10.0);
        let recs = simulate_counts(&Analyzer::default(), &ideal(), &plan).unwrap();
        let mean = recs.iter().map(|r| r.dark as f64).sum::<f64>() / n as f64;
        assert!((mean - 20.0).abs() < 3.0 * (20.0 / n as f64).sqrt());
        assert!(recs.iter().all(|r| r.raw == r.dark && r.expected_dark == 20.0));
    }

    #[test]
    fn deterministic_under_seed() {
        let settings: Vec<_> = (0..64)
            .map(|k| JointSetting::new(k as f64 * 7.0, 3.0, 0.1 * k as f64, 0.0))
            .collect();
        let plan = RunPlan::one_outcome(&settings, 1.0, 99, 400.0, 10.0);
        let a = simulate_counts(&Analyzer::default(), &ideal(), &plan).unwrap();
        let b = simulate_counts(&Analyzer::default(), &ideal(), &plan).unwrap();
        assert_eq!(a, b);
        let c = simulate_counts(&Analyzer::default(), &ideal(), &RunPlan { seed: 100, ..plan }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn dark_subtraction_clamps() {
        let mut r = CountRecord {
            setting: JointSetting::new(0.0, 0.0, 0.0, 0.0).into(),
            outcomes: ALL_PLUS,
            integration_time: 1.0,
            raw: 120,
            dark: 0,
            expected_dark: 20.0,
            channel: None,
        };
        assert_eq!(subtract_dark(&r), 100.0);
        r.raw = 5;
        assert_eq!(subtract_dark(&r), 0.0);
        assert_eq!(record_counts(&r, DarkCorrection::None), 5.0);
        assert_eq!(record_counts(&r, DarkCorrection::Unclamped), -15.0);
    }

    #[test]
    fn rejects_negative_rates() {
        let s = JointSetting::new(0.0, 0.0, 0.0, 0.0);
        for plan in [
            RunPlan::one_outcome(&[s], -1.0, 0, 1.0, 0.0),
            RunPlan::one_outcome(&[s], 1.0, 0, -1.0, 0.0),
            RunPlan::one_outcome(&[s], 1.0, 0, 1.0, -1.0),
        ] {
            assert!(simulate_counts(&Analyzer::default(), &ideal(), &plan).is_err());
        }
    }

    #[test]
    fn csv_round_trip() {
        let settings = [
            AnalyzerSetting::from(JointSetting::new(22.5, 45.0, 0.3, 1.0)),
            AnalyzerSetting {
                pol_s: PolBasis::Circular,
                time_s: TimeBasis::Arrival,
                pol_i: PolBasis::Linear(45.0),
                time_i: TimeBasis::Phase(std::f64::consts::FRAC_PI_2),
            },
        ];
        let plan =
            RunPlan::all_outcomes(&settings, 2.0, 1, 400.0, 10.0).with_channel(crate::dwdm::pair_for(10, 43).unwrap());
        let recs = simulate_counts(&Analyzer::default(), &ideal(), &plan).unwrap();
        let mut buf = Vec::new();
        write_counts_csv(&recs, &mut buf).unwrap();
        let back = read_counts_csv(buf.as_slice()).unwrap();
        assert_eq!(back, recs);
        assert!(read_counts_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
