use std::path::Path;

use hypertwin::dwdm::{aggregate_capacity, pair_for, CapacityReport, ChannelPair};
use hypertwin::experiment::{
    filter_settings, filter_table, fit_fringes, fringe_plan, fringe_points, simulate_counts, write_counts_csv, RunPlan,
};
use hypertwin::hilbert::{apply_noise, fidelity, make_hyper_state};
use hypertwin::measurement::{
    averaged_marginal_betas, beta_scan, generalized_beta, marginal_tables, violation_sigmas, Analyzer, ScanConfig,
    SettingQuad,
};
use hypertwin::tomography::{
    bootstrap_fidelity, complete_settings, mle_reconstruct, reduced_settings, write_density_matrix, TomographyDataset,
};
use hypertwin::{CorrelationTable, DensityOperator, Error, FringeFit};
use serde::{Deserialize, Serialize};

use crate::config::{period_grid, CampaignConfig, Counting, SettingSet, ALPHA_PERIOD, PHI_PERIOD};
use crate::output::{write_json, write_rows, write_text, Format};
use crate::{CliError, RunContext};

const RESOLVED_CONFIG: &str = "config.resolved.toml";

// Stream tags keep the per-command seeds apart.
const FRINGES: u64 = 1;
const TABLE: u64 = 2;
const CHANNELS: u64 = 3;
const TOMO_COUNTS: u64 = 4;
const TOMO_BOOTSTRAP: u64 = 5;

/// SplitMix64 finalizer over `(master, tag, index)`.
fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn source(cfg: &CampaignConfig) -> Result<(Analyzer, DensityOperator), CliError> {
    let analyzer = Analyzer::new(cfg.analyzer)?;
    let rho = apply_noise(&make_hyper_state(0.0), &cfg.noise)?;
    Ok((analyzer, rho))
}

fn archive_config(cfg: &CampaignConfig, ctx: &RunContext) -> Result<(), CliError> {
    write_text(&ctx.out_dir.join(RESOLVED_CONFIG), &cfg.to_toml())
}

fn bell_quad(scan: &ScanConfig, alpha_i: f64, phi_i: f64) -> SettingQuad {
    SettingQuad::with_overrides(
        scan.alpha_s,
        [alpha_i, alpha_i + SettingQuad::ALPHA_OFFSET],
        scan.phi_s,
        [phi_i, phi_i + SettingQuad::PHI_OFFSET],
    )
}

// ---------------------------------------------------------------- fringes

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FringeSurface {
    pub alpha_s: f64,
    pub phi_s: f64,
    pub fit: FringeFit,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FringeReport {
    pub surfaces: Vec<FringeSurface>,
    pub mean_visibility_pol: f64,
    pub mean_visibility_et: f64,
}

#[derive(Serialize)]
struct FringeRow {
    surface: usize,
    alpha_s: f64,
    phi_s: f64,
    alpha_i: f64,
    phi_i: f64,
    raw: u64,
    dark: u64,
    counts: f64,
    model: f64,
}

/// Coincidence surfaces over Bob's settings, one per fixed Alice setting,
/// each with its separable fringe fit.
pub fn cmd_fringes(cfg: &CampaignConfig, ctx: &RunContext) -> Result<FringeReport, CliError> {
    let (analyzer, rho) = source(cfg)?;
    let f = &cfg.fringes;
    let alpha_grid = period_grid(ALPHA_PERIOD, f.alpha_points);
    let phi_grid = period_grid(PHI_PERIOD, f.phi_points);
    let c = &f.counting;

    let mut rows = Vec::new();
    let mut surfaces = Vec::new();
    for (k, &[alpha_s, phi_s]) in f.alice.iter().enumerate() {
        let plan = fringe_plan(
            alpha_s,
            phi_s,
            &alpha_grid,
            &phi_grid,
            c.integration_time,
            derive_seed(cfg.seed, FRINGES, k as u64),
            c.pair_rate,
            c.dark_rate,
        );
        let records = simulate_counts(&analyzer, &rho, &plan)?;
        let points = fringe_points(&records, c.dark_correction);
        let fit = fit_fringes(&points, &f.fit)?;
        for (r, p) in records.iter().zip(&points) {
            rows.push(FringeRow {
                surface: k,
                alpha_s,
                phi_s,
                alpha_i: p.alpha_i,
                phi_i: p.phi_i,
                raw: r.raw,
                dark: r.dark,
                counts: p.counts,
                model: fit.model(p.alpha_i, p.phi_i),
            });
        }
        surfaces.push(FringeSurface { alpha_s, phi_s, fit });
    }
    let n = surfaces.len() as f64;
    let report = FringeReport {
        mean_visibility_pol: surfaces.iter().map(|s| s.fit.visibility_pol).sum::<f64>() / n,
        mean_visibility_et: surfaces.iter().map(|s| s.fit.visibility_et).sum::<f64>() / n,
        surfaces,
    };
    write_rows(&ctx.out_dir.join("fringes"), ctx.format, &rows)?;
    write_json(&ctx.out_dir.join("fringes_fit.json"), &report)?;
    archive_config(cfg, ctx)?;
    Ok(report)
}

// ---------------------------------------------------------------- beta

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSummary {
    pub label: String,
    pub signal: i32,
    pub idler: i32,
    pub beta: f64,
    pub sigma: f64,
    /// Truncated to whole standard deviations, as tables print it.
    pub violation_sigmas: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BetaReport {
    pub scan_max: f64,
    pub scan_argmax_alpha_i: f64,
    pub scan_argmax_phi_i: f64,
    /// `"file"` or `"simulated"`.
    pub table_source: String,
    pub table: CorrelationTable,
    pub table_sigmas: [[f64; 4]; 4],
    pub beta: f64,
    pub sigma: f64,
    pub violation_sigmas: f64,
    /// Single-DOF Bell values of the model at the table quad,
    /// `(energy-time, polarization)`, averaged over the other DOF.
    pub marginal_betas: (f64, f64),
    pub channels: Vec<ChannelSummary>,
}

#[derive(Serialize)]
struct ScanRow {
    alpha_i: f64,
    phi_i: f64,
    beta: f64,
}

#[derive(Serialize)]
struct TableRow {
    row: usize,
    col: usize,
    correlator: f64,
    sigma: f64,
}

/// Reads a 4x4 correlation table: four comma-separated numbers per line,
/// `#` starts a comment.
pub fn read_table_csv(path: &Path) -> Result<CorrelationTable, CliError> {
    let bad = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let mut values = [[0.0; 4]; 4];
    let mut n = 0;
    for rec in reader.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if n == 4 {
            return Err(bad(format!("line {line}: more than four rows")));
        }
        if rec.len() != 4 {
            return Err(bad(format!("line {line}: expected 4 values, found {}", rec.len())));
        }
        for (c, field) in rec.iter().enumerate() {
            values[n][c] = field
                .parse()
                .map_err(|_| bad(format!("line {line}: '{field}' is not a number")))?;
        }
        n += 1;
    }
    if n != 4 {
        return Err(bad(format!("expected 4 rows, found {n}")));
    }
    CorrelationTable::new(values).map_err(|e| bad(e.to_string()))
}

fn beta_with_sigma(table: &CorrelationTable, sigmas: &[[f64; 4]; 4], scan: &ScanConfig) -> (f64, f64) {
    let beta = generalized_beta(table, scan.row_signs, scan.col_signs);
    let sigma = sigmas.iter().flatten().map(|s| s * s).sum::<f64>().sqrt();
    (beta, sigma)
}

fn simulate_table(
    analyzer: &Analyzer,
    rho: &DensityOperator,
    quad: &SettingQuad,
    c: &Counting,
    seed: u64,
    channel: Option<ChannelPair>,
) -> Result<(CorrelationTable, [[f64; 4]; 4]), CliError> {
    let mut plan = RunPlan::one_outcome(
        &filter_settings(&quad.settings()),
        c.integration_time,
        seed,
        c.pair_rate,
        c.dark_rate,
    );
    if let Some(ch) = channel {
        plan = plan.with_channel(ch);
    }
    let records = simulate_counts(analyzer, rho, &plan)?;
    Ok(filter_table(&records, quad, c.dark_correction)?)
}

/// Bell-parameter scan over Bob's settings, the correlation table at the
/// configured quad and a per-channel summary of simulated violations.
pub fn cmd_beta(cfg: &CampaignConfig, ctx: &RunContext) -> Result<BetaReport, CliError> {
    let (analyzer, rho) = source(cfg)?;
    let b = &cfg.beta;
    let scan = beta_scan(
        &analyzer,
        &rho,
        &period_grid(ALPHA_PERIOD, b.alpha_points),
        &period_grid(PHI_PERIOD, b.phi_points),
        &b.scan,
    )?;
    let quad = bell_quad(&b.scan, b.alpha_i, b.phi_i);

    let (table_source, table, table_sigmas) = match &b.table_file {
        Some(path) => ("file", read_table_csv(path)?, [[b.table_sigma; 4]; 4]),
        None => {
            let (t, s) = simulate_table(
                &analyzer,
                &rho,
                &quad,
                &b.counting,
                derive_seed(cfg.seed, TABLE, 0),
                None,
            )?;
            ("simulated", t, s)
        }
    };
    let (beta, sigma) = beta_with_sigma(&table, &table_sigmas, &b.scan);

    let mut channels = Vec::with_capacity(b.channels.len());
    for (k, &n) in b.channels.iter().enumerate() {
        let pair = pair_for(n, b.pair_sum)?;
        let seed = derive_seed(cfg.seed, CHANNELS, k as u64);
        let (t, s) = simulate_table(&analyzer, &rho, &quad, &b.counting, seed, Some(pair))?;
        let (beta, sigma) = beta_with_sigma(&t, &s, &b.scan);
        channels.push(ChannelSummary {
            label: pair.label(),
            signal: pair.signal.number(),
            idler: pair.idler.number(),
            beta,
            sigma,
            violation_sigmas: violation_sigmas(beta, sigma)?.floor() as u32,
        });
    }

    let marginals = marginal_tables(&analyzer, &rho, &quad)?;
    let (scan_argmax_alpha_i, scan_argmax_phi_i) = scan.argmax_setting();
    let report = BetaReport {
        scan_max: scan.max,
        scan_argmax_alpha_i,
        scan_argmax_phi_i,
        table_source: table_source.into(),
        table,
        table_sigmas,
        beta,
        sigma,
        violation_sigmas: violation_sigmas(beta, sigma)?,
        marginal_betas: averaged_marginal_betas(&marginals, b.scan.row_signs, b.scan.col_signs),
        channels,
    };

    let scan_rows: Vec<ScanRow> = scan
        .alpha_i
        .iter()
        .enumerate()
        .flat_map(|(a, &alpha_i)| {
            let values = &scan.values[a];
            scan.phi_i.iter().enumerate().map(move |(p, &phi_i)| ScanRow {
                alpha_i,
                phi_i,
                beta: values[p],
            })
        })
        .collect();
    let table_rows: Vec<TableRow> = (0..16)
        .map(|k| TableRow {
            row: k / 4,
            col: k % 4,
            correlator: table.get(k / 4, k % 4),
            sigma: table_sigmas[k / 4][k % 4],
        })
        .collect();
    write_rows(&ctx.out_dir.join("beta_scan"), ctx.format, &scan_rows)?;
    write_rows(&ctx.out_dir.join("correlation_table"), ctx.format, &table_rows)?;
    write_rows(&ctx.out_dir.join("channels"), ctx.format, &report.channels)?;
    write_json(&ctx.out_dir.join("beta_summary.json"), &report)?;
    archive_config(cfg, ctx)?;
    Ok(report)
}

// ---------------------------------------------------------------- tomo

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TomoReport {
    pub fidelity: f64,
    /// Fidelity of the simulated source state itself.
    pub model_fidelity: f64,
    pub interval_low: f64,
    pub interval_high: f64,
    pub interval_width: f64,
    pub resamples: usize,
    pub failed_resamples: usize,
    pub total_counts: f64,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub residual: f64,
    pub purity: f64,
    pub warning: Option<String>,
}

/// Simulated tomography campaign, maximum-likelihood reconstruction and a
/// bootstrap fidelity interval against the ideal state.
pub fn cmd_tomo(cfg: &CampaignConfig, ctx: &RunContext) -> Result<TomoReport, CliError> {
    let (analyzer, rho) = source(cfg)?;
    let t = &cfg.tomo;
    let settings = match t.settings {
        SettingSet::Complete => complete_settings(),
        SettingSet::Reduced => reduced_settings(&bell_quad(&cfg.beta.scan, cfg.beta.alpha_i, cfg.beta.phi_i)),
    };
    let c = &t.counting;
    let plan = RunPlan::all_outcomes(
        &settings,
        c.integration_time,
        derive_seed(cfg.seed, TOMO_COUNTS, 0),
        c.pair_rate,
        c.dark_rate,
    );
    let records = simulate_counts(&analyzer, &rho, &plan)?;
    let data = TomographyDataset::from_records(&analyzer, &records, c.dark_correction)?;
    let mle = mle_reconstruct(&data, &t.mle)?;
    if !mle.converged {
        return Err(Error::NonConvergence {
            what: format!("likelihood maximization (residual {:.3e})", mle.residual),
            iterations: mle.iterations,
        }
        .into());
    }
    let target = make_hyper_state(t.target_phase);
    let interval = bootstrap_fidelity(
        &data,
        &target,
        t.resamples,
        derive_seed(cfg.seed, TOMO_BOOTSTRAP, 0),
        &t.mle,
    )?;
    let report = TomoReport {
        fidelity: fidelity(&mle.rho_hat, &target)?,
        model_fidelity: fidelity(&rho, &target)?,
        interval_low: interval.low,
        interval_high: interval.high,
        interval_width: interval.width(),
        resamples: t.resamples,
        failed_resamples: interval.failed,
        total_counts: data.total_counts(),
        log_likelihood: mle.log_likelihood,
        iterations: mle.iterations,
        residual: mle.residual,
        purity: mle.rho_hat.purity(),
        warning: mle.warning.clone(),
    };

    let counts_path = ctx.out_dir.join("tomo_counts");
    match ctx.format {
        Format::Csv => crate::output::write_atomic(&counts_path.with_extension("csv"), |w| {
            Ok(write_counts_csv(&records, w)?)
        })?,
        Format::Json => write_json(&counts_path.with_extension("json"), &records)?,
    }
    crate::output::write_atomic(&ctx.out_dir.join("rho_hat.txt"), |w| {
        Ok(write_density_matrix(mle.rho_hat.matrix(), w)?)
    })?;
    write_json(&ctx.out_dir.join("tomo_summary.json"), &report)?;
    archive_config(cfg, ctx)?;
    Ok(report)
}

// ---------------------------------------------------------------- budget

#[derive(Serialize)]
struct BudgetRow {
    label: String,
    signal: i32,
    idler: i32,
    signal_nm: f64,
    idler_nm: f64,
    pump_nm: f64,
    weight: f64,
    pair_rate: f64,
    singles_rate: f64,
    coincidence_rate: f64,
}

/// Rate limits and coincidence capacity of the configured channel pairs.
pub fn cmd_budget(cfg: &CampaignConfig, ctx: &RunContext) -> Result<CapacityReport, CliError> {
    let b = &cfg.budget;
    let pairs = b
        .channels
        .iter()
        .map(|&n| pair_for(n, b.pair_sum))
        .collect::<hypertwin::Result<Vec<_>>>()?;
    let report = aggregate_capacity(&pairs, &b.link, &b.reference, &b.detector, &b.weighting)?;
    let rows: Vec<BudgetRow> = pairs
        .iter()
        .zip(&report.pairs)
        .map(|(p, c)| BudgetRow {
            label: c.label.clone(),
            signal: c.signal,
            idler: c.idler,
            signal_nm: p.signal.wavelength_nm(),
            idler_nm: p.idler.wavelength_nm(),
            pump_nm: p.pump_wavelength_nm(),
            weight: c.weight,
            pair_rate: c.pair_rate,
            singles_rate: c.singles_rate,
            coincidence_rate: c.coincidence_rate,
        })
        .collect();
    write_rows(&ctx.out_dir.join("budget_pairs"), ctx.format, &rows)?;
    write_json(&ctx.out_dir.join("budget.json"), &report)?;
    archive_config(cfg, ctx)?;
    Ok(report)
}
