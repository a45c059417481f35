//! Stage orchestration: load or generate a universe, run each analysis
//! stage, and write its outputs under `output_dir`.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::json;
use volvol::distributions::{self, Binning};
use volvol::ingest::{self, ValidationReport};
use volvol::lmv;
use volvol::normalize;
use volvol::predictor::{self, Conditioner, Side};
use volvol::synth::{self, SynthSpec};
use volvol::tailfit::{self, TailFitParams};
use volvol::NormalizedSeries;

use crate::config::RunConfig;
use crate::{CliError, Command};

/// Volume range beyond which the affine cutoff rate of real-data fits goes
/// nonpositive for typical fitted parameters; such samples are excluded from
/// the tail fit and counted in the report.
const FIT_V_LIMIT: f64 = 2.4;

fn analysis(e: volvol::Error) -> CliError {
    match e {
        volvol::Error::Io { path, source } => CliError::Io(format!("{path}: {source}")),
        other => CliError::Analysis(other.to_string()),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| io_err(&path, e))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("{name}: {e}")))?;
    text.push('\n');
    write_file(dir, name, &text)
}

/// Load the configured universe: parsed real data or a generated synthetic
/// one, already normalized either way.
pub fn load_data(
    cfg: &RunConfig,
) -> Result<(Vec<NormalizedSeries>, Vec<ValidationReport>), CliError> {
    if let Some(dir) = &cfg.input_dir {
        let (raw, reports) = ingest::load_universe(dir).map_err(analysis)?;
        let universe = raw
            .iter()
            .map(normalize::normalize_series)
            .collect::<volvol::Result<Vec<_>>>()
            .map_err(analysis)?;
        Ok((universe, reports))
    } else {
        let spec = synth_spec(cfg);
        let universe = synth::generate_universe(&spec).map_err(analysis)?;
        let reports = universe
            .iter()
            .map(|s| ValidationReport {
                ticker: s.ticker.clone(),
                rows_read: s.len(),
                rows_dropped_zero_volume: 0,
                rows_dropped_malformed: 0,
                date_gaps: 0,
            })
            .collect();
        Ok((universe, reports))
    }
}

pub fn synth_spec(cfg: &RunConfig) -> SynthSpec {
    let scenario = cfg.effective_scenario();
    let mut spec = SynthSpec::new(scenario, cfg.synth_tickers, cfg.synth_days, cfg.seed)
        .with_params(TailFitParams::new(0.4, -1.23, -2.5, 3.0, cfg.g_min));
    if scenario == synth::Scenario::Model {
        // Keep the cutoff rate positive over the sampled volume range.
        spec = spec.with_v_bounds(-2.0, 2.0);
    }
    spec
}

fn volume_binning(cfg: &RunConfig) -> Binning {
    Binning::linear(-3.0, 3.0, cfg.volume_bins).expect("validated bin count")
}

fn pooled_pairs(universe: &[NormalizedSeries]) -> Vec<(f64, f64)> {
    universe
        .iter()
        .flat_map(|s| s.lagged_pairs(0))
        .map(|(v, g)| (g, v))
        .collect()
}

fn pdf_csv(pdf: &distributions::Pdf) -> String {
    let mut out = String::from("bin_center,density,count\n");
    for i in 0..pdf.bin_centers.len() {
        let _ = writeln!(out, "{},{},{}", pdf.bin_centers[i], pdf.densities[i], pdf.counts[i]);
    }
    out
}

fn stage_ingest(
    cfg: &RunConfig,
    universe: &[NormalizedSeries],
    reports: &[ValidationReport],
) -> Result<(), CliError> {
    write_json(&cfg.output_dir, "validation_report.json", &reports)?;
    let days: usize = universe.iter().map(|s| s.len()).sum();
    println!("ingest: {} tickers, {} normalized days", universe.len(), days);
    Ok(())
}

fn stage_distributions(cfg: &RunConfig, universe: &[NormalizedSeries]) -> Result<(), CliError> {
    let pooled = pooled_pairs(universe);
    let v_bins = volume_binning(cfg);
    let g_bins = Binning::default_volatility();

    let vs: Vec<f64> = pooled.iter().map(|p| p.1).collect();
    let gs: Vec<f64> = pooled.iter().map(|p| p.0).collect();
    let volume_pdf = distributions::histogram_pdf(&vs, &v_bins).map_err(analysis)?;
    let volatility_pdf = distributions::histogram_pdf(&gs, &g_bins).map_err(analysis)?;
    write_file(&cfg.output_dir, "volume_pdf.csv", &pdf_csv(&volume_pdf))?;
    write_file(&cfg.output_dir, "volatility_pdf.csv", &pdf_csv(&volatility_pdf))?;

    let family = distributions::conditional_pdf(&pooled, &v_bins, &g_bins, 50).map_err(analysis)?;
    for (j, curve) in &family.curves {
        write_file(&cfg.output_dir, &format!("conditional_pdf_bin{j}.csv"), &pdf_csv(curve))?;
    }

    let collapse =
        distributions::scale_collapse(&pooled, &v_bins, cfg.collapse_offset).map_err(analysis)?;
    write_json(&cfg.output_dir, "collapse_report.json", &collapse)?;
    println!(
        "distributions: {} conditional curves, collapse score {:.4} at offset {}",
        family.curves.len(),
        collapse.collapse_score,
        collapse.offset
    );
    Ok(())
}

fn stage_fit(cfg: &RunConfig, universe: &[NormalizedSeries]) -> Result<(), CliError> {
    let pooled = pooled_pairs(universe);
    let n_before = pooled.len();
    let kept: Vec<(f64, f64)> =
        pooled.into_iter().filter(|&(_, v)| v.abs() <= FIT_V_LIMIT).collect();
    let n_excluded = n_before - kept.len();

    let fit = tailfit::fit_conditional_tail(
        &kept,
        cfg.g_min,
        tailfit::DEFAULT_INIT,
        &tailfit::default_bounds(),
    )
    .map_err(analysis)?;
    write_json(
        &cfg.output_dir,
        "fit_report.json",
        &json!({
            "alpha": fit.alpha,
            "beta": fit.beta,
            "a": fit.a,
            "b": fit.b,
            "g_min": fit.g_min,
            "n_tail": fit.n_tail,
            "nll": fit.nll,
            "n_excluded_v": n_excluded,
        }),
    )?;

    let g_grid = Binning::logarithmic(cfg.g_min, 100.0, 40).map_err(analysis)?;
    let grid = tailfit::density_grid(&fit, &g_grid, &volume_binning(cfg)).map_err(analysis)?;
    let mut csv = String::from("g,v,density\n");
    for (i, &g) in grid.g_values.iter().enumerate() {
        for (j, &v) in grid.v_values.iter().enumerate() {
            let _ = writeln!(csv, "{},{},{}", g, v, grid.densities[i][j]);
        }
    }
    write_file(&cfg.output_dir, "density_grid.csv", &csv)?;
    println!(
        "fit: alpha={:.4} beta={:.4} a={:.4} b={:.4} on {} tail samples ({} excluded by |v| > {})",
        fit.alpha, fit.beta, fit.a, fit.b, fit.n_tail, n_excluded, FIT_V_LIMIT
    );
    Ok(())
}

fn stage_lmv(cfg: &RunConfig, universe: &[NormalizedSeries]) -> Result<(), CliError> {
    let bins = volume_binning(cfg);
    let mut curves_written = 0usize;
    for lag in 0..=cfg.max_lag {
        for series in universe {
            let Ok(curve) = lmv::compute_lmv(series, &bins, lag) else {
                continue;
            };
            let mut csv = String::from("bin_center,lmv,date\n");
            for (center, value, date) in curve.occupied_points() {
                let _ = writeln!(csv, "{},{},{}", center, value, date.format("%Y-%m-%d"));
            }
            write_file(&cfg.output_dir, &format!("lmv_lag{lag}_{}.csv", series.ticker), &csv)?;
            curves_written += 1;
        }
    }
    let (profile, skipped) =
        lmv::lag_correlation_profile(universe, cfg.max_lag, &bins).map_err(analysis)?;
    let mut csv = String::from("lag,mean_rho_raw,std_rho_raw,mean_rho_lmv,std_rho_lmv,n_tickers\n");
    for e in &profile {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            e.lag, e.mean_rho_raw, e.std_rho_raw, e.mean_rho_lmv, e.std_rho_lmv, e.n_tickers
        );
    }
    write_file(&cfg.output_dir, "lag_profile.csv", &csv)?;
    println!(
        "lmv: {} curves over lags 0..={}, {} ticker-lag pairs skipped",
        curves_written,
        cfg.max_lag,
        skipped.len()
    );
    Ok(())
}

fn side_name(side: Side) -> &'static str {
    match side {
        Side::Top => "top",
        Side::Bottom => "bottom",
    }
}

fn stage_predict(cfg: &RunConfig, universe: &[NormalizedSeries]) -> Result<(), CliError> {
    for side in [Side::Top, Side::Bottom] {
        for (conditioner, name) in
            [(Conditioner::Volume, "volume"), (Conditioner::Volatility, "volatility")]
        {
            let vec5 = predictor::preceding_quintile_distribution(
                universe,
                conditioner,
                side,
                cfg.extreme_fraction,
            )
            .map_err(analysis)?;
            write_json(
                &cfg.output_dir,
                &format!("quintile_vec_{name}_{}.json", side_name(side)),
                &vec5,
            )?;
        }
        let grid =
            predictor::joint_quintile_grid(universe, side, cfg.extreme_fraction, cfg.quintile_mode)
                .map_err(analysis)?;
        write_json(&cfg.output_dir, &format!("quintile_grid_{}.json", side_name(side)), &grid)?;
    }

    let regression = predictor::regression_r2_uplift(universe).map_err(analysis)?;
    let mut csv = String::from("ticker,r2_g_only,r2_g_and_v,uplift_abs,uplift_rel\n");
    for t in &regression.per_ticker {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            t.ticker, t.r2_g_only, t.r2_g_and_v, t.uplift_abs, t.uplift_rel
        );
    }
    let _ = writeln!(
        csv,
        "ALL,,,{},{}",
        regression.mean_uplift_abs, regression.mean_uplift_rel
    );
    write_file(&cfg.output_dir, "regression_r2.csv", &csv)?;
    println!(
        "predict: {} tickers, mean relative R2 uplift {:.4}",
        regression.per_ticker.len(),
        regression.mean_uplift_rel
    );
    Ok(())
}

fn stage_synth(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = synth_spec(cfg);
    let universe = synth::generate_universe(&spec).map_err(analysis)?;
    synth::write_universe_csv(&cfg.output_dir, &universe, &spec).map_err(analysis)?;
    println!(
        "synth: wrote {} tickers x {} days ({:?}, seed {})",
        spec.n_tickers, spec.n_days, spec.scenario, spec.seed
    );
    Ok(())
}

/// Run one command against a validated configuration.
pub fn run(command: Command, cfg: &RunConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| io_err(&cfg.output_dir, e))?;
    if command == Command::Synth {
        return stage_synth(cfg);
    }
    let (universe, reports) = load_data(cfg)?;
    match command {
        Command::Ingest => stage_ingest(cfg, &universe, &reports),
        Command::Distributions => stage_distributions(cfg, &universe),
        Command::Fit => stage_fit(cfg, &universe),
        Command::Lmv => stage_lmv(cfg, &universe),
        Command::Predict => stage_predict(cfg, &universe),
        Command::All => {
            stage_ingest(cfg, &universe, &reports)?;
            stage_distributions(cfg, &universe)?;
            stage_fit(cfg, &universe)?;
            stage_lmv(cfg, &universe)?;
            stage_predict(cfg, &universe)
        }
        Command::Synth => unreachable!(),
    }
}
