mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use holeburn::fit::{
    fit_exponential, fit_hole_lorentzian, fit_linear_ci, fit_trap_model, hom_linewidth_from_hole,
    DecayCurve,
};
use holeburn::integrate::{
    detected_signal, refine_until_converged, scaled_signal, GaussianFocus, SignalTable,
};
use holeburn::io::{
    read_decay_csv, read_scan_csv, read_table, write_scan_csv, write_signal_csv, write_table,
    write_treated_csv, Metadata, SCAN_COLUMNS,
};
use holeburn::synth::{
    gen_decay_curve, gen_hole_decay_series, gen_hole_scan, DecayRequest, RNG_ALGORITHM,
};
use holeburn::trace::{hole_area_with_error, normalize_by_power, subtract_background};
use holeburn::zeeman::resonance_fields;
use serde_json::json;
use thiserror::Error;

use config::Config;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] holeburn::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Core(holeburn::Error::NotConverged { .. }) => 3,
            CliError::Core(holeburn::Error::FitFailed(_)) => 4,
            CliError::Core(_) => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Trapping model, fits and data tools for spectral hole burning experiments.
#[derive(Debug, Parser)]
#[command(name = "holeburn", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file; defaults are used for anything not given.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (or directory for batch generation); stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides `synth.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `integration.rel_tol`.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// AOM-off index range `start:end` (end exclusive).
    #[arg(long, global = true, value_parser = parse_range)]
    aom_off: Option<Range<usize>>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Detected signal S(t) for the configured beam and trap rate.
    Simulate,
    /// Fit measured or synthetic data.
    Fit {
        #[command(subcommand)]
        kind: FitKind,
    },
    /// Resonance fields for the configured laser separations.
    Zeeman {
        /// Laser separation in Hz; repeatable, replaces the configured list.
        #[arg(long = "delta-f")]
        delta_f: Vec<f64>,
    },
    /// Generate synthetic data.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
}

#[derive(Debug, Subcommand)]
enum FitKind {
    /// Global trap-rate fit over one or more decay curves.
    Trap { files: Vec<PathBuf> },
    /// Background subtraction, power normalization and Lorentzian hole fit.
    Hole {
        file: PathBuf,
        /// Also write the treated scan here.
        #[arg(long)]
        treated: Option<PathBuf>,
    },
    /// Exponential decay fit to `time_s,value` columns.
    Expdecay { file: PathBuf },
    /// Straight line with confidence intervals to `x,y` columns.
    Linear { file: PathBuf },
}

#[derive(Debug, Subcommand)]
enum GenKind {
    /// Fluorescence decay curve at the configured beam power.
    Decay {
        /// One curve per configured series power, written into the `--out` directory.
        #[arg(long)]
        series: bool,
    },
    /// Raw two-channel hole scan.
    Hole,
    /// Hole area against wait time.
    Holedecay,
}

fn parse_range(s: &str) -> std::result::Result<Range<usize>, String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected start:end, got `{s}`"))?;
    let a: usize = a
        .trim()
        .parse()
        .map_err(|e| format!("bad start `{a}`: {e}"))?;
    let b: usize = b
        .trim()
        .parse()
        .map_err(|e| format!("bad end `{b}`: {e}"))?;
    if b <= a {
        return Err(format!("empty range {a}:{b}"));
    }
    Ok(a..b)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = Config::load(cli.common.config.as_deref())?;
    if let Some(seed) = cli.common.seed {
        cfg.synth.seed = seed;
    }
    if let Some(tol) = cli.common.tol {
        cfg.integration.rel_tol = Some(tol);
    }
    if let (Some(r), Command::Gen { .. }) = (&cli.common.aom_off, &cli.command) {
        cfg.synth.aom_off_start = r.start;
        cfg.synth.aom_off_end = r.end;
    }
    let out = cli.common.out.as_deref();
    match cli.command {
        Command::Simulate => simulate(&cfg, out),
        Command::Fit { kind } => match kind {
            FitKind::Trap { files } => fit_trap(&cfg, &files, out),
            FitKind::Hole { file, treated } => {
                fit_hole(&cfg, &file, cli.common.aom_off, treated.as_deref(), out)
            }
            FitKind::Expdecay { file } => fit_expdecay(&cfg, &file, out),
            FitKind::Linear { file } => fit_linear(&cfg, &file, out),
        },
        Command::Zeeman { delta_f } => {
            if !delta_f.is_empty() {
                cfg.zeeman.laser_separations_hz = delta_f;
            }
            zeeman(&cfg, out)
        }
        Command::Gen { kind } => match kind {
            GenKind::Decay { series } => gen_decay(&cfg, series, out),
            GenKind::Hole => gen_hole(&cfg, out),
            GenKind::Holedecay => gen_holedecay(&cfg, out),
        },
    }
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| {
            CliError::Input(format!("cannot create {}: {e}", p.display()))
        })?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))
}

fn write_report(out: Option<&Path>, report: &serde_json::Value) -> Result<()> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, report).map_err(|e| CliError::Input(e.to_string()))?;
    writeln!(w).map_err(holeburn::Error::from)?;
    w.flush().map_err(holeburn::Error::from)?;
    Ok(())
}

fn model_signal(cfg: &Config, power: f64) -> Result<SignalTable> {
    let model = cfg.model()?;
    let times = cfg.times()?;
    let profile = GaussianFocus::new(&model, power)?;
    let gamma = cfg.fit.gamma_trap_per_s;
    let domain = cfg.domain();
    Ok(match cfg.integration.rel_tol {
        Some(tol) => refine_until_converged(
            &times,
            &model,
            &profile,
            gamma,
            &domain,
            tol,
            cfg.integration.max_refinements,
        )?,
        None => detected_signal(&times, &model, &profile, gamma, &domain)?,
    })
}

fn signal_meta(cfg: &Config, table: &SignalTable, power: f64) -> Metadata {
    let mut meta = Metadata::new();
    meta.insert("power_w".into(), format!("{power:e}"));
    meta.insert(
        "gamma_trap_per_s".into(),
        format!("{:e}", cfg.fit.gamma_trap_per_s),
    );
    meta.insert("scale_a".into(), format!("{:e}", cfg.fit.scale_a));
    meta.insert(
        "background_b_counts_per_w".into(),
        format!("{:e}", cfg.fit.background_b_counts_per_w),
    );
    let d = &table.meta.domain;
    meta.insert("grid".into(), format!("{}x{}x{}", d.n_r, d.n_z, d.n_delta));
    meta.insert("refinements".into(), table.meta.refinements.to_string());
    if let Some(tol) = table.meta.achieved_tolerance {
        meta.insert("achieved_rel_change".into(), format!("{tol:e}"));
    }
    meta
}

fn simulate(cfg: &Config, out: Option<&Path>) -> Result<()> {
    let power = cfg.beam.power_w;
    let table = model_signal(cfg, power)?;
    let scaled = scaled_signal(&table.model_signal, &cfg.scale(power));
    write_signal_csv(
        sink(out)?,
        &signal_meta(cfg, &table, power),
        &table,
        &scaled,
    )?;
    Ok(())
}

fn fit_trap(cfg: &Config, files: &[PathBuf], out: Option<&Path>) -> Result<()> {
    if files.is_empty() {
        return Err(CliError::Input(
            "fit trap needs at least one decay CSV".into(),
        ));
    }
    let curves = files
        .iter()
        .map(|f| {
            read_decay_csv(open(f)?, None)
                .map(|(c, _)| c)
                .map_err(|e| CliError::Input(format!("{}: {e}", f.display())))
        })
        .collect::<Result<Vec<DecayCurve>>>()?;
    let fit = fit_trap_model(&curves, &cfg.trap_fit()?)?;
    if !fit.converged {
        return Err(holeburn::Error::FitFailed(format!(
            "trap fit did not converge after {} iterations",
            fit.iterations
        ))
        .into());
    }
    write_report(
        out,
        &json!({
            "command": "fit trap",
            "inputs": files,
            "powers_w": curves.iter().map(|c| c.power_w).collect::<Vec<_>>(),
            "result": fit,
            "config": cfg,
        }),
    )
}

fn fit_hole(
    cfg: &Config,
    file: &Path,
    aom_off: Option<Range<usize>>,
    treated: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let in_err = |e: holeburn::Error| CliError::Input(format!("{}: {e}", file.display()));
    let range = match aom_off {
        Some(r) => r,
        None => {
            let t = read_table(open(file)?, &SCAN_COLUMNS).map_err(in_err)?;
            match (
                t.meta_f64("aom_off_start").map_err(in_err)?,
                t.meta_f64("aom_off_end").map_err(in_err)?,
            ) {
                (Some(a), Some(b)) => (a as usize)..(b as usize),
                _ => cfg.aom_off(),
            }
        }
    };
    let (raw, meta) = read_scan_csv(open(file)?, Some(range)).map_err(in_err)?;
    let clean = subtract_background(&raw)?;
    let norm = normalize_by_power(&clean)?;
    if let Some(path) = treated {
        write_treated_csv(sink(Some(path))?, &meta, &clean, &norm)?;
    }
    let idx: Vec<usize> = norm.included().collect();
    let f: Vec<f64> = idx.iter().map(|&i| norm.freq[i]).collect();
    let s: Vec<f64> = idx.iter().map(|&i| norm.signal[i]).collect();
    let fit = fit_hole_lorentzian(&f, &s, None)?;
    let dof = (f.len() as f64 - 4.0).max(1.0);
    let sigma_point = (fit.residual / dof).sqrt();
    let baseline = cfg.fit.area_baseline.unwrap_or(fit.baseline.value);
    let area = hole_area_with_error(&norm, baseline, sigma_point)?;
    write_report(
        out,
        &json!({
            "command": "fit hole",
            "input": file,
            "aom_off_range": [raw.aom_off_range.start, raw.aom_off_range.end],
            "excluded_points": norm.excluded.len(),
            "result": fit,
            "hom_linewidth_hz": hom_linewidth_from_hole(fit.fwhm.value),
            "sigma_point": sigma_point,
            "area": area,
            "config": cfg,
        }),
    )
}

fn fit_expdecay(cfg: &Config, file: &Path, out: Option<&Path>) -> Result<()> {
    let t = read_table(open(file)?, &["time_s", "value"])
        .map_err(|e| CliError::Input(format!("{}: {e}", file.display())))?;
    let fit = fit_exponential(
        &t.column("time_s")?,
        &t.column("value")?,
        cfg.fit.with_offset,
    )?;
    write_report(
        out,
        &json!({ "command": "fit expdecay", "input": file, "result": fit, "config": cfg }),
    )
}

fn fit_linear(cfg: &Config, file: &Path, out: Option<&Path>) -> Result<()> {
    let t = read_table(open(file)?, &["x", "y"])
        .map_err(|e| CliError::Input(format!("{}: {e}", file.display())))?;
    let fit = fit_linear_ci(&t.column("x")?, &t.column("y")?, cfg.fit.confidence)?;
    write_report(
        out,
        &json!({ "command": "fit linear", "input": file, "result": fit, "config": cfg }),
    )
}

pub const ZEEMAN_COLUMNS: [&str; 7] = [
    "delta_f_hz",
    "b_ground_t",
    "b_sum_t",
    "b_diff_t",
    "b_ground_applied_t",
    "b_sum_applied_t",
    "b_diff_applied_t",
];

fn zeeman(cfg: &Config, out: Option<&Path>) -> Result<()> {
    let z = cfg.zeeman();
    let rows = cfg
        .zeeman
        .laser_separations_hz
        .iter()
        .map(|&df| {
            let r = resonance_fields(df, &z)?;
            let (dt, da) = r
                .diff
                .map_or((f64::NAN, f64::NAN), |d| (d.total, d.applied));
            Ok(vec![
                df,
                r.ground.total,
                r.sum.total,
                dt,
                r.ground.applied,
                r.sum.applied,
                da,
            ])
        })
        .collect::<holeburn::Result<Vec<_>>>()?;
    let mut meta = Metadata::new();
    meta.insert("g_ground_hz_per_t".into(), format!("{:e}", z.g_ground));
    meta.insert("g_excited_hz_per_t".into(), format!("{:e}", z.g_excited));
    meta.insert("stray_field_t".into(), format!("{:e}", z.stray_field));
    write_table(sink(out)?, &meta, &ZEEMAN_COLUMNS, &rows)?;
    Ok(())
}

fn gen_meta(cfg: &Config) -> Metadata {
    let mut meta = Metadata::new();
    meta.insert("rng".into(), RNG_ALGORITHM.into());
    meta.insert("seed".into(), cfg.synth.seed.to_string());
    meta.insert(
        "noise".into(),
        format!("{:?}", cfg.synth.noise).to_lowercase(),
    );
    meta
}

fn write_decay(cfg: &Config, power: f64, stream: u64, out: Option<&Path>) -> Result<()> {
    let model = cfg.model()?;
    let domain = cfg.domain();
    let times = cfg.times()?;
    let req = DecayRequest {
        model: &model,
        domain: &domain,
        gamma_trap: cfg.fit.gamma_trap_per_s,
        scale: cfg.scale(power),
        times: &times,
        bin_width_s: cfg.synth.bin_width_s,
    };
    let gen = gen_decay_curve(&req, &cfg.noise(), stream)?;
    let table = SignalTable {
        times: gen.curve.time_s.clone(),
        model_signal: gen.model_signal.clone(),
        meta: holeburn::integrate::SignalMeta {
            domain,
            refinements: 0,
            achieved_tolerance: None,
            converged: None,
        },
    };
    let mut meta = signal_meta(cfg, &table, power);
    meta.extend(gen_meta(cfg));
    meta.insert("stream".into(), stream.to_string());
    meta.insert("bin_width_s".into(), format!("{:e}", cfg.synth.bin_width_s));
    write_signal_csv(sink(out)?, &meta, &table, &gen.curve.counts_per_s)?;
    Ok(())
}

/// File name for one curve of a power series, e.g. `decay_13uW.csv`.
fn series_file_name(power: f64) -> String {
    let uw = power * 1e6;
    let label = if (uw - uw.round()).abs() < 1e-9 {
        format!("{}", uw.round() as i64)
    } else {
        format!("{uw}").replace('.', "p")
    };
    format!("decay_{label}uW.csv")
}

fn gen_decay(cfg: &Config, series: bool, out: Option<&Path>) -> Result<()> {
    if !series {
        return write_decay(cfg, cfg.beam.power_w, 0, out);
    }
    let dir = out.ok_or_else(|| CliError::Input("gen decay --series needs --out DIR".into()))?;
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
    for (i, &p) in cfg.synth.series_powers_w.iter().enumerate() {
        write_decay(cfg, p, i as u64, Some(&dir.join(series_file_name(p))))?;
    }
    Ok(())
}

fn gen_hole(cfg: &Config, out: Option<&Path>) -> Result<()> {
    let spec = cfg.hole_scan();
    let scan = gen_hole_scan(&spec, &cfg.noise(), 0)?;
    let mut meta = gen_meta(cfg);
    meta.insert("aom_off_start".into(), spec.aom_off_range.start.to_string());
    meta.insert("aom_off_end".into(), spec.aom_off_range.end.to_string());
    meta.insert("hole_center_hz".into(), format!("{:e}", spec.center));
    meta.insert("hole_fwhm_hz".into(), format!("{:e}", spec.fwhm));
    meta.insert("hole_depth".into(), format!("{:e}", spec.depth));
    write_scan_csv(sink(out)?, &meta, &scan)?;
    Ok(())
}

fn gen_holedecay(cfg: &Config, out: Option<&Path>) -> Result<()> {
    let s = &cfg.synth;
    let values = gen_hole_decay_series(
        s.decay_amplitude,
        s.decay_tau_s,
        s.decay_offset,
        &s.wait_times_s,
        &cfg.noise(),
        0,
    )?;
    let rows: Vec<Vec<f64>> = s
        .wait_times_s
        .iter()
        .zip(&values)
        .map(|(t, v)| vec![*t, *v])
        .collect();
    let mut meta = gen_meta(cfg);
    meta.insert("tau_s".into(), format!("{:e}", s.decay_tau_s));
    write_table(sink(out)?, &meta, &["time_s", "value"], &rows)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_parsing() {
        assert_eq!(parse_range("0:100").unwrap(), 0..100);
        assert!(parse_range("5:5").is_err());
        assert!(parse_range("a:3").is_err());
        assert!(parse_range("7").is_err());
    }

    #[test]
    fn series_names() {
        assert_eq!(series_file_name(13e-6), "decay_13uW.csv");
        assert_eq!(series_file_name(2.5e-6), "decay_2p5uW.csv");
    }

    #[test]
    fn time_grid() {
        let mut cfg = Config::default();
        cfg.integration.t_end_s = 0.0;
        assert_eq!(cfg.times().unwrap(), vec![0.0]);
        cfg.integration.t_end_s = 3.0;
        cfg.integration.t_step_s = 0.1;
        assert_eq!(cfg.times().unwrap().len(), 31);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<Config>("[beam]\npower_w = 1e-5\n").is_ok());
        assert!(toml::from_str::<Config>("[beam]\npower = 1e-5\n").is_err());
        assert!(toml::from_str::<Config>("[lasers]\n").is_err());
    }
}
