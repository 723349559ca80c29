//! Batch execution: seeded ensembles, the analysis pipeline, parameter
//! sweeps, and the run manifest that makes every output reproducible.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use stoq_clock_core::adiabatic::{
    derive_adiabatic, simulate_bloch, simulate_polar, simulate_telegraph, AdiabaticParams,
    BlochState, TelegraphRecord,
};
use stoq_clock_core::signal::{
    binarize_and_periods, butter2_lowpass, ingest_iq_path, lorentzian_fit, noise_floor_subtract,
    otsu_threshold, periodogram, LorentzFit, PeriodMeta, PeriodSet, Psd, Signal,
};
use stoq_clock_core::sme::SmeEngine;
use stoq_clock_core::stats::{invgauss_fit, jump_period_dist, wald_moments, WaldFit};

use crate::config::{Model, Regime, RunConfig};
use crate::error::CliError;

/// Environment variable naming the default output root.
pub const OUT_ROOT_ENV: &str = "STOQ_CLOCK_OUT";

/// Everything needed to reproduce a run byte-for-byte: the resolved config,
/// per-trajectory seeds, and the produced files.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub config_toml: String,
    pub trajectory_seeds: Vec<u64>,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
    pub warnings: Vec<String>,
}

impl RunManifest {
    fn new(command: &str, cfg: &RunConfig) -> Result<Self, CliError> {
        Ok(RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_toml: resolved_config_toml(cfg)?,
            trajectory_seeds: Vec::new(),
            outputs: Vec::new(),
            wall_clock_seconds: 0.0,
            warnings: Vec::new(),
        })
    }

    fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        fs::write(&path, text)?;
        Ok(path)
    }
}

/// Echo the config with the active sections resolved to their defaults, as a
/// reloadable TOML document.
fn resolved_config_toml(cfg: &RunConfig) -> Result<String, CliError> {
    let mut resolved = cfg.clone();
    match cfg.model {
        Model::FullSme => resolved.full_sme = Some(cfg.full_sme()),
        Model::Bloch => resolved.bloch = Some(cfg.bloch()),
        Model::Polar => resolved.polar = Some(cfg.polar()),
        Model::Telegraph => resolved.telegraph = Some(cfg.telegraph()),
    }
    resolved.pipeline = Some(cfg.pipeline());
    toml::to_string_pretty(&resolved).map_err(|e| CliError::Runtime(e.to_string()))
}

/// Resolve the output directory: explicit flag, then the config, then the
/// environment root, then the current directory.
pub fn resolve_out_dir(cfg: &RunConfig, cli_out: Option<&str>) -> PathBuf {
    if let Some(o) = cli_out {
        return PathBuf::from(o);
    }
    if let Some(o) = &cfg.out_dir {
        let p = PathBuf::from(o);
        if p.is_relative() {
            if let Ok(root) = std::env::var(OUT_ROOT_ENV) {
                return PathBuf::from(root).join(p);
            }
        }
        return p;
    }
    if let Ok(root) = std::env::var(OUT_ROOT_ENV) {
        return PathBuf::from(root);
    }
    PathBuf::from(".")
}

fn write_file(
    dir: &Path,
    name: &str,
    body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
) -> Result<String, CliError> {
    let mut buf = Vec::new();
    body(&mut buf)?;
    fs::write(dir.join(name), buf)?;
    Ok(name.to_string())
}

/// Run `n_trajectories` seeded simulations of the configured model and write
/// one CSV per trajectory. Per-trajectory seed = base seed + index.
pub fn run_simulate(cfg: &RunConfig, out_dir: &Path) -> Result<RunManifest, CliError> {
    cfg.validate()?;
    let started = Instant::now();
    fs::create_dir_all(out_dir)?;
    let mut manifest = RunManifest::new("simulate", cfg)?;
    let seeds: Vec<u64> =
        (0..cfg.n_trajectories).map(|i| cfg.seed.wrapping_add(i as u64)).collect();
    manifest.trajectory_seeds = seeds.clone();

    match cfg.model {
        Model::FullSme => {
            let section = cfg.full_sme();
            let results: Vec<Result<(String, Vec<String>), CliError>> = seeds
                .par_iter()
                .enumerate()
                .map(|(i, &seed)| {
                    let params = section.to_params(seed, 0);
                    let (engine, warnings) = SmeEngine::new(params)?;
                    let rec = engine.simulate_conditional().map_err(|e| {
                        CliError::Runtime(format!("trajectory {i}: {e}"))
                    })?;
                    let name = format!("trajectory_{i:03}.csv");
                    let mut buf = Vec::new();
                    rec.to_csv(&mut buf).map_err(CliError::from)?;
                    fs::write(out_dir.join(&name), buf)?;
                    let mut warns: Vec<String> =
                        warnings.into_iter().map(|w| format!("trajectory {i}: {w}")).collect();
                    warns.extend(rec.warnings.iter().map(|w| format!("trajectory {i}: {w}")));
                    Ok((name, warns))
                })
                .collect();
            for r in results {
                let (name, warns) = r?;
                manifest.outputs.push(name);
                manifest.warnings.extend(warns);
            }
        }
        Model::Bloch => {
            let section = cfg.bloch();
            let params = section.to_params()?;
            let start = BlochState {
                x: section.start[0],
                y: section.start[1],
                z: section.start[2],
            };
            let results: Vec<Result<(String, Vec<String>), CliError>> = seeds
                .par_iter()
                .enumerate()
                .map(|(i, &seed)| {
                    let run = section.to_run(seed);
                    let series = simulate_bloch(&params, start, &run, section.noise_mode)
                        .map_err(|e| CliError::Runtime(format!("trajectory {i}: {e}")))?;
                    let name = format!("bloch_{i:03}.csv");
                    let mut buf = Vec::new();
                    series.to_csv(&mut buf).map_err(CliError::from)?;
                    fs::write(out_dir.join(&name), buf)?;
                    let warns =
                        series.warnings.iter().map(|w| format!("trajectory {i}: {w}")).collect();
                    Ok((name, warns))
                })
                .collect();
            for r in results {
                let (name, warns) = r?;
                manifest.outputs.push(name);
                manifest.warnings.extend(warns);
            }
        }
        Model::Polar => {
            let section = cfg.polar();
            let params = section.to_params()?;
            for (i, &seed) in seeds.iter().enumerate() {
                let run = stoq_clock_core::adiabatic::SdeRun {
                    dt: section.dt,
                    duration: section.duration,
                    seed,
                    stream: 0,
                    record_stride: section.record_stride,
                };
                let series = simulate_polar(&params, section.theta0, section.phi0, &run)
                    .map_err(|e| CliError::Runtime(format!("trajectory {i}: {e}")))?;
                let name = format!("polar_{i:03}.csv");
                manifest.outputs.push(write_file(out_dir, &name, |buf| series.to_csv(buf))?);
            }
        }
        Model::Telegraph => {
            let section = cfg.telegraph();
            let rates = section.to_rates()?;
            for (i, &seed) in seeds.iter().enumerate() {
                let rec = simulate_telegraph(&rates, section.duration, seed)
                    .map_err(|e| CliError::Runtime(format!("trajectory {i}: {e}")))?;
                let name = format!("telegraph_{i:03}.csv");
                manifest.outputs.push(write_file(out_dir, &name, |buf| rec.to_csv(buf))?);
            }
        }
    }

    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    manifest.write(out_dir)?;
    Ok(manifest)
}

/// A parsed column table.
struct Table {
    headers: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Table {
    fn col(&self, name: &str) -> Option<&[f64]> {
        self.headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .map(|i| self.columns[i].as_slice())
    }
}

fn read_table(path: &Path) -> Result<Table, CliError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Runtime(format!("{}: empty file", path.display())))?;
    let headers: Vec<String> = header.split(',').map(|h| h.trim().to_string()).collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != headers.len() {
            return Err(CliError::Runtime(format!(
                "{}:{}: expected {} fields, got {}",
                path.display(),
                lineno + 2,
                headers.len(),
                fields.len()
            )));
        }
        for (c, f) in fields.iter().enumerate() {
            let v: f64 = f.trim().parse().map_err(|e| {
                CliError::Runtime(format!("{}:{}: {e}", path.display(), lineno + 2))
            })?;
            columns[c].push(v);
        }
    }
    Ok(Table { headers, columns })
}

enum InputKind {
    /// time column plus named value columns
    Series(Table),
    /// telegraph event list
    Events(TelegraphRecord),
    /// raw IQ or single-column data
    Raw,
}

fn classify_input(path: &Path) -> Result<InputKind, CliError> {
    let text = fs::read_to_string(path)?;
    let header = text.lines().next().unwrap_or("").to_lowercase();
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    if names.first() == Some(&"t") && names.contains(&"state") {
        let table = read_table(path)?;
        let t = table.col("t").unwrap();
        let state = table.col("state").unwrap();
        if t.len() < 2 {
            return Err(CliError::Runtime(format!("{}: too few events", path.display())));
        }
        let duration = *t.last().unwrap();
        // rows after the initial state and before the final echo are jumps
        let mut jump_times = Vec::new();
        let mut prev_state = state[0];
        for i in 1..t.len() {
            if state[i] != prev_state {
                jump_times.push(t[i]);
                prev_state = state[i];
            }
        }
        return Ok(InputKind::Events(TelegraphRecord { jump_times, duration }));
    }
    if names.first() == Some(&"t") {
        return Ok(InputKind::Series(read_table(path)?));
    }
    Ok(InputKind::Raw)
}

/// Results of the pipeline over one input set.
#[derive(Default)]
struct PooledAnalysis {
    periods: Vec<f64>,
    psds: Vec<Psd>,
    ground_time: f64,
    ground_dwell_time: f64,
    ground_dwell_count: usize,
    excited_dwell_time: f64,
    excited_dwell_count: usize,
    total_time: f64,
    warnings: Vec<String>,
}

impl PooledAnalysis {
    fn up_rate(&self) -> Option<f64> {
        (self.ground_dwell_count > 0)
            .then(|| self.ground_dwell_count as f64 / self.ground_dwell_time)
    }

    fn down_rate(&self) -> Option<f64> {
        (self.excited_dwell_count > 0)
            .then(|| self.excited_dwell_count as f64 / self.excited_dwell_time)
    }

    fn ground_fraction(&self) -> Option<f64> {
        (self.total_time > 0.0).then(|| self.ground_time / self.total_time)
    }
}

fn analyze_signal(
    sig: &Signal,
    cfg: &RunConfig,
    pooled: &mut PooledAnalysis,
    label: &str,
) -> Result<(), CliError> {
    let pipe = cfg.pipeline();
    // periodogram runs on the raw (mean-subtracted, optionally decimated)
    // record so spectra are not colored by the clock filter
    let mut raw = sig.decimate(pipe.psd_stride);
    raw.subtract_mean();
    let seg = if pipe.segment_length == 0 || pipe.segment_length > raw.len() {
        raw.len()
    } else {
        pipe.segment_length
    };
    if seg >= 4 {
        match periodogram(&raw, seg, pipe.overlap) {
            Ok(psd) => pooled.psds.push(psd),
            Err(e) => pooled.warnings.push(format!("{label}: periodogram: {e}")),
        }
    }

    // clock extraction on the filtered record; the causal filter needs a
    // settling window, which is dropped before any statistics
    let cutoff = cfg.cutoff();
    let filtered = if cutoff > 0.0 && cutoff < sig.fs / 2.0 {
        let mut f = butter2_lowpass(sig, cutoff)?;
        let settle = ((10.0 * sig.fs / (2.0 * std::f64::consts::PI * cutoff)) as usize)
            .min(f.len() / 4);
        f.samples.drain(..settle);
        f
    } else {
        pooled
            .warnings
            .push(format!("{label}: cutoff {cutoff} outside (0, fs/2); filter skipped"));
        sig.clone()
    };
    let (_, periods) = binarize_and_periods(&filtered);
    if periods.periods.is_empty() {
        pooled.warnings.push(format!("{label}: no periods extracted"));
    }
    pooled.periods.extend(periods.periods);

    // dwell statistics against the configured or Otsu threshold
    let threshold = pipe.threshold.or_else(|| otsu_threshold(&filtered.samples));
    if let Some(th) = threshold {
        match stoq_clock_core::signal::telegraph_stats(&filtered, th) {
            Ok(st) => {
                let span = filtered.len() as f64 / filtered.fs;
                pooled.ground_time += st.ground_fraction * span;
                pooled.total_time += span;
                if let Some(m) = st.mean_ground_dwell {
                    pooled.ground_dwell_time += m * st.n_ground_segments as f64;
                    pooled.ground_dwell_count += st.n_ground_segments;
                }
                if let Some(m) = st.mean_excited_dwell {
                    pooled.excited_dwell_time += m * st.n_excited_segments as f64;
                    pooled.excited_dwell_count += st.n_excited_segments;
                }
            }
            Err(e) => pooled.warnings.push(format!("{label}: dwell statistics: {e}")),
        }
    } else {
        pooled.warnings.push(format!("{label}: no threshold (degenerate histogram)"));
    }
    Ok(())
}

fn fs_of(t: &[f64], label: &str) -> Result<f64, CliError> {
    if t.len() < 2 {
        return Err(CliError::Runtime(format!("{label}: record too short")));
    }
    let dt = t[1] - t[0];
    if !(dt > 0.0) {
        return Err(CliError::Runtime(format!("{label}: non-increasing time column")));
    }
    Ok(1.0 / dt)
}

/// Run the signal-processing pipeline over every recognized CSV in
/// `input_dir`; writes periods, the averaged PSD, and the fit reports.
pub fn run_analyze(
    cfg: &RunConfig,
    input_dir: &Path,
    out_dir: &Path,
) -> Result<RunManifest, CliError> {
    cfg.validate()?;
    let started = Instant::now();
    fs::create_dir_all(out_dir)?;
    let mut manifest = RunManifest::new("analyze", cfg)?;
    let pipe = cfg.pipeline();

    let mut inputs: Vec<PathBuf> = fs::read_dir(input_dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.extension().map(|x| x == "csv").unwrap_or(false)
                && !matches!(
                    p.file_name().and_then(|n| n.to_str()),
                    Some("periods.csv") | Some("psd.csv") | Some("summary.csv")
                )
        })
        .collect();
    inputs.sort();
    if inputs.is_empty() {
        return Err(CliError::Runtime(format!(
            "no input CSVs found in {}",
            input_dir.display()
        )));
    }

    let mut pooled = PooledAnalysis::default();
    for path in &inputs {
        let label = path.file_name().and_then(|n| n.to_str()).unwrap_or("?").to_string();
        match classify_input(path)? {
            InputKind::Series(table) => {
                let t = table.col("t").unwrap();
                let fs = fs_of(t, &label)?;
                let col = table.col(&pipe.column).or_else(|| table.col("z"));
                let Some(values) = col else {
                    manifest
                        .warnings
                        .push(format!("{label}: column '{}' not found; skipped", pipe.column));
                    continue;
                };
                let sig = Signal::new(fs, values.to_vec())?;
                analyze_signal(&sig, cfg, &mut pooled, &label)?;
            }
            InputKind::Events(rec) => {
                pooled.periods.extend(rec.periods());
                let ground: Vec<f64> = rec.dwell_times(-1);
                let excited: Vec<f64> = rec.dwell_times(1);
                pooled.ground_dwell_time += ground.iter().sum::<f64>();
                pooled.ground_dwell_count += ground.len();
                pooled.excited_dwell_time += excited.iter().sum::<f64>();
                pooled.excited_dwell_count += excited.len();
                // occupation from the full event list
                let mut t_ground = 0.0;
                let mut prev = 0.0;
                let mut state = -1i8;
                for &t in rec.jump_times.iter().chain(std::iter::once(&rec.duration)) {
                    if state == -1 {
                        t_ground += t - prev;
                    }
                    prev = t;
                    state = -state;
                }
                pooled.ground_time += t_ground;
                pooled.total_time += rec.duration;
            }
            InputKind::Raw => {
                let (sig, report) = ingest_iq_path(path, pipe.fs)?;
                manifest
                    .warnings
                    .extend(report.warnings.iter().map(|w| format!("{label}: {w}")));
                analyze_signal(&sig, cfg, &mut pooled, &label)?;
            }
        }
    }
    manifest.warnings.append(&mut pooled.warnings);

    // periods
    let period_set = PeriodSet {
        periods: pooled.periods.clone(),
        meta: PeriodMeta {
            source: "analysis".into(),
            filter_cutoff: Some(cfg.cutoff()),
            threshold: pipe.threshold,
            warnings: Vec::new(),
        },
    };
    manifest.outputs.push(write_file(out_dir, "periods.csv", |buf| period_set.to_csv(buf))?);
    if period_set.periods.is_empty() {
        manifest.warnings.push("empty period set".into());
    }

    // averaged PSD and the Lorentzian peak
    let mut lorentz: Option<LorentzFit> = None;
    if !pooled.psds.is_empty() {
        match Psd::average(&pooled.psds) {
            Ok(avg) => {
                manifest.outputs.push(write_file(out_dir, "psd.csv", |buf| avg.to_csv(buf))?);
                match noise_floor_subtract(&avg, pipe.poly_degree)
                    .and_then(|sub| lorentzian_fit(&sub))
                {
                    Ok(fit) => {
                        manifest
                            .warnings
                            .extend(fit.warnings.iter().map(|w| format!("lorentzian: {w}")));
                        let name = "lorentzian.json";
                        let text = serde_json::to_string_pretty(&fit)
                            .map_err(|e| CliError::Runtime(e.to_string()))?;
                        fs::write(out_dir.join(name), text)?;
                        manifest.outputs.push(name.into());
                        lorentz = Some(fit);
                    }
                    Err(e) => manifest.warnings.push(format!("lorentzian fit: {e}")),
                }
            }
            Err(e) => manifest.warnings.push(format!("psd averaging: {e}")),
        }
    }
    let _ = lorentz;

    // distribution fits per regime
    match cfg.regime() {
        Regime::Rabi => {
            match invgauss_fit(&period_set) {
                Ok(fit) => {
                    if fit.degenerate {
                        manifest
                            .warnings
                            .push("inverse-Gaussian fit degenerate: lambda -> infinity".into());
                    }
                    let text = serde_json::to_string_pretty(&fit)
                        .map_err(|e| CliError::Runtime(e.to_string()))?;
                    fs::write(out_dir.join("invgauss.json"), text)?;
                    manifest.outputs.push("invgauss.json".into());
                }
                Err(e) => manifest.warnings.push(format!("inverse-Gaussian fit: {e}")),
            }
        }
        Regime::Jump => {
            let stats = json!({
                "ground_fraction": pooled.ground_fraction(),
                "up_rate": pooled.up_rate(),
                "down_rate": pooled.down_rate(),
                "n_ground_segments": pooled.ground_dwell_count,
            });
            fs::write(
                out_dir.join("telegraph_stats.json"),
                serde_json::to_string_pretty(&stats).map_err(|e| CliError::Runtime(e.to_string()))?,
            )?;
            manifest.outputs.push("telegraph_stats.json".into());
            if let (Some(mu), Some(nu)) = (pooled.up_rate(), pooled.down_rate()) {
                match stoq_clock_core::adiabatic::JumpRates::new(mu, nu)
                    .and_then(|r| jump_period_dist(&r))
                {
                    Ok(dist) => {
                        let text = serde_json::to_string_pretty(&dist.stats)
                            .map_err(|e| CliError::Runtime(e.to_string()))?;
                        fs::write(out_dir.join("jump_period.json"), text)?;
                        manifest.outputs.push("jump_period.json".into());
                    }
                    Err(e) => manifest.warnings.push(format!("jump-period stats: {e}")),
                }
            } else {
                manifest.warnings.push("dwell rates undefined; jump-period stats skipped".into());
            }
        }
    }

    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    manifest.write(out_dir)?;
    Ok(manifest)
}

/// Swept variable of a parameter sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    Omega,
    EDrive,
    N0,
}

impl std::str::FromStr for SweepVar {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s.to_ascii_lowercase().as_str() {
            "omega" => Ok(SweepVar::Omega),
            "e" | "e_drive" => Ok(SweepVar::EDrive),
            "n0" => Ok(SweepVar::N0),
            other => Err(CliError::Config(format!(
                "unknown sweep variable '{other}' (expected Omega, E, or n0)"
            ))),
        }
    }
}

fn apply_sweep_value(cfg: &RunConfig, var: SweepVar, value: f64) -> Result<RunConfig, CliError> {
    let mut point = cfg.clone();
    match cfg.model {
        Model::FullSme => {
            let mut s = cfg.full_sme();
            match var {
                SweepVar::Omega => s.omega = value,
                SweepVar::EDrive => s.e_drive = value,
                SweepVar::N0 => s.e_drive = s.kappa * value.sqrt() / 2.0,
            }
            point.full_sme = Some(s);
        }
        Model::Bloch => {
            let mut s = cfg.bloch();
            match var {
                SweepVar::Omega => s.omega = value,
                SweepVar::N0 => s.n0 = value,
                SweepVar::EDrive => s.n0 = (2.0 * value / s.kappa).powi(2),
            }
            point.bloch = Some(s);
        }
        Model::Polar => {
            let mut s = cfg.polar();
            match var {
                SweepVar::Omega => s.omega = value,
                SweepVar::N0 => s.n0 = value,
                SweepVar::EDrive => s.n0 = (2.0 * value / s.kappa).powi(2),
            }
            point.polar = Some(s);
        }
        Model::Telegraph => {
            let mut s = cfg.telegraph();
            if s.mu.is_some() || s.nu.is_some() {
                return Err(CliError::Config(
                    "telegraph sweeps need the physical (omega, gamma_meas, gamma) form".into(),
                ));
            }
            match var {
                SweepVar::Omega => s.omega = Some(value),
                _ => {
                    return Err(CliError::Config(
                        "telegraph sweeps support the Omega variable only".into(),
                    ));
                }
            }
            point.telegraph = Some(s);
        }
    }
    Ok(point)
}

fn adiabatic_of(cfg: &RunConfig) -> Option<AdiabaticParams> {
    match cfg.model {
        Model::FullSme => derive_adiabatic(&cfg.full_sme().to_params(cfg.seed, 0)).ok(),
        Model::Bloch => cfg.bloch().to_params().ok(),
        Model::Polar => cfg.polar().to_params().ok(),
        Model::Telegraph => None,
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.8e}"),
        _ => String::new(),
    }
}

/// One summary row per sweep point: the closed-form clock statistics of the
/// point's reduced model, the empirical fit results, and a status flag.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub f0: Option<f64>,
    pub wald_m: Option<f64>,
    pub wald_lambda: Option<f64>,
    pub snr: Option<f64>,
    pub dissipation: Option<f64>,
    pub ground_fraction: Option<f64>,
    pub up_rate: Option<f64>,
    pub wald_m_fit: Option<f64>,
    pub wald_lambda_fit: Option<f64>,
    pub status: String,
}

pub const SUMMARY_HEADER: &str = "value,f0,wald_m,wald_lambda,snr,dissipation,ground_fraction,up_rate,wald_m_fit,wald_lambda_fit,status";

/// Simulate and analyze each sweep point in its own subdirectory and collect
/// a summary CSV. Per-point failures mark the row and the sweep continues.
pub fn run_sweep(
    cfg: &RunConfig,
    var: SweepVar,
    values: &[f64],
    out_dir: &Path,
) -> Result<RunManifest, CliError> {
    cfg.validate()?;
    if values.len() < 3 {
        return Err(CliError::Config("sweeps need at least 3 points".into()));
    }
    let started = Instant::now();
    fs::create_dir_all(out_dir)?;
    let mut manifest = RunManifest::new("sweep", cfg)?;
    let mut rows: Vec<SweepRow> = Vec::with_capacity(values.len());

    for (i, &value) in values.iter().enumerate() {
        let point_dir = out_dir.join(format!("point_{i:03}"));
        let row = run_sweep_point(cfg, var, value, &point_dir);
        match row {
            Ok((row, mut warns)) => {
                manifest.warnings.append(&mut warns);
                rows.push(row);
            }
            Err(e) => {
                manifest.warnings.push(format!("point {i} (value {value}): {e}"));
                rows.push(SweepRow {
                    value,
                    f0: None,
                    wald_m: None,
                    wald_lambda: None,
                    snr: None,
                    dissipation: None,
                    ground_fraction: None,
                    up_rate: None,
                    wald_m_fit: None,
                    wald_lambda_fit: None,
                    status: "failed".into(),
                });
            }
        }
    }

    manifest.outputs.push(write_file(out_dir, "summary.csv", |buf| {
        writeln!(buf, "{SUMMARY_HEADER}")?;
        for r in &rows {
            writeln!(
                buf,
                "{},{},{},{},{},{},{},{},{},{},{}",
                format!("{:.8e}", r.value),
                fmt_opt(r.f0),
                fmt_opt(r.wald_m),
                fmt_opt(r.wald_lambda),
                fmt_opt(r.snr),
                fmt_opt(r.dissipation),
                fmt_opt(r.ground_fraction),
                fmt_opt(r.up_rate),
                fmt_opt(r.wald_m_fit),
                fmt_opt(r.wald_lambda_fit),
                r.status
            )?;
        }
        Ok(())
    })?);

    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    manifest.write(out_dir)?;
    Ok(manifest)
}

fn run_sweep_point(
    cfg: &RunConfig,
    var: SweepVar,
    value: f64,
    point_dir: &Path,
) -> Result<(SweepRow, Vec<String>), CliError> {
    let point_cfg = apply_sweep_value(cfg, var, value)?;
    point_cfg.validate()?;
    let sim = run_simulate(&point_cfg, point_dir)?;
    let ana = run_analyze(&point_cfg, point_dir, point_dir)?;
    let mut warns: Vec<String> = sim
        .warnings
        .iter()
        .chain(ana.warnings.iter())
        .map(|w| format!("value {value}: {w}"))
        .collect();

    // closed forms from the reduced model of this point
    let adiabatic = adiabatic_of(&point_cfg);
    let (wald_m, wald_lambda, snr) = match &adiabatic {
        Some(p) if p.gamma_meas > 0.0 && p.omega > 0.0 => {
            match wald_moments(p.omega, p.gamma_meas) {
                Ok(w) => (Some(w.m), Some(w.lambda), Some(w.snr)),
                Err(_) => (None, None, None),
            }
        }
        _ => (None, None, None),
    };

    // empirical fit results from the point's analysis artifacts
    let lorentz: Option<LorentzFit> = fs::read_to_string(point_dir.join("lorentzian.json"))
        .ok()
        .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
        .and_then(|v| {
            Some(LorentzFit {
                f0: v.get("f0")?.as_f64()?,
                width: v.get("width")?.as_f64()?,
                amp: v.get("amp")?.as_f64()?,
                offset: v.get("offset")?.as_f64()?,
                residual: v.get("residual")?.as_f64()?,
                warnings: Vec::new(),
            })
        });
    let wald_fit: Option<WaldFit> = fs::read_to_string(point_dir.join("invgauss.json"))
        .ok()
        .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
        .map(|v| WaldFit {
            m: v.get("m").and_then(|x| x.as_f64()).unwrap_or(f64::NAN),
            lambda: v.get("lambda").and_then(|x| x.as_f64()).unwrap_or(f64::INFINITY),
            variance: v.get("variance").and_then(|x| x.as_f64()).unwrap_or(f64::NAN),
            snr: v.get("snr").and_then(|x| x.as_f64()).unwrap_or(f64::NAN),
            ks: v.get("ks").and_then(|x| x.as_f64()),
            degenerate: false,
        });

    let telegraph: Option<serde_json::Value> =
        fs::read_to_string(point_dir.join("telegraph_stats.json"))
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok());
    let ground_fraction =
        telegraph.as_ref().and_then(|v| v.get("ground_fraction")).and_then(|x| x.as_f64());
    let up_rate = telegraph.as_ref().and_then(|v| v.get("up_rate")).and_then(|x| x.as_f64());

    // dissipation: kappa * n0 photon flux plus the qubit emission term at the
    // observed mean Z (photon units)
    let mean_z = mean_z_of_outputs(point_dir, &point_cfg).unwrap_or(0.0);
    let dissipation = adiabatic.as_ref().and_then(|p| {
        stoq_clock_core::stats::dissipation_rate(
            &stoq_clock_core::stats::DissipationParams::photon_units(p.kappa, p.n0, p.gamma),
            mean_z.clamp(-1.0, 1.0),
        )
        .ok()
    });

    let row = SweepRow {
        value,
        f0: lorentz.as_ref().map(|l| l.f0),
        wald_m,
        wald_lambda,
        snr,
        dissipation,
        ground_fraction,
        up_rate,
        wald_m_fit: wald_fit.as_ref().map(|w| w.m),
        wald_lambda_fit: wald_fit.as_ref().and_then(|w| w.lambda.is_finite().then_some(w.lambda)),
        status: "ok".into(),
    };
    warns.retain(|w| !w.contains("dt*max"));
    Ok((row, warns))
}

/// Mean of the population column across the point's simulation outputs.
fn mean_z_of_outputs(dir: &Path, cfg: &RunConfig) -> Option<f64> {
    let col = match cfg.model {
        Model::FullSme => "z",
        Model::Bloch => "Z",
        _ => return None,
    };
    let mut sum = 0.0;
    let mut count = 0usize;
    for entry in fs::read_dir(dir).ok()? {
        let path = entry.ok()?.path();
        let name = path.file_name()?.to_str()?;
        if !(name.starts_with("trajectory_") || name.starts_with("bloch_")) {
            continue;
        }
        let table = read_table(&path).ok()?;
        if let Some(z) = table.col(col) {
            sum += z.iter().sum::<f64>();
            count += z.len();
        }
    }
    (count > 0).then(|| sum / count as f64)
}
