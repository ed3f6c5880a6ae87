//! Command-line surface: configuration, subcommands and their output files.
//!
//! Every subcommand writes into one output directory: its data files plus a
//! `manifest.json` recording the command, the resolved configuration, the
//! seed and the crate version.

use std::f64::consts::PI;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bouncer::{
    self, fit_stationary, heat_cycle_ledger, integrate_bouncer, kinetic_energy,
    max_relative_deviation, net_power_balance, settle_time, stationary_solution, BouncerError,
    HeatCycleLedger, OscState, StationarySolution, WorkMethod,
};
use crate::constants::{
    derive_constants, validate_params, DerivedConstants, ParamError, ParamInput, PhysicalParams,
};
use crate::ensemble::{
    ballistic_evolve, crossover_time, initial_u0, prepare_gaussian_batch, spread_series,
    EnsembleError, GaussianPrep,
};
use crate::output::{write_csv, write_json, ROUND_TRIP_DIGITS};
use crate::rng::domain;
use crate::stats::EstimateWithError;
use crate::verify::{run_all, Report};
use crate::walker::{
    ensemble_msd, ensemble_msv, ensemble_msv_series, fit_diffusion, simulate_ensemble,
    EnsembleSpec, Integrator, NoiseModel, WalkerError,
};

/// Environment variable consulted when `--seed` is absent.
pub const SEED_ENV: &str = "SUBQ_SEED";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("malformed override `{0}`, expected KEY=VALUE")]
    BadOverride(String),
    #[error("override `{key}` conflicts with a non-table value")]
    OverridePath { key: String },
    #[error(transparent)]
    Validation(#[from] ParamError),
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Bouncer(#[from] BouncerError),
    #[error(transparent)]
    Walker(#[from] WalkerError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error("invalid argument: {0}")]
    Argument(String),
}

/// Simulation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunBlock {
    pub seed: u64,
    /// Walker ensemble size.
    pub ensemble_size: usize,
    /// Oscillator step; defaults to a thousandth of the period. It is
    /// snapped so that a whole number of steps spans one period.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// End of the `bouncer` run; defaults to the settling time plus one period.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    /// Walker burn-in in units of `1/ζ`.
    pub burn_in: f64,
    /// Time window of the diffusion fit.
    pub fit_window: [f64; 2],
    /// Walker sampling interval.
    pub walker_dt: f64,
    pub integrator: Integrator,
    /// Initial speed of the velocity-relaxation ensemble.
    pub relaxation_u0: f64,
    /// Grid points of the velocity-relaxation check over `[0, 5/ζ]`.
    pub relaxation_points: usize,
    /// Number of periods `n` in the work-matching check.
    pub work_periods: u64,
}

impl Default for RunBlock {
    fn default() -> Self {
        Self {
            seed: 43,
            ensemble_size: 10_000,
            dt: None,
            t_end: None,
            burn_in: 10.0,
            fit_window: [2.5, 10.0],
            walker_dt: 0.05,
            integrator: Integrator::OuExact,
            relaxation_u0: 2.0,
            relaxation_points: 20,
            work_periods: 100,
        }
    }
}

/// Gaussian beam settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleBlock {
    pub sigma0: Vec<f64>,
    pub x0: f64,
    pub v_conv: f64,
    pub times: Vec<f64>,
    pub size: usize,
}

impl Default for EnsembleBlock {
    fn default() -> Self {
        Self {
            sigma0: vec![0.5, 1.0, 2.0],
            x0: 0.0,
            v_conv: 0.0,
            times: vec![0.0, 1.0, 2.0, 5.0],
            size: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    /// Directory used when `--out` is not given.
    pub dir: PathBuf,
    /// Significant digits of CSV numbers.
    pub precision: usize,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            precision: ROUND_TRIP_DIGITS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub params: ParamInput,
    pub run: RunBlock,
    pub ensemble: EnsembleBlock,
    pub output: OutputBlock,
}

impl RunConfig {
    pub fn params(&self) -> Result<PhysicalParams, ParamError> {
        validate_params(&self.params)
    }

    /// Oscillator steps per period implied by `run.dt`.
    pub fn steps_per_period(&self, p: &PhysicalParams) -> usize {
        match self.run.dt {
            Some(dt) => ((2.0 * PI / p.omega0) / dt).round().max(1.0) as usize,
            None => bouncer::STEPS_PER_PERIOD,
        }
    }

    /// Checks everything beyond the parameter block.
    pub fn check(&self) -> Result<PhysicalParams, ConfigError> {
        let p = self.params()?;
        let invalid = |field, reason: &str| {
            Err(ConfigError::Invalid {
                field,
                reason: reason.to_string(),
            })
        };
        let r = &self.run;
        if r.ensemble_size < 2 {
            return invalid("run.ensemble_size", "need at least 2 walkers");
        }
        if let Some(dt) = r.dt {
            if !(dt > 0.0 && dt <= 2.0 * PI / p.omega0 / 100.0) {
                return invalid("run.dt", "must lie in (0, period/100]");
            }
        }
        if let Some(t) = r.t_end {
            if !(t > 0.0 && t.is_finite()) {
                return invalid("run.t_end", "must be positive");
            }
        }
        if !(r.burn_in >= 0.0 && r.burn_in.is_finite()) {
            return invalid("run.burn_in", "must be non-negative");
        }
        if !(r.walker_dt > 0.0 && r.walker_dt.is_finite()) {
            return invalid("run.walker_dt", "must be positive");
        }
        let [lo, hi] = r.fit_window;
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return invalid("run.fit_window", "need 0 <= lo < hi");
        }
        if !r.relaxation_u0.is_finite() {
            return invalid("run.relaxation_u0", "must be finite");
        }
        if r.relaxation_points < 2 {
            return invalid("run.relaxation_points", "need at least 2 points");
        }
        if r.work_periods == 0 {
            return invalid("run.work_periods", "must be at least 1");
        }
        let e = &self.ensemble;
        if e.sigma0.is_empty() || e.sigma0.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return invalid("ensemble.sigma0", "need one or more positive widths");
        }
        if e.times.is_empty() || e.times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return invalid("ensemble.times", "need one or more non-negative times");
        }
        if e.times.windows(2).any(|w| w[1] < w[0]) {
            return invalid("ensemble.times", "must be non-decreasing");
        }
        if e.size < 2 {
            return invalid("ensemble.size", "need at least 2 particles");
        }
        if !(e.x0.is_finite() && e.v_conv.is_finite()) {
            return invalid("ensemble", "x0 and v_conv must be finite");
        }
        if self.output.precision == 0 || self.output.precision > ROUND_TRIP_DIGITS {
            return invalid("output.precision", "must lie in 1..=17");
        }
        Ok(p)
    }
}

/// Sets `key` (a dotted path) in `table`, creating intermediate tables.
fn apply_override(table: &mut toml::Table, entry: &str) -> Result<(), ConfigError> {
    let (key, raw) = entry
        .split_once('=')
        .ok_or_else(|| ConfigError::BadOverride(entry.to_string()))?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(ConfigError::BadOverride(entry.to_string()));
    }
    // Values are TOML literals; anything that does not parse is a bare string.
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("non-empty key");
    let mut cursor = table;
    for part in parts {
        let slot = cursor
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = slot
            .as_table_mut()
            .ok_or_else(|| ConfigError::OverridePath {
                key: key.to_string(),
            })?;
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}

/// Parses TOML text, applies `--set` overrides and validates the result.
pub fn parse_config_str(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    for entry in overrides {
        apply_override(&mut table, entry)?;
    }
    let cfg = RunConfig::deserialize(toml::Value::Table(table))
        .map_err(|e| ConfigError::Parse(e.to_string()))?;
    cfg.check()?;
    Ok(cfg)
}

/// Reads the config file (if any) and applies overrides.
pub fn parse_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let text = match path {
        Some(path) => fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?,
        None => String::new(),
    };
    parse_config_str(&text, overrides)
}

/// Inclusive frequency grid `start:stop:points`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaRange {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl OmegaRange {
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        let step = if self.points > 1 {
            (self.stop - self.start) / (self.points - 1) as f64
        } else {
            0.0
        };
        (0..self.points).map(move |k| self.start + k as f64 * step)
    }

    pub fn step(&self) -> f64 {
        (self.stop - self.start) / (self.points.max(2) - 1) as f64
    }
}

impl FromStr for OmegaRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts.as_slice() else {
            return Err(format!("expected START:STOP:POINTS, got `{s}`"));
        };
        let start: f64 = a.trim().parse().map_err(|e| format!("start: {e}"))?;
        let stop: f64 = b.trim().parse().map_err(|e| format!("stop: {e}"))?;
        let points: usize = n.trim().parse().map_err(|e| format!("points: {e}"))?;
        if !(start >= 0.0 && stop > start && stop.is_finite()) || points < 2 {
            return Err(format!("need 0 <= START < STOP and POINTS >= 2, got `{s}`"));
        }
        Ok(Self {
            start,
            stop,
            points,
        })
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    program: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    params: PhysicalParams,
    derived: DerivedConstants,
    config: &'a RunConfig,
}

fn write_manifest(
    out: &Path,
    command: &str,
    cfg: &RunConfig,
    p: &PhysicalParams,
) -> io::Result<()> {
    write_json(
        &out.join("manifest.json"),
        &Manifest {
            program: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed: cfg.run.seed,
            params: *p,
            derived: derive_constants(p),
            config: cfg,
        },
    )
}

/// Per-run overrides of the oscillator's drive and initial state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Args)]
pub struct BouncerOptions {
    /// Drive amplitude; replaces the configured value (0 allowed).
    #[arg(long = "F0")]
    pub f0: Option<f64>,
    /// Initial displacement.
    #[arg(long, default_value_t = 0.0)]
    pub x0: f64,
    /// Initial velocity.
    #[arg(long, default_value_t = 0.0)]
    pub v0: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BouncerSummary {
    pub params: PhysicalParams,
    pub dt: f64,
    pub t_end: f64,
    pub stationary: StationarySolution,
    /// Amplitude and phase fitted to the last period.
    pub fitted: Option<StationarySolution>,
    /// Largest deviation from the stationary solution after the settling time.
    pub max_relative_deviation: Option<f64>,
    pub work_analytic: f64,
    pub work_quadrature: Option<f64>,
    pub power_balance: Option<f64>,
    pub heat_ledger: Option<HeatCycleLedger>,
    /// Reasons for any missing entries above.
    pub notes: Vec<String>,
}

/// Integrates the oscillator at resonance and writes `bouncer.csv` and
/// `bouncer.json`.
pub fn cmd_bouncer(
    cfg: &RunConfig,
    opts: &BouncerOptions,
    out: &Path,
) -> Result<BouncerSummary, CliError> {
    let mut p = cfg.check()?;
    if let Some(f0) = opts.f0 {
        if !(f0 >= 0.0 && f0.is_finite()) {
            return Err(CliError::Argument(format!(
                "--F0 must be non-negative, got {f0}"
            )));
        }
        p.f0 = f0;
    }
    let d = derive_constants(&p);
    let tau = 2.0 * PI / p.omega0;
    let dt = tau / cfg.steps_per_period(&p) as f64;
    let t_end = cfg.run.t_end.unwrap_or_else(|| settle_time(&p) + tau);
    let init = OscState {
        x: opts.x0,
        v: opts.v0,
        t: 0.0,
    };
    let traj = integrate_bouncer(&p, p.omega0, init, t_end, dt)?;

    let digits = cfg.output.precision;
    write_csv(
        &out.join("bouncer.csv"),
        &["t", "x", "v", "ekin", "epot", "h"],
        traj.samples.iter().map(|s| {
            let ekin = kinetic_energy(s, &p);
            let epot = 0.5 * p.m * p.omega0 * p.omega0 * s.x * s.x;
            [s.t, s.x, s.v, ekin, epot, ekin + epot]
        }),
        digits,
    )?;

    let mut notes = Vec::new();
    let mut keep = |r: Result<f64, BouncerError>, what: &str| match r {
        Ok(v) => Some(v),
        Err(e) => {
            notes.push(format!("{what}: {e}"));
            None
        }
    };
    let work_quadrature = keep(
        bouncer::work_per_period(&p, &d, WorkMethod::Quadrature(&traj)),
        "work",
    );
    let power_balance = keep(net_power_balance(&traj), "power balance");
    let heat_ledger = match heat_cycle_ledger(&traj) {
        Ok(l) => Some(l),
        Err(e) => {
            notes.push(format!("heat ledger: {e}"));
            None
        }
    };
    let fitted = fit_stationary(&traj).ok();
    let stationary = stationary_solution(&p, p.omega0);
    let settled = settle_time(&p);
    let max_dev = (t_end >= settled && p.f0 > 0.0)
        .then(|| max_relative_deviation(&traj, &stationary, settled));
    let summary = BouncerSummary {
        params: p,
        dt,
        t_end,
        stationary,
        fitted,
        max_relative_deviation: max_dev,
        work_analytic: bouncer::work_per_period(&p, &d, WorkMethod::Analytic)?,
        work_quadrature,
        power_balance,
        heat_ledger,
        notes,
    };
    write_json(&out.join("bouncer.json"), &summary)?;
    write_manifest(out, "bouncer", cfg, &p)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct WalkerSummary {
    pub ensemble_size: usize,
    pub seed: u64,
    /// `(m/2)⟨u²⟩` after burn-in, against `E_zp`.
    pub kinetic_energy: EstimateWithError,
    pub e_zp: f64,
    pub diffusion_fit: EstimateWithError,
    pub diffusion: f64,
    pub fit_window: [f64; 2],
}

/// Equilibrium walker ensemble: writes `walker_summary.csv`, one sample
/// path `walker.csv` and `walker.json` with the fitted diffusion constant.
pub fn cmd_walker(cfg: &RunConfig, out: &Path) -> Result<WalkerSummary, CliError> {
    let p = cfg.check()?;
    let d = derive_constants(&p);
    let model = NoiseModel::from_params(&p, &d);
    let spec = EnsembleSpec {
        count: cfg.run.ensemble_size,
        u0: 0.0,
        burn_in: cfg.run.burn_in / p.zeta,
        duration: cfg.run.fit_window[1],
        dt: cfg.run.walker_dt,
        integrator: cfg.run.integrator,
        master_seed: cfg.run.seed,
        domain: domain::WALKER_EQUILIBRIUM,
    };
    let trajs = simulate_ensemble(&model, &spec)?;
    let digits = cfg.output.precision;
    let msv = ensemble_msv_series(&trajs)?;
    let msd = ensemble_msd(&trajs)?;
    write_csv(
        &out.join("walker_summary.csv"),
        &["t", "msv", "msv_stderr", "msd", "msd_stderr"],
        msv.iter()
            .zip(&msd)
            .map(|((t, v), (_, s))| [*t, v.value, v.stderr, s.value, s.stderr]),
        digits,
    )?;
    write_csv(
        &out.join("walker.csv"),
        &["t", "x", "u"],
        trajs[0].samples.iter().map(|s| [s.t, s.x, s.u]),
        digits,
    )?;
    let window = (cfg.run.fit_window[0], cfg.run.fit_window[1]);
    let summary = WalkerSummary {
        ensemble_size: trajs.len(),
        seed: cfg.run.seed,
        kinetic_energy: ensemble_msv(&trajs, 0.0)?.scale(0.5 * p.m),
        e_zp: d.e_zp,
        diffusion_fit: fit_diffusion(&trajs, window, &model)?,
        diffusion: d.diffusion,
        fit_window: cfg.run.fit_window,
    };
    write_json(&out.join("walker.json"), &summary)?;
    write_manifest(out, "walker", cfg, &p)?;
    Ok(summary)
}

/// Label used in file names for a preparation width.
pub fn sigma_label(sigma0: f64) -> String {
    format!("{sigma0}")
}

/// Ballistic spreading of one beam per configured width: writes
/// `spread_sigma0_<σ₀>.csv`, and with `snapshots` the prepared and final
/// states as `snapshot_sigma0_<σ₀>_t<t>.csv`.
pub fn cmd_ensemble(
    cfg: &RunConfig,
    out: &Path,
    snapshots: bool,
) -> Result<Vec<PathBuf>, CliError> {
    let p = cfg.check()?;
    let d = derive_constants(&p);
    let digits = cfg.output.precision;
    let e = &cfg.ensemble;
    let mut written = Vec::new();
    for (k, &sigma0) in e.sigma0.iter().enumerate() {
        let prep = GaussianPrep {
            sigma0,
            x0: e.x0,
            v_conv: e.v_conv,
            count: e.size,
        };
        let state = prepare_gaussian_batch(&prep, &d, cfg.run.seed, k as u64)?;
        let series = spread_series(&state, &d, sigma0, &e.times)?;
        let path = out.join(format!("spread_sigma0_{}.csv", sigma_label(sigma0)));
        write_csv(
            &path,
            &[
                "t",
                "var_emp",
                "var_stderr",
                "var_ballistic",
                "var_restframe",
            ],
            series.iter().map(|s| {
                [
                    s.t,
                    s.var_emp.value,
                    s.var_emp.stderr,
                    s.var_ballistic,
                    s.var_restframe,
                ]
            }),
            digits,
        )?;
        written.push(path);
        if snapshots {
            let t_last = *e.times.last().expect("times checked non-empty");
            for snap in [state.clone(), ballistic_evolve(&state, t_last)?] {
                let path = out.join(format!(
                    "snapshot_sigma0_{}_t{}.csv",
                    sigma_label(sigma0),
                    snap.t
                ));
                write_csv(
                    &path,
                    &["x", "u"],
                    snap.positions
                        .iter()
                        .zip(&snap.diff_velocities)
                        .map(|(x, u)| [*x, *u]),
                    digits,
                )?;
                written.push(path);
            }
        }
    }
    let crossover: Vec<[f64; 3]> = e
        .sigma0
        .iter()
        .map(|&s| [s, initial_u0(&d, s), crossover_time(s, d.diffusion)])
        .collect();
    let path = out.join("crossover.csv");
    write_csv(&path, &["sigma0", "u0", "t_cross"], crossover, digits)?;
    written.push(path);
    write_manifest(out, "ensemble", cfg, &p)?;
    Ok(written)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepSummary {
    /// Grid frequency with the largest amplitude.
    pub omega_peak: f64,
    pub amplitude_peak: f64,
    /// `√(ω₀² − 2γ²)` when real, else 0.
    pub omega_peak_analytic: f64,
    pub grid_step: f64,
}

/// Amplitude and phase of the stationary response over a frequency grid,
/// written to `sweep.csv`.
pub fn cmd_sweep(
    cfg: &RunConfig,
    range: &OmegaRange,
    out: &Path,
) -> Result<SweepSummary, CliError> {
    let p = cfg.check()?;
    let rows: Vec<[f64; 3]> = range
        .values()
        .map(|w| {
            let s = stationary_solution(&p, w);
            [w, s.amplitude, s.phase]
        })
        .collect();
    write_csv(
        &out.join("sweep.csv"),
        &["omega", "amplitude", "phase"],
        &rows,
        cfg.output.precision,
    )?;
    let peak = rows
        .iter()
        .max_by(|a, b| a[1].total_cmp(&b[1]))
        .expect("range has at least two points");
    let summary = SweepSummary {
        omega_peak: peak[0],
        amplitude_peak: peak[1],
        omega_peak_analytic: bouncer::amplitude_peak_frequency(&p),
        grid_step: range.step(),
    };
    write_json(&out.join("sweep.json"), &summary)?;
    write_manifest(out, "sweep", cfg, &p)?;
    Ok(summary)
}

/// Runs every check and writes `report.json`.
pub fn cmd_verify(cfg: &RunConfig, out: &Path) -> Result<Report, CliError> {
    let p = cfg.check()?;
    let report = run_all(cfg)?;
    write_json(&out.join("report.json"), &report)?;
    write_manifest(out, "verify", cfg, &p)?;
    Ok(report)
}

#[derive(Debug, Parser)]
#[command(
    name = "subq",
    version,
    about = "Bouncer-walker particle model: simulations and checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a config entry, e.g. `--set params.omega0=2` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    /// Master seed; overrides `run.seed`.
    #[arg(long, env = SEED_ENV, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the driven oscillator.
    Bouncer(BouncerOptions),
    /// Simulate an equilibrium walker ensemble.
    Walker,
    /// Spread Gaussian beams ballistically.
    Ensemble {
        /// Also write the prepared and final particle states.
        #[arg(long)]
        snapshots: bool,
    },
    /// Tabulate the stationary amplitude and phase over frequency.
    Sweep {
        #[arg(long, value_name = "START:STOP:POINTS", default_value = "0:2:201")]
        omega: OmegaRange,
    },
    /// Run every check and write report.json; exit status 1 on failure.
    Verify,
}

/// Resolves the configuration of a parsed command line.
pub fn resolve_config(common: &CommonArgs) -> Result<RunConfig, ConfigError> {
    let mut overrides = common.set.clone();
    if let Some(seed) = common.seed {
        overrides.push(format!("run.seed={seed}"));
    }
    parse_config(common.config.as_deref(), &overrides)
}

/// Executes a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32, CliError> {
    let cfg = resolve_config(&cli.common)?;
    let out = cli
        .common
        .out
        .clone()
        .unwrap_or_else(|| cfg.output.dir.clone());
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = cli.common.threads {
            if n == 0 {
                return Err(CliError::Argument("--threads must be at least 1".into()));
            }
            b = b.num_threads(n);
        }
        b.build().map_err(|e| CliError::ThreadPool(e.to_string()))?
    };
    pool.install(|| match &cli.command {
        Command::Bouncer(opts) => {
            let s = cmd_bouncer(&cfg, opts, &out)?;
            println!(
                "bouncer: A = {:.9}, work/period = {}, written to {}",
                s.stationary.amplitude,
                s.work_quadrature
                    .map_or("n/a".into(), |w| format!("{w:.9}")),
                out.display()
            );
            Ok(0)
        }
        Command::Walker => {
            let s = cmd_walker(&cfg, &out)?;
            println!(
                "walker: D_fit = {:.6} ± {:.6} (D = {}), (m/2)<u²> = {:.6} ± {:.6} (E_zp = {})",
                s.diffusion_fit.value,
                s.diffusion_fit.stderr,
                s.diffusion,
                s.kinetic_energy.value,
                s.kinetic_energy.stderr,
                s.e_zp
            );
            Ok(0)
        }
        Command::Ensemble { snapshots } => {
            let files = cmd_ensemble(&cfg, &out, *snapshots)?;
            println!("ensemble: wrote {} files to {}", files.len(), out.display());
            Ok(0)
        }
        Command::Sweep { omega } => {
            let s = cmd_sweep(&cfg, omega, &out)?;
            println!(
                "sweep: peak at ω = {} (A = {:.9}), analytic {:.9}",
                s.omega_peak, s.amplitude_peak, s.omega_peak_analytic
            );
            Ok(0)
        }
        Command::Verify => {
            let report = cmd_verify(&cfg, &out)?;
            for c in &report.checks {
                let verdict = match c.verdict {
                    crate::verify::Verdict::Pass => "pass",
                    crate::verify::Verdict::Fail => "FAIL",
                    crate::verify::Verdict::NotApplicable => "n/a ",
                };
                println!(
                    "{verdict}  {:<40} lhs = {:<24e} rhs = {:e}",
                    c.name, c.lhs, c.rhs
                );
            }
            let failed = report.checks.iter().filter(|c| !c.pass).count();
            println!(
                "{} checks, {} failed; report written to {}",
                report.checks.len(),
                failed,
                out.join("report.json").display()
            );
            Ok(if report.overall_pass { 0 } else { 1 })
        }
    })
}
