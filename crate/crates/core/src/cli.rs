//! Command-line front end.
//!
//! Config files are flat `key = value` lines; `#` starts a comment. Every
//! frequency is ν = ω/2π in Hz. `ensemble.n`, `ensemble.mode` and
//! `oscillator.kappa_hz` accept comma-separated lists; `sweep` runs one curve
//! per combination and the single-point subcommands take the first entry.
//!
//! Exit codes: 0 success (including flagged physics), 1 usage, 2 config,
//! 3 parameter domain, 4 solver failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::analytic::{self, PhotonOutcome};
use crate::error::{Error, Result};
use crate::lindblad::{self, ModelOptions, SteadyStateOptions};
use crate::model::{
    derive_circuit_params, hz_to_rad, rad_to_hz, thermal_occupation, DriveParams, EnsembleConfig,
    EnsembleMode, OscillatorParams, QubitParams, RawCircuitParams, RegimeThresholds, SystemConfig,
};
use crate::sweep::{self, Grid, SweepSpec, SweepVariable};

pub const CONFIG_KEYS: [&str; 25] = [
    "qubit.delta_hz",
    "qubit.epsilon_hz",
    "qubit.gamma_hz",
    "oscillator.omega_c_hz",
    "oscillator.kappa_hz",
    "oscillator.nbar",
    "oscillator.temperature_k",
    "coupling.g_hz",
    "circuit.inductance_h",
    "circuit.capacitance_f",
    "circuit.mutual_h",
    "circuit.persistent_current_a",
    "ensemble.n",
    "ensemble.mode",
    "drive.mode",
    "drive.delta_omega_over_omega",
    "drive.omega_hz",
    "drive.rabi_hz",
    "oracle.n_max",
    "oracle.tolerance",
    "sweep.var",
    "sweep.min",
    "sweep.max",
    "sweep.steps",
    "sweep.values",
];

/// Raw `key = value` pairs, keyed by name, with their line numbers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    entries: BTreeMap<String, (usize, String)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line_no}: expected `key = value`")))?;
            let (k, v) = (k.trim(), v.trim());
            if !CONFIG_KEYS.contains(&k) {
                return Err(Error::Config(format!("line {line_no}: unknown key `{k}`")));
            }
            if v.is_empty() {
                return Err(Error::Config(format!("line {line_no}: `{k}` has no value")));
            }
            if entries.insert(k.to_string(), (line_no, v.to_string())).is_some() {
                return Err(Error::Config(format!("line {line_no}: `{k}` given twice")));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn float(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Config(format!("`{key}`: `{v}` is not a number")))
            })
            .transpose()
    }

    fn require(&self, key: &str) -> Result<f64> {
        self.float(key)?
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<T>()
                            .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{}`", s.trim())))
                    })
                    .collect()
            })
            .transpose()
    }
}

/// Command-line settings that replace config values.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub mode: Option<EnsembleMode>,
    pub n: Option<usize>,
    pub detuning: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub variable: SweepVariable,
    /// Grid in config units: δω/Ω, N, or κ/2π in Hz.
    pub grid: Grid,
}

/// A fully resolved config.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// First entry of every list.
    pub system: SystemConfig,
    pub modes: Vec<EnsembleMode>,
    pub n_values: Vec<usize>,
    /// rad/s.
    pub kappa_values: Vec<f64>,
    pub oracle_n_max: Option<usize>,
    pub oracle_tolerance: f64,
    pub sweep: Option<SweepSettings>,
}

impl RunConfig {
    pub fn from_file(file: &ConfigFile, ov: &Overrides) -> Result<Self> {
        let qubit = QubitParams {
            delta: hz_to_rad(file.require("qubit.delta_hz")?),
            epsilon: hz_to_rad(file.require("qubit.epsilon_hz")?),
            gamma: hz_to_rad(file.require("qubit.gamma_hz")?),
        };

        let circuit_keys = [
            "circuit.inductance_h",
            "circuit.capacitance_f",
            "circuit.mutual_h",
            "circuit.persistent_current_a",
        ];
        let n_circuit = circuit_keys.iter().filter(|k| file.has(k)).count();
        let (omega_c, coupling) = match (file.has("coupling.g_hz"), n_circuit) {
            (true, 0) => (
                hz_to_rad(file.require("oscillator.omega_c_hz")?),
                hz_to_rad(file.require("coupling.g_hz")?),
            ),
            (false, 4) => {
                let raw = RawCircuitParams {
                    inductance: file.require("circuit.inductance_h")?,
                    capacitance: file.require("circuit.capacitance_f")?,
                    mutual_inductance: file.require("circuit.mutual_h")?,
                    persistent_current: file.require("circuit.persistent_current_a")?,
                };
                let (wc, g) = derive_circuit_params(&raw)?;
                if let Some(given) = file.float("oscillator.omega_c_hz")? {
                    if (hz_to_rad(given) - wc).abs() > 1e-6 * wc {
                        return Err(Error::Config(format!(
                            "oscillator.omega_c_hz = {given} disagrees with the circuit's 1/sqrt(LC) = {} Hz",
                            rad_to_hz(wc)
                        )));
                    }
                }
                (wc, g)
            }
            (false, 0) => {
                return Err(Error::Config(
                    "give either coupling.g_hz or all four circuit.* keys".into(),
                ))
            }
            (true, _) => {
                return Err(Error::Config(
                    "coupling.g_hz and circuit.* are mutually exclusive".into(),
                ))
            }
            (false, _) => {
                return Err(Error::Config(
                    "circuit.* needs all of inductance_h, capacitance_f, mutual_h, persistent_current_a".into(),
                ))
            }
        };

        let kappa_values: Vec<f64> = file
            .list::<f64>("oscillator.kappa_hz")?
            .ok_or_else(|| Error::Config("missing required key `oscillator.kappa_hz`".into()))?
            .into_iter()
            .map(hz_to_rad)
            .collect();
        let nbar = match (file.float("oscillator.nbar")?, file.float("oscillator.temperature_k")?) {
            (Some(n), None) => n,
            (None, Some(t)) => thermal_occupation(omega_c, t)?,
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "oscillator.nbar and oscillator.temperature_k are mutually exclusive".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config(
                    "give one of oscillator.nbar or oscillator.temperature_k".into(),
                ))
            }
        };

        let mut modes = file
            .list::<EnsembleMode>("ensemble.mode")?
            .unwrap_or_else(|| vec![EnsembleMode::Independent]);
        let mut n_values = file.list::<usize>("ensemble.n")?.unwrap_or_else(|| vec![1]);
        if let Some(m) = ov.mode {
            modes = vec![m];
        }
        if let Some(n) = ov.n {
            n_values = vec![n];
        }
        if modes.is_empty() || n_values.is_empty() || kappa_values.is_empty() {
            return Err(Error::Config("empty list".into()));
        }

        let drive_mode = file.get("drive.mode").unwrap_or("locked");
        let drive = if let Some(r) = ov.detuning {
            DriveParams::locked(r, omega_c)
        } else {
            match drive_mode {
                "locked" => {
                    for k in ["drive.omega_hz", "drive.rabi_hz"] {
                        if file.has(k) {
                            return Err(Error::Config(format!("`{k}` needs drive.mode = explicit")));
                        }
                    }
                    DriveParams::locked(file.require("drive.delta_omega_over_omega")?, omega_c)
                }
                "explicit" => {
                    if file.has("drive.delta_omega_over_omega") {
                        return Err(Error::Config(
                            "drive.delta_omega_over_omega needs drive.mode = locked".into(),
                        ));
                    }
                    // δω = ΔE − ω.
                    let omega = hz_to_rad(file.require("drive.omega_hz")?);
                    DriveParams::explicit(
                        qubit.transition_frequency() - omega,
                        hz_to_rad(file.require("drive.rabi_hz")?),
                    )
                }
                other => {
                    return Err(Error::Config(format!(
                        "drive.mode must be locked or explicit, got `{other}`"
                    )))
                }
            }
        };

        let oracle_n_max = file
            .float("oracle.n_max")?
            .map(|v| {
                if v >= 1.0 && v.fract() == 0.0 {
                    Ok(v as usize)
                } else {
                    Err(Error::Config(format!("oracle.n_max must be a positive integer, got {v}")))
                }
            })
            .transpose()?;
        let oracle_tolerance = file.float("oracle.tolerance")?.unwrap_or(1e-8);
        if !(oracle_tolerance > 0.0 && oracle_tolerance < 1.0) {
            return Err(Error::Config("oracle.tolerance must lie in (0, 1)".into()));
        }

        let sweep = sweep_settings(file)?;

        Ok(Self {
            system: SystemConfig {
                qubit,
                drive,
                oscillator: OscillatorParams {
                    omega_c,
                    kappa: kappa_values[0],
                    nbar,
                },
                coupling,
                ensemble: EnsembleConfig {
                    n_qubits: n_values[0],
                    mode: modes[0],
                },
            },
            modes,
            n_values,
            kappa_values,
            oracle_n_max,
            oracle_tolerance,
            sweep,
        })
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let s = self
            .sweep
            .as_ref()
            .ok_or_else(|| Error::Config("sweep needs sweep.min/max/steps or sweep.values".into()))?;
        let grid = match (&s.grid, s.variable) {
            (Grid::Linear { min, max, steps }, SweepVariable::Kappa) => Grid::Linear {
                min: hz_to_rad(*min),
                max: hz_to_rad(*max),
                steps: *steps,
            },
            (Grid::List(v), SweepVariable::Kappa) => Grid::List(v.iter().map(|x| hz_to_rad(*x)).collect()),
            (g, _) => g.clone(),
        };
        Ok(SweepSpec {
            base: self.system,
            variable: s.variable,
            grid,
            modes: self.modes.clone(),
            n_values: self.n_values.clone(),
            kappa_values: self.kappa_values.clone(),
            thresholds: RegimeThresholds::default(),
        })
    }
}

fn sweep_settings(file: &ConfigFile) -> Result<Option<SweepSettings>> {
    let any = ["sweep.var", "sweep.min", "sweep.max", "sweep.steps", "sweep.values"]
        .iter()
        .any(|k| file.has(k));
    if !any {
        return Ok(None);
    }
    let variable = file
        .get("sweep.var")
        .map(str::parse)
        .transpose()?
        .unwrap_or(SweepVariable::DetuningRatio);
    let ranged = ["sweep.min", "sweep.max", "sweep.steps"].iter().any(|k| file.has(k));
    let grid = match (file.list::<f64>("sweep.values")?, ranged) {
        (Some(v), false) => Grid::List(v),
        (None, true) => {
            let steps = file.require("sweep.steps")?;
            if !(steps >= 0.0 && steps.fract() == 0.0) {
                return Err(Error::Usage(format!("sweep.steps must be a whole number, got {steps}")));
            }
            Grid::Linear {
                min: file.require("sweep.min")?,
                max: file.require("sweep.max")?,
                steps: steps as usize,
            }
        }
        (Some(_), true) => {
            return Err(Error::Config("sweep.values excludes sweep.min/max/steps".into()))
        }
        (None, false) => return Err(Error::Config("sweep.var needs a grid".into())),
    };
    Ok(Some(SweepSettings { variable, grid }))
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) => 1,
        Error::Config(_) | Error::Io(_) | Error::Csv(_) => 2,
        Error::InvalidParameter { .. }
        | Error::DetuningOutOfRange { .. }
        | Error::NonPositiveTemperature(_)
        | Error::NonPositiveEffectiveLinewidth(_)
        | Error::DivisionByZeroCoupling
        | Error::AboveThreshold { .. } => 3,
        Error::DimensionTooLarge { .. }
        | Error::NonConvergence { .. }
        | Error::StepSizeUnderflow { .. }
        | Error::MismatchedGrids(_)
        | Error::EmptyTable => 4,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Independent,
    Collective,
}

impl From<ModeArg> for EnsembleMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Independent => EnsembleMode::Independent,
            ModeArg::Collective => EnsembleMode::Collective,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "circuit-cooling", version, about = "Resonator cooling by driven flux qubits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Config file (`key = value`, frequencies in Hz).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the CSV table here instead of stdout (sweep) or in addition to the report.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
    /// Number of qubits.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// δω/Ω with Ω locked to ω_c.
    #[arg(long, global = true, allow_hyphen_values = true)]
    detuning: Option<f64>,
    /// Fock cutoff: table length for `dist`, fixed oracle truncation for `validate`.
    #[arg(long, global = true)]
    nmax: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Dressed-frame rates and the regime check.
    Dressed,
    /// Closed-form steady photon statistics.
    Steady,
    /// Parameter sweep to CSV.
    Sweep,
    /// Closed form against the master-equation oracle.
    Validate,
    /// Photon-number distribution.
    Dist,
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Usage("--config PATH is required".into()))?;
    let file = ConfigFile::load(path)?;
    let ov = Overrides {
        mode: cli.mode.map(Into::into),
        n: cli.n,
        detuning: cli.detuning,
    };
    if ov.n == Some(0) {
        return Err(Error::Usage("--n must be at least 1".into()));
    }
    let cfg = RunConfig::from_file(&file, &ov)?;
    match cli.command {
        Command::Dressed => cmd_dressed(&cfg, cli.out.as_deref(), out),
        Command::Steady => cmd_steady(&cfg, cli.out.as_deref(), out),
        Command::Sweep => cmd_sweep(&cfg, cli.out.as_deref(), out),
        Command::Validate => cmd_validate(&cfg, cli.nmax, out),
        Command::Dist => cmd_dist(&cfg, cli.nmax.unwrap_or(20), out),
    }
}

/// Shortest decimal form of `x` rounded to 9 significant digits.
fn fmt(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let r: f64 = format!("{x:.8e}").parse().unwrap_or(x);
    r.to_string()
}

fn write_single_record(cfg: &SystemConfig, path: Option<&Path>) -> Result<()> {
    if let Some(p) = path {
        let rec = sweep::evaluate_point(cfg, &RegimeThresholds::default());
        sweep::write_csv_file(&[rec], p)?;
    }
    Ok(())
}

pub fn cmd_dressed(cfg: &RunConfig, csv_out: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let sys = &cfg.system;
    let fr = sys.frame()?;
    let regime = crate::model::regime_check(&fr, &sys.ensemble, &sys.oscillator, &RegimeThresholds::default());
    let hz = |x: f64| fmt(rad_to_hz(x));
    let g = fr.gamma;
    writeln!(out, "# dressed frame, frequencies as ω/2π in Hz")?;
    writeln!(out, "mode = {}", sys.ensemble.mode)?;
    writeln!(out, "n_qubits = {}", sys.ensemble.n_qubits)?;
    writeln!(out, "delta_e_hz = {}", hz(fr.delta_e))?;
    writeln!(out, "cos2theta = {}", fmt(fr.cos2theta))?;
    writeln!(out, "sin2theta = {}", fmt(fr.sin2theta))?;
    writeln!(out, "delta_omega_hz = {}", hz(fr.delta_omega))?;
    writeln!(out, "delta_omega_over_omega = {}", fmt(fr.delta_omega / fr.omega_rabi))?;
    writeln!(out, "omega_rabi_hz = {}", hz(fr.omega_rabi))?;
    writeln!(out, "rabi_bare_hz = {}", hz(fr.rabi_bare))?;
    writeln!(out, "cos_sq_xi = {}", fmt(fr.cos_sq_xi))?;
    writeln!(out, "sin_sq_xi = {}", fmt(fr.sin_sq_xi))?;
    writeln!(out, "g_hz = {}", hz(fr.g))?;
    writeln!(out, "g_tilde_hz = {}", hz(fr.g_tilde))?;
    writeln!(out, "g0_hz = {}", hz(fr.g0))?;
    writeln!(out, "gamma_hz = {}", hz(g))?;
    writeln!(out, "gamma_plus_hz = {}", hz(fr.gamma_plus))?;
    writeln!(out, "gamma_minus_hz = {}", hz(fr.gamma_minus))?;
    writeln!(out, "gamma_zero_hz = {}", hz(fr.gamma_zero))?;
    writeln!(out, "gamma_perp_hz = {}", hz(fr.gamma_perp))?;
    writeln!(out, "gamma_perp_over_gamma = {}", fmt(fr.gamma_perp / g))?;
    writeln!(out, "f = {}", fmt(fr.f))?;
    writeln!(out, "cavity_detuning_hz = {}", hz(fr.cavity_detuning))?;
    writeln!(out, "# regime check (ratio, status)")?;
    for e in &regime.entries {
        writeln!(out, "{} = {} {}", e.name, fmt(e.ratio()), e.status)?;
    }
    writeln!(out, "regime_overall = {}", regime.overall)?;
    write_single_record(sys, csv_out)
}

pub fn cmd_steady(cfg: &RunConfig, csv_out: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let sys = &cfg.system;
    let sol = analytic::solve(sys, &RegimeThresholds::default())?;
    writeln!(out, "mode = {}", sys.ensemble.mode)?;
    writeln!(out, "n_qubits = {}", sys.ensemble.n_qubits)?;
    writeln!(out, "delta_omega_over_omega = {}", fmt(sol.frame.delta_omega / sol.frame.omega_rabi))?;
    writeln!(out, "nbar = {}", fmt(sys.oscillator.nbar))?;
    writeln!(out, "a_rate_hz = {}", fmt(rad_to_hz(sol.pump.a_rate)))?;
    writeln!(out, "b_rate_hz = {}", fmt(rad_to_hz(sol.pump.b_rate)))?;
    writeln!(out, "gamma_up_hz = {}", fmt(rad_to_hz(sol.rates.gamma_up)))?;
    writeln!(out, "gamma_down_hz = {}", fmt(rad_to_hz(sol.rates.gamma_down)))?;
    writeln!(out, "eta = {}", fmt(sol.rates.eta))?;
    writeln!(out, "n_saturation = {}", fmt(sol.n_saturation))?;
    match sol.outcome {
        PhotonOutcome::Steady(s) => {
            writeln!(out, "n_mean = {}", fmt(s.n_mean))?;
            writeln!(out, "g2 = {}", fmt(s.g2))?;
            writeln!(out, "saturation_ok = {}", s.below_saturation as u8)?;
            writeln!(out, "regime_ok = {}", s.regime_ok as u8)?;
            writeln!(out, "above_threshold = 0")?;
            if let Ok(t) = analytic::cooling_time_scale(&sol.rates, &sol.frame, &sys.ensemble) {
                writeln!(out, "cooling_rate_model_hz = {}", fmt(rad_to_hz(t.model_rate)))?;
                writeln!(out, "cooling_rate_bound_hz = {}", fmt(rad_to_hz(t.physical_bound)))?;
            }
        }
        PhotonOutcome::AboveThreshold { eta, regime_ok } => {
            writeln!(out, "above_threshold = 1")?;
            writeln!(out, "regime_ok = {}", regime_ok as u8)?;
            writeln!(
                out,
                "note: AboveThreshold (eta = {}); the reduced equation has no steady state",
                fmt(eta)
            )?;
        }
    }
    write_single_record(sys, csv_out)
}

pub fn cmd_sweep(cfg: &RunConfig, csv_out: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let spec = cfg.sweep_spec()?;
    let table = sweep::run_sweep(&spec)?;
    match csv_out {
        Some(p) => {
            let bytes = sweep::write_csv_file(&table, p)?;
            let flagged = table.iter().filter(|r| r.error.is_some()).count();
            writeln!(
                out,
                "wrote {} records ({bytes} bytes) to {}; {flagged} points failed",
                table.len(),
                p.display()
            )?;
        }
        None => {
            sweep::emit_csv(&table, &mut *out)?;
        }
    }
    Ok(())
}

struct Comparison {
    point: &'static str,
    quantity: &'static str,
    analytic: f64,
    oracle: f64,
    /// `None` for informational rows.
    tolerance: Option<f64>,
}

impl Comparison {
    fn deviation(&self) -> f64 {
        let d = (self.oracle - self.analytic).abs();
        if self.analytic == 0.0 {
            d
        } else {
            d / self.analytic.abs()
        }
    }

    fn verdict(&self) -> &'static str {
        match self.tolerance {
            None => "info",
            Some(t) if self.deviation() <= t => "PASS",
            Some(_) => "FAIL",
        }
    }
}

/// Oracle run with adaptive or fixed truncation.
fn oracle(sys: &SystemConfig, n_max: Option<usize>, tail: f64) -> Result<lindblad::Observables> {
    let frame = sys.frame()?;
    let opts = ModelOptions {
        tail_tolerance: tail,
        ..ModelOptions::default()
    };
    let solver = SteadyStateOptions::default();
    match n_max {
        Some(n) => {
            let m = lindblad::build_model_with(&frame, &sys.ensemble, &sys.oscillator, &ModelOptions { n_max: n, ..opts })?;
            let rho = lindblad::steady_state_with(&m, &solver)?;
            Ok(m.observables(&rho.state))
        }
        None => Ok(lindblad::steady_state_adaptive(&frame, &sys.ensemble, &sys.oscillator, &opts, &solver, None)?.observables),
    }
}

fn compare(point: &'static str, sys: &SystemConfig, n_max: Option<usize>, tail: f64, tol: Option<f64>) -> Result<Vec<Comparison>> {
    let sol = analytic::solve(sys, &RegimeThresholds::default())?;
    let obs = oracle(sys, n_max, tail)?;
    let mut rows = Vec::new();
    if let PhotonOutcome::Steady(s) = sol.outcome {
        rows.push(Comparison { point, quantity: "n_mean", analytic: s.n_mean, oracle: obs.n_mean, tolerance: tol });
        rows.push(Comparison { point, quantity: "g2", analytic: s.g2, oracle: obs.g2, tolerance: tol });
    } else {
        rows.push(Comparison { point, quantity: "n_mean", analytic: f64::INFINITY, oracle: obs.n_mean, tolerance: None });
    }
    rows.push(Comparison { point, quantity: "rz", analytic: sol.inversion(), oracle: obs.rz, tolerance: tol });
    Ok(rows)
}

pub fn cmd_validate(cfg: &RunConfig, n_max: Option<usize>, out: &mut dyn Write) -> Result<()> {
    let sys = &cfg.system;
    let n_max = n_max.or(cfg.oracle_n_max);
    let tail = cfg.oracle_tolerance;
    let separated = lindblad::scale_separated_config(sys, 0.6)?;
    let mut rows = compare("scale-separated", &separated, n_max, tail, Some(0.1))?;
    let decoupled = sys.frame()?.g_tilde == 0.0;
    rows.extend(compare("config", sys, n_max, tail, decoupled.then_some(1e-8))?);

    writeln!(out, "point,quantity,analytic,oracle,rel_deviation,tolerance,result")?;
    for r in &rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.point,
            r.quantity,
            fmt(r.analytic),
            fmt(r.oracle),
            fmt(r.deviation()),
            r.tolerance.map(fmt).unwrap_or_else(|| "-".into()),
            r.verdict()
        )?;
    }
    let failed = rows.iter().filter(|r| r.verdict() == "FAIL").count();
    writeln!(out, "{}", if failed == 0 { "validate: PASS".to_string() } else { format!("validate: FAIL ({failed} rows)") })?;
    Ok(())
}

pub fn cmd_dist(cfg: &RunConfig, n_max: usize, out: &mut dyn Write) -> Result<()> {
    let sol = analytic::solve(&cfg.system, &RegimeThresholds::default())?;
    if sol.rates.is_above_threshold() {
        writeln!(
            out,
            "AboveThreshold: eta = {}; no normalizable photon distribution",
            fmt(sol.rates.eta)
        )?;
        return Ok(());
    }
    let p = analytic::photon_distribution(&sol.rates, n_max)?;
    writeln!(out, "n,probability,cumulative")?;
    let mut cum = 0.0;
    for (n, pn) in p.iter().enumerate() {
        cum += pn;
        writeln!(out, "{n},{},{}", fmt(*pn), fmt(cum))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG2: &str = "\
qubit.delta_hz = 3e9
qubit.epsilon_hz = 3e7
qubit.gamma_hz = 1e5
oscillator.omega_c_hz = 1e7
oscillator.kappa_hz = 1e3
oscillator.nbar = 4
coupling.g_hz = 1e6   # bare coupling
ensemble.n = 30
ensemble.mode = independent
drive.delta_omega_over_omega = 0.6
";

    fn cfg(text: &str) -> Result<RunConfig> {
        RunConfig::from_file(&ConfigFile::parse(text)?, &Overrides::default())
    }

    #[test]
    fn reference_file_matches_the_builtin_point() {
        let c = cfg(FIG2).unwrap();
        let r = SystemConfig::reference(0.6, 30, EnsembleMode::Independent);
        assert!((c.system.qubit.delta - r.qubit.delta).abs() < 1e-6);
        assert_eq!(c.system.ensemble, r.ensemble);
        assert!((c.system.drive.delta_omega - r.drive.delta_omega).abs() < 1e-6);
    }

    #[test]
    fn config_errors() {
        assert!(matches!(cfg(&FIG2.replace("qubit.gamma_hz = 1e5\n", "")), Err(Error::Config(_))));
        assert!(matches!(cfg(&format!("{FIG2}bogus.key = 1\n")), Err(Error::Config(_))));
        assert!(matches!(cfg(&format!("{FIG2}oscillator.temperature_k = 0.1\n")), Err(Error::Config(_))));
        assert!(matches!(cfg(&FIG2.replace("oscillator.nbar = 4\n", "")), Err(Error::Config(_))));
        assert!(matches!(cfg(&format!("{FIG2}circuit.mutual_h = 1e-12\n")), Err(Error::Config(_))));
        assert!(matches!(cfg(&format!("{FIG2}qubit.delta_hz = 1\n")), Err(Error::Config(_))));
        assert!(matches!(cfg(&FIG2.replace("= 0.6", "= abc")), Err(Error::Config(_))));
    }

    #[test]
    fn temperature_and_circuit_inputs() {
        let t = crate::model::temperature_for_occupation(hz_to_rad(1e7), 4.0).unwrap();
        let text = FIG2.replace("oscillator.nbar = 4", &format!("oscillator.temperature_k = {t:e}"));
        assert!((cfg(&text).unwrap().system.oscillator.nbar - 4.0).abs() < 1e-9);

        let raw = crate::model::synthesize_circuit_params(hz_to_rad(1e7), hz_to_rad(1e6), 1e-9, 5e-7).unwrap();
        let text = FIG2.replace("coupling.g_hz = 1e6   # bare coupling\n", "").replace("oscillator.omega_c_hz = 1e7\n", "")
            + &format!(
                "circuit.inductance_h = {:e}\ncircuit.capacitance_f = {:e}\ncircuit.mutual_h = {:e}\ncircuit.persistent_current_a = {:e}\n",
                raw.inductance, raw.capacitance, raw.mutual_inductance, raw.persistent_current
            );
        let c = cfg(&text).unwrap();
        assert!((rad_to_hz(c.system.coupling) - 1e6).abs() < 1e-3);
        assert!((rad_to_hz(c.system.oscillator.omega_c) - 1e7).abs() < 1e-2);
    }

    #[test]
    fn explicit_drive_sets_the_detuning() {
        let text = FIG2.replace(
            "drive.delta_omega_over_omega = 0.6\n",
            "drive.mode = explicit\ndrive.omega_hz = 3000000000\ndrive.rabi_hz = 8e6\n",
        );
        let c = cfg(&text).unwrap();
        let de = c.system.qubit.transition_frequency();
        assert!((c.system.drive.delta_omega - (de - hz_to_rad(3e9))).abs() < 1e-3);
    }

    #[test]
    fn lists_and_overrides() {
        let text = FIG2.replace("ensemble.n = 30", "ensemble.n = 1, 10, 30")
            .replace("oscillator.kappa_hz = 1e3", "oscillator.kappa_hz = 1e3, 1e2");
        let f = ConfigFile::parse(&text).unwrap();
        let c = RunConfig::from_file(&f, &Overrides::default()).unwrap();
        assert_eq!(c.n_values, vec![1, 10, 30]);
        assert_eq!(c.kappa_values.len(), 2);
        assert_eq!(c.system.ensemble.n_qubits, 1);
        let c = RunConfig::from_file(
            &f,
            &Overrides { mode: Some(EnsembleMode::Collective), n: Some(7), detuning: Some(-0.2) },
        )
        .unwrap();
        assert_eq!(c.system.ensemble, EnsembleConfig { n_qubits: 7, mode: EnsembleMode::Collective });
        assert!((c.system.drive.delta_omega + 0.2 * c.system.oscillator.omega_c).abs() < 1e-6);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Usage("x".into())), 1);
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::DetuningOutOfRange { delta_omega: 2.0, omega: 1.0 }), 3);
        assert_eq!(exit_code(&Error::DimensionTooLarge { reason: "x".into() }), 4);
    }

    #[test]
    fn formatting_rounds_to_nine_digits() {
        assert_eq!(fmt(16.000000000003), "16");
        assert_eq!(fmt(1.32), "1.32");
        assert_eq!(fmt(f64::INFINITY), "inf");
    }
}
