//! Parameter sweeps of the closed-form chain and their CSV form.
//!
//! CSV columns, in order:
//!
//! ```text
//! mode, n_qubits, delta_omega_hz, delta_omega_over_omega, gamma_plus_hz,
//! gamma_minus_hz, gamma_zero_hz, gamma_perp_hz, g_tilde_hz, a_rate_hz,
//! b_rate_hz, gamma_up_hz, gamma_down_hz, eta, n_mean, n_saturation,
//! regime_ok, saturation_ok, above_threshold, kappa_hz, nbar
//! ```
//!
//! Every `*_hz` column is ω/2π. `gamma_perp_hz` is the coherence decay rate
//! that enters A and B (Γ̃⊥ for collective decay with N > 1). Numbers carry 12
//! significant digits, flags are 0/1, and values that do not exist at a point
//! (everything after a failed frame, `n_mean` above threshold) are empty.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::analytic;
use crate::error::{Error, Result};
use crate::model::{rad_to_hz, hz_to_rad, EnsembleMode, RegimeThresholds, SystemConfig};

pub const CSV_COLUMNS: [&str; 21] = [
    "mode",
    "n_qubits",
    "delta_omega_hz",
    "delta_omega_over_omega",
    "gamma_plus_hz",
    "gamma_minus_hz",
    "gamma_zero_hz",
    "gamma_perp_hz",
    "g_tilde_hz",
    "a_rate_hz",
    "b_rate_hz",
    "gamma_up_hz",
    "gamma_down_hz",
    "eta",
    "n_mean",
    "n_saturation",
    "regime_ok",
    "saturation_ok",
    "above_threshold",
    "kappa_hz",
    "nbar",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    /// δω/Ω with Ω locked to ω_c.
    DetuningRatio,
    QubitCount,
    /// κ in rad/s.
    Kappa,
}

impl SweepVariable {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::DetuningRatio => "delta_omega_over_omega",
            Self::QubitCount => "n_qubits",
            Self::Kappa => "kappa",
        }
    }
}

impl FromStr for SweepVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "delta_omega_over_omega" | "detuning" => Ok(Self::DetuningRatio),
            "n_qubits" | "n" => Ok(Self::QubitCount),
            "kappa" | "kappa_hz" => Ok(Self::Kappa),
            other => Err(Error::Config(format!(
                "unknown sweep variable `{other}` (expected delta_omega_over_omega, n_qubits or kappa)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    Linear { min: f64, max: f64, steps: usize },
    List(Vec<f64>),
}

impl Grid {
    /// `min == max` collapses to a single point whatever `steps` is.
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            Grid::Linear { min, max, steps } => {
                if !(min.is_finite() && max.is_finite()) {
                    return Err(Error::Usage("grid bounds must be finite".into()));
                }
                if min == max {
                    return Ok(vec![*min]);
                }
                if *steps < 2 {
                    return Err(Error::Usage(format!("sweep needs at least 2 steps, got {steps}")));
                }
                if min > max {
                    return Err(Error::Usage(format!("sweep min {min} exceeds max {max}")));
                }
                let n = *steps - 1;
                Ok((0..=n)
                    .map(|i| if i == n { *max } else { min + (max - min) * i as f64 / n as f64 })
                    .collect())
            }
            Grid::List(v) => {
                if v.is_empty() {
                    return Err(Error::Usage("sweep list is empty".into()));
                }
                Ok(v.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: SystemConfig,
    pub variable: SweepVariable,
    pub grid: Grid,
    pub modes: Vec<EnsembleMode>,
    /// Curves per qubit count; ignored when sweeping N.
    pub n_values: Vec<usize>,
    /// Curves per κ (rad/s); ignored when sweeping κ.
    pub kappa_values: Vec<f64>,
    pub thresholds: RegimeThresholds,
}

impl SweepSpec {
    /// Sweep of δω/Ω over `grid` with every other input taken from `base`.
    pub fn detuning(base: SystemConfig, grid: Grid) -> Self {
        Self {
            base,
            variable: SweepVariable::DetuningRatio,
            grid,
            modes: vec![base.ensemble.mode],
            n_values: vec![base.ensemble.n_qubits],
            kappa_values: vec![base.oscillator.kappa],
            thresholds: RegimeThresholds::default(),
        }
    }

    /// Configurations in output order: mode, N, κ, then grid value.
    pub fn points(&self) -> Result<Vec<SystemConfig>> {
        let grid = self.grid.values()?;
        if self.modes.is_empty() {
            return Err(Error::Usage("no ensemble mode selected".into()));
        }
        if let SweepVariable::DetuningRatio = self.variable {
            if let Some(x) = grid.iter().find(|x| !(x.abs() < 1.0)) {
                return Err(Error::Usage(format!("|δω/Ω| must stay below 1, grid contains {x}")));
            }
        }
        let ns = match self.variable {
            SweepVariable::QubitCount => vec![0],
            _ if self.n_values.is_empty() => vec![self.base.ensemble.n_qubits],
            _ => self.n_values.clone(),
        };
        let kappas = match self.variable {
            SweepVariable::Kappa => vec![f64::NAN],
            _ if self.kappa_values.is_empty() => vec![self.base.oscillator.kappa],
            _ => self.kappa_values.clone(),
        };
        let mut out = Vec::new();
        for &mode in &self.modes {
            for &n in &ns {
                for &kappa in &kappas {
                    for &x in &grid {
                        let mut cfg = self.base;
                        cfg.ensemble.mode = mode;
                        cfg.ensemble.n_qubits = n;
                        cfg.oscillator.kappa = kappa;
                        match self.variable {
                            SweepVariable::DetuningRatio => cfg = cfg.with_detuning_ratio(x),
                            SweepVariable::QubitCount => {
                                if !(x >= 1.0 && x.fract() == 0.0) {
                                    return Err(Error::Usage(format!("qubit count {x} is not a positive integer")));
                                }
                                cfg.ensemble.n_qubits = x as usize;
                            }
                            SweepVariable::Kappa => cfg.oscillator.kappa = x,
                        }
                        out.push(cfg);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// One grid point. Rates are rad/s; `None` marks a value that does not exist.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub mode: EnsembleMode,
    pub n_qubits: usize,
    pub delta_omega: f64,
    pub delta_omega_over_omega: f64,
    pub kappa: f64,
    pub nbar: f64,
    pub gamma_plus: Option<f64>,
    pub gamma_minus: Option<f64>,
    pub gamma_zero: Option<f64>,
    pub gamma_perp: Option<f64>,
    pub g_tilde: Option<f64>,
    pub a_rate: Option<f64>,
    pub b_rate: Option<f64>,
    pub gamma_up: Option<f64>,
    pub gamma_down: Option<f64>,
    pub eta: Option<f64>,
    pub n_mean: Option<f64>,
    pub n_saturation: Option<f64>,
    pub regime_ok: bool,
    pub saturation_ok: bool,
    pub above_threshold: bool,
    /// Why the point has no values; not serialized.
    pub error: Option<String>,
}

impl SweepRecord {
    /// Bare γ, recovered as γ₊ + γ₋ + 2γ₀.
    pub fn gamma(&self) -> Option<f64> {
        Some(self.gamma_plus? + self.gamma_minus? + 2.0 * self.gamma_zero?)
    }

    /// γ for independent qubits, Nγ for collective decay.
    pub fn cooling_rate_bound(&self) -> Option<f64> {
        let g = self.gamma()?;
        Some(match self.mode {
            EnsembleMode::Independent => g,
            EnsembleMode::Collective => self.n_qubits as f64 * g,
        })
    }

    /// 2(Γ₋ − Γ₊), the relaxation rate of ⟨n⟩.
    pub fn model_rate(&self) -> Option<f64> {
        Some(2.0 * (self.gamma_down? - self.gamma_up?))
    }

    /// η > 1, ⟨n⟩ < n̄, and both validity flags set.
    pub fn is_cooling(&self) -> bool {
        match (self.n_mean, self.eta) {
            (Some(n), Some(eta)) => eta > 1.0 && n < self.nbar && self.regime_ok && self.saturation_ok,
            _ => false,
        }
    }
}

pub fn evaluate_point(cfg: &SystemConfig, thresholds: &RegimeThresholds) -> SweepRecord {
    let mut rec = SweepRecord {
        mode: cfg.ensemble.mode,
        n_qubits: cfg.ensemble.n_qubits,
        delta_omega: cfg.drive.delta_omega,
        delta_omega_over_omega: f64::NAN,
        kappa: cfg.oscillator.kappa,
        nbar: cfg.oscillator.nbar,
        gamma_plus: None,
        gamma_minus: None,
        gamma_zero: None,
        gamma_perp: None,
        g_tilde: None,
        a_rate: None,
        b_rate: None,
        gamma_up: None,
        gamma_down: None,
        eta: None,
        n_mean: None,
        n_saturation: None,
        regime_ok: false,
        saturation_ok: false,
        above_threshold: false,
        error: None,
    };
    if let crate::model::DriveMode::LockRabiToCavity = cfg.drive.mode {
        rec.delta_omega_over_omega = cfg.drive.delta_omega / cfg.oscillator.omega_c;
    }
    let frame = match cfg.frame() {
        Ok(f) => f,
        Err(e) => {
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    rec.delta_omega_over_omega = frame.delta_omega / frame.omega_rabi;
    rec.gamma_plus = Some(frame.gamma_plus);
    rec.gamma_minus = Some(frame.gamma_minus);
    rec.gamma_zero = Some(frame.gamma_zero);
    rec.g_tilde = Some(frame.g_tilde);
    let sol = match analytic::solve(cfg, thresholds) {
        Ok(s) => s,
        Err(e) => {
            rec.gamma_perp = Some(frame.gamma_perp);
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    rec.gamma_perp = Some(sol.pump.gamma_perp_effective);
    rec.a_rate = Some(sol.pump.a_rate);
    rec.b_rate = Some(sol.pump.b_rate);
    rec.gamma_up = Some(sol.rates.gamma_up);
    rec.gamma_down = Some(sol.rates.gamma_down);
    rec.eta = Some(sol.rates.eta);
    rec.n_saturation = Some(sol.n_saturation);
    rec.regime_ok = sol.regime.is_acceptable();
    match sol.outcome {
        analytic::PhotonOutcome::Steady(s) => {
            rec.n_mean = Some(s.n_mean);
            rec.saturation_ok = s.below_saturation;
        }
        analytic::PhotonOutcome::AboveThreshold { .. } => rec.above_threshold = true,
    }
    rec
}

/// Per-point failures become flagged records; only an invalid spec is an error.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRecord>> {
    let points = spec.points()?;
    Ok(points
        .par_iter()
        .map(|cfg| evaluate_point(cfg, &spec.thresholds))
        .collect())
}

fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.11e}")
    }
}

fn opt_hz(x: Option<f64>) -> String {
    x.map(|v| num(rad_to_hz(v))).unwrap_or_default()
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn flag(b: bool) -> &'static str {
    if b { "1" } else { "0" }
}

fn row(r: &SweepRecord) -> [String; 21] {
    [
        r.mode.as_str().to_string(),
        r.n_qubits.to_string(),
        num(rad_to_hz(r.delta_omega)),
        num(r.delta_omega_over_omega),
        opt_hz(r.gamma_plus),
        opt_hz(r.gamma_minus),
        opt_hz(r.gamma_zero),
        opt_hz(r.gamma_perp),
        opt_hz(r.g_tilde),
        opt_hz(r.a_rate),
        opt_hz(r.b_rate),
        opt_hz(r.gamma_up),
        opt_hz(r.gamma_down),
        opt(r.eta),
        opt(r.n_mean),
        opt(r.n_saturation),
        flag(r.regime_ok).into(),
        flag(r.saturation_ok).into(),
        flag(r.above_threshold).into(),
        num(rad_to_hz(r.kappa)),
        num(r.nbar),
    ]
}

struct Counting<W> {
    inner: W,
    bytes: usize,
}

impl<W: Write> Write for Counting<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.bytes += n;
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

/// Writes header plus one line per record; returns the byte count.
pub fn emit_csv<W: Write>(table: &[SweepRecord], out: W) -> Result<usize> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    let mut w = csv::Writer::from_writer(Counting { inner: out, bytes: 0 });
    w.write_record(CSV_COLUMNS)?;
    for r in table {
        w.write_record(row(r))?;
    }
    w.flush()?;
    let inner = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(inner.bytes)
}

pub fn write_csv_file(table: &[SweepRecord], path: &Path) -> Result<usize> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    let file = std::fs::File::create(path)?;
    let mut buf = std::io::BufWriter::new(file);
    let n = emit_csv(table, &mut buf)?;
    buf.flush()?;
    Ok(n)
}

fn parse_num(s: &str, col: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Config(format!("column `{col}`: cannot parse `{s}`")))
}

fn parse_flag(s: &str, col: &str) -> Result<bool> {
    match s {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(Error::Config(format!("column `{col}`: expected 0 or 1, got `{s}`"))),
    }
}

/// Reads a table written by [`emit_csv`]. Extra trailing columns are ignored;
/// the 19 leading columns are required.
pub fn parse_csv<R: std::io::Read>(input: R) -> Result<Vec<SweepRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let headers = rd.headers()?.clone();
    let pos = |name: &str| headers.iter().position(|h| h == name);
    for name in &CSV_COLUMNS[..19] {
        if pos(name).is_none() {
            return Err(Error::Config(format!("CSV is missing column `{name}`")));
        }
    }
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let get = |name: &str| pos(name).and_then(|i| rec.get(i)).unwrap_or("");
        let f = |name: &str| parse_num(get(name), name);
        let hz = |name: &str| f(name).map(|o| o.map(hz_to_rad));
        out.push(SweepRecord {
            mode: get("mode").parse()?,
            n_qubits: get("n_qubits")
                .parse()
                .map_err(|_| Error::Config(format!("bad n_qubits `{}`", get("n_qubits"))))?,
            delta_omega: hz("delta_omega_hz")?.unwrap_or(f64::NAN),
            delta_omega_over_omega: f("delta_omega_over_omega")?.unwrap_or(f64::NAN),
            kappa: hz("kappa_hz")?.unwrap_or(f64::NAN),
            nbar: f("nbar")?.unwrap_or(f64::NAN),
            gamma_plus: hz("gamma_plus_hz")?,
            gamma_minus: hz("gamma_minus_hz")?,
            gamma_zero: hz("gamma_zero_hz")?,
            gamma_perp: hz("gamma_perp_hz")?,
            g_tilde: hz("g_tilde_hz")?,
            a_rate: hz("a_rate_hz")?,
            b_rate: hz("b_rate_hz")?,
            gamma_up: hz("gamma_up_hz")?,
            gamma_down: hz("gamma_down_hz")?,
            eta: f("eta")?,
            n_mean: f("n_mean")?,
            n_saturation: f("n_saturation")?,
            regime_ok: parse_flag(get("regime_ok"), "regime_ok")?,
            saturation_ok: parse_flag(get("saturation_ok"), "saturation_ok")?,
            above_threshold: parse_flag(get("above_threshold"), "above_threshold")?,
            error: None,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModeComparison {
    /// Grid points present in both modes.
    pub points: usize,
    /// Points where both modes cool within their validity flags.
    pub cooling_points: usize,
    pub n_mean_satisfied: usize,
    pub n_mean_violated: usize,
    pub bound_satisfied: usize,
    pub bound_violated: usize,
    /// Points where 2(Γ₋ − Γ₊) is larger for collective decay; informational.
    pub collective_model_rate_faster: usize,
    /// δω/Ω, N of each violated point.
    pub violations: Vec<(f64, usize)>,
}

impl ModeComparison {
    pub fn holds(&self) -> bool {
        self.n_mean_violated == 0 && self.bound_violated == 0
    }
}

type PointKey = (usize, u64, u64, u64);

fn key(r: &SweepRecord) -> PointKey {
    (
        r.n_qubits,
        r.delta_omega.to_bits(),
        r.kappa.to_bits(),
        r.nbar.to_bits(),
    )
}

/// Checks ⟨n⟩(independent) ≤ ⟨n⟩(collective) and bound(collective) ≥
/// bound(independent) over the mutual cooling region.
pub fn compare_modes(table: &[SweepRecord]) -> Result<ModeComparison> {
    let mut ind: BTreeMap<PointKey, &SweepRecord> = BTreeMap::new();
    let mut col: BTreeMap<PointKey, &SweepRecord> = BTreeMap::new();
    for r in table {
        match r.mode {
            EnsembleMode::Independent => ind.insert(key(r), r),
            EnsembleMode::Collective => col.insert(key(r), r),
        };
    }
    if ind.is_empty() || col.is_empty() {
        return Err(Error::MismatchedGrids("table must contain both ensemble modes".into()));
    }
    if ind.len() != col.len() || ind.keys().zip(col.keys()).any(|(a, b)| a != b) {
        return Err(Error::MismatchedGrids(format!(
            "{} independent points vs {} collective points on different grids",
            ind.len(),
            col.len()
        )));
    }
    let slack = 1e-9;
    let mut out = ModeComparison {
        points: ind.len(),
        ..Default::default()
    };
    for (k, a) in &ind {
        let b = col[k];
        if !(a.is_cooling() && b.is_cooling()) {
            continue;
        }
        out.cooling_points += 1;
        let (na, nb) = (a.n_mean.unwrap(), b.n_mean.unwrap());
        let mut bad = false;
        if na <= nb * (1.0 + slack) {
            out.n_mean_satisfied += 1;
        } else {
            out.n_mean_violated += 1;
            bad = true;
        }
        match (a.cooling_rate_bound(), b.cooling_rate_bound()) {
            (Some(ra), Some(rb)) if rb >= ra * (1.0 - slack) => out.bound_satisfied += 1,
            _ => {
                out.bound_violated += 1;
                bad = true;
            }
        }
        if let (Some(ma), Some(mb)) = (a.model_rate(), b.model_rate()) {
            if mb > ma {
                out.collective_model_rate_faster += 1;
            }
        }
        if bad {
            out.violations.push((a.delta_omega_over_omega, a.n_qubits));
        }
    }
    Ok(out)
}
