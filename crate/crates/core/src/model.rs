//! Physical parameters and the dressed-frame quantities derived from them.
//!
//! Every frequency and rate here is an angular frequency in rad/s. Use
//! [`hz_to_rad`] / [`rad_to_hz`] at the I/O boundary.
//!
//! Circuit quantities follow SI units with ħ kept explicit: the vacuum current
//! amplitude of the resonator is `I_c0 = sqrt(ħ ω_c / 2L)` and the coupling
//! energy `M I_p I_c0` is divided by ħ to give `g` in rad/s.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

/// Reduced Planck constant (J·s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant (J/K).
pub const K_B: f64 = 1.380_649e-23;

pub fn hz_to_rad(nu: f64) -> f64 {
    2.0 * PI * nu
}

pub fn rad_to_hz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

/// Flux-qubit parameters in the flux basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitParams {
    /// Tunnel splitting Δ.
    pub delta: f64,
    /// Energy bias ε between the flux states (non-negative).
    pub epsilon: f64,
    /// Single-qubit spontaneous decay rate γ.
    pub gamma: f64,
}

impl QubitParams {
    pub fn new(delta: f64, epsilon: f64, gamma: f64) -> Result<Self> {
        let q = Self {
            delta,
            epsilon,
            gamma,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        positive("qubit.delta", self.delta)?;
        positive("qubit.gamma", self.gamma)?;
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("qubit.epsilon", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// Qubit transition frequency ΔE = sqrt(Δ² + ε²).
    pub fn transition_frequency(&self) -> f64 {
        self.delta.hypot(self.epsilon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriveMode {
    /// Ω is pinned to ω_c and the bare amplitude follows as sqrt(ω_c² − δω²).
    LockRabiToCavity,
    /// δω and the bare amplitude Ω̃₀ are given; Ω = sqrt(δω² + Ω̃₀²).
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveParams {
    pub mode: DriveMode,
    /// Drive detuning δω = ΔE − ω.
    pub delta_omega: f64,
    /// Bare drive amplitude Ω̃₀, only read in [`DriveMode::Explicit`].
    pub rabi_bare: f64,
}

impl DriveParams {
    /// Locked drive with δω = `ratio` · ω_c.
    pub fn locked(ratio: f64, omega_c: f64) -> Self {
        Self {
            mode: DriveMode::LockRabiToCavity,
            delta_omega: ratio * omega_c,
            rabi_bare: 0.0,
        }
    }

    pub fn explicit(delta_omega: f64, rabi_bare: f64) -> Self {
        Self {
            mode: DriveMode::Explicit,
            delta_omega,
            rabi_bare,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorParams {
    /// Resonator angular frequency ω_c.
    pub omega_c: f64,
    /// Resonator decay rate κ.
    pub kappa: f64,
    /// Mean thermal occupation n̄(ω_c) of the resonator bath.
    pub nbar: f64,
}

impl OscillatorParams {
    pub fn new(omega_c: f64, kappa: f64, nbar: f64) -> Result<Self> {
        let o = Self {
            omega_c,
            kappa,
            nbar,
        };
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<()> {
        positive("oscillator.omega_c", self.omega_c)?;
        positive("oscillator.kappa", self.kappa)?;
        if !(self.nbar >= 0.0 && self.nbar.is_finite()) {
            return Err(Error::invalid("oscillator.nbar", "must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EnsembleMode {
    /// Each qubit decays into its own reservoir.
    Independent,
    /// All qubits share one reservoir (Dicke-type collective decay).
    Collective,
}

impl EnsembleMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            EnsembleMode::Independent => "independent",
            EnsembleMode::Collective => "collective",
        }
    }
}

impl fmt::Display for EnsembleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EnsembleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "independent" => Ok(EnsembleMode::Independent),
            "collective" => Ok(EnsembleMode::Collective),
            other => Err(Error::Config(format!(
                "unknown ensemble mode `{other}` (expected independent|collective)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnsembleConfig {
    pub n_qubits: usize,
    pub mode: EnsembleMode,
}

impl EnsembleConfig {
    pub fn new(n_qubits: usize, mode: EnsembleMode) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::invalid("ensemble.n", "need at least one qubit"));
        }
        Ok(Self { n_qubits, mode })
    }
}

/// Lumped-element description of the resonator and its coupling to a qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawCircuitParams {
    /// Inductance L (H).
    pub inductance: f64,
    /// Capacitance C (F).
    pub capacitance: f64,
    /// Mutual inductance M (H).
    pub mutual_inductance: f64,
    /// Persistent current I_p (A).
    pub persistent_current: f64,
}

/// Resonator frequency ω_c = 1/sqrt(LC) and coupling g = M I_p sqrt(ħω_c/2L)/ħ,
/// both in rad/s.
pub fn derive_circuit_params(raw: &RawCircuitParams) -> Result<(f64, f64)> {
    positive("circuit.inductance", raw.inductance)?;
    positive("circuit.capacitance", raw.capacitance)?;
    positive("circuit.persistent_current", raw.persistent_current)?;
    // M = 0 is the decoupled limit and stays legal.
    if !(raw.mutual_inductance >= 0.0 && raw.mutual_inductance.is_finite()) {
        return Err(Error::invalid("circuit.mutual_inductance", "must be finite and >= 0"));
    }
    let omega_c = 1.0 / (raw.inductance * raw.capacitance).sqrt();
    let vacuum_current = (HBAR * omega_c / (2.0 * raw.inductance)).sqrt();
    let g = raw.mutual_inductance * raw.persistent_current * vacuum_current / HBAR;
    Ok((omega_c, g))
}

/// Inverse of [`derive_circuit_params`]: pick C and M so that a resonator with
/// inductance `inductance` and a qubit with persistent current
/// `persistent_current` reach the requested ω_c and g.
pub fn synthesize_circuit_params(
    omega_c: f64,
    g: f64,
    inductance: f64,
    persistent_current: f64,
) -> Result<RawCircuitParams> {
    positive("omega_c", omega_c)?;
    positive("circuit.inductance", inductance)?;
    positive("circuit.persistent_current", persistent_current)?;
    let capacitance = 1.0 / (omega_c * omega_c * inductance);
    let vacuum_current = (HBAR * omega_c / (2.0 * inductance)).sqrt();
    let mutual_inductance = g * HBAR / (persistent_current * vacuum_current);
    Ok(RawCircuitParams {
        inductance,
        capacitance,
        mutual_inductance,
        persistent_current,
    })
}

/// Bose–Einstein occupation n̄ = 1/(exp(ħω/k_B T) − 1).
pub fn thermal_occupation(omega: f64, temperature: f64) -> Result<f64> {
    if !(temperature > 0.0) {
        return Err(Error::NonPositiveTemperature(temperature));
    }
    positive("omega", omega)?;
    Ok(1.0 / (HBAR * omega / (K_B * temperature)).exp_m1())
}

/// Temperature at which a mode of frequency `omega` has occupation `nbar`.
pub fn temperature_for_occupation(omega: f64, nbar: f64) -> Result<f64> {
    positive("omega", omega)?;
    positive("nbar", nbar)?;
    Ok(HBAR * omega / (K_B * (1.0 / nbar).ln_1p()))
}

/// Everything downstream formulas need, computed once from the raw inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DressedFrame {
    /// Qubit transition frequency ΔE.
    pub delta_e: f64,
    pub cos2theta: f64,
    pub sin2theta: f64,
    /// Drive detuning δω.
    pub delta_omega: f64,
    /// Generalized Rabi frequency Ω.
    pub omega_rabi: f64,
    /// Bare drive amplitude Ω̃₀.
    pub rabi_bare: f64,
    pub cos2xi: f64,
    pub sin2xi: f64,
    pub cos_sq_xi: f64,
    pub sin_sq_xi: f64,
    /// Bare qubit–resonator coupling g.
    pub g: f64,
    /// Effective exchange coupling g̃ = g cos2θ sin2ξ.
    pub g_tilde: f64,
    /// Dispersive shift g₀ = 2g² cos2ξ sin²2θ / ΔE.
    pub g0: f64,
    /// Bare decay rate γ.
    pub gamma: f64,
    /// Dressed down-rate γ₊ = γ cos⁴ξ (|+⟩ → |−⟩).
    pub gamma_plus: f64,
    /// Dressed up-rate γ₋ = γ sin⁴ξ (|−⟩ → |+⟩).
    pub gamma_minus: f64,
    /// Dressed dephasing rate γ₀ = γ sin²2ξ / 4.
    pub gamma_zero: f64,
    /// Dressed coherence decay Γ⊥ = 4γ₀ + γ₊ + γ₋.
    pub gamma_perp: f64,
    /// γ₊/γ₋, +∞ when γ₋ = 0.
    pub f: f64,
    /// Ω − ω_c; zero in locked mode.
    pub cavity_detuning: f64,
}

impl DressedFrame {
    /// Steady population of the upper dressed state of a lone qubit, γ₋/(γ₊+γ₋).
    pub fn upper_population(&self) -> f64 {
        self.gamma_minus / (self.gamma_plus + self.gamma_minus)
    }

    pub fn lower_population(&self) -> f64 {
        self.gamma_plus / (self.gamma_plus + self.gamma_minus)
    }

    /// True when the dressed splitting is within one linewidth of the cavity.
    pub fn is_resonant(&self) -> bool {
        self.cavity_detuning.abs() <= self.gamma_perp
    }
}

pub fn derive_dressed_frame(
    qubit: &QubitParams,
    drive: &DriveParams,
    g: f64,
    omega_c: f64,
) -> Result<DressedFrame> {
    qubit.validate()?;
    positive("omega_c", omega_c)?;
    if !(g >= 0.0 && g.is_finite()) {
        return Err(Error::invalid("coupling.g", "must be finite and >= 0"));
    }
    if !drive.delta_omega.is_finite() {
        return Err(Error::invalid("drive.delta_omega", "must be finite"));
    }

    let delta_e = qubit.transition_frequency();
    let cos2theta = qubit.epsilon / delta_e;
    let sin2theta = qubit.delta / delta_e;

    let delta_omega = drive.delta_omega;
    let (omega_rabi, rabi_bare) = match drive.mode {
        DriveMode::LockRabiToCavity => {
            if delta_omega.abs() >= omega_c {
                return Err(Error::DetuningOutOfRange {
                    delta_omega,
                    omega: omega_c,
                });
            }
            (omega_c, ((omega_c - delta_omega) * (omega_c + delta_omega)).sqrt())
        }
        DriveMode::Explicit => {
            if !(drive.rabi_bare >= 0.0 && drive.rabi_bare.is_finite()) {
                return Err(Error::invalid("drive.rabi_bare", "must be finite and >= 0"));
            }
            let omega = delta_omega.hypot(drive.rabi_bare);
            if omega == 0.0 {
                return Err(Error::invalid(
                    "drive",
                    "generalized Rabi frequency is zero (no drive and no detuning)",
                ));
            }
            (omega, drive.rabi_bare)
        }
    };

    let ratio = (delta_omega / omega_rabi).clamp(-1.0, 1.0);
    let cos_sq_xi = 0.5 * (1.0 + ratio);
    let sin_sq_xi = 0.5 * (1.0 - ratio);
    let sin2xi = 2.0 * (cos_sq_xi * sin_sq_xi).sqrt();
    let cos2xi = cos_sq_xi - sin_sq_xi;

    let gamma = qubit.gamma;
    let gamma_plus = gamma * cos_sq_xi * cos_sq_xi;
    let gamma_minus = gamma * sin_sq_xi * sin_sq_xi;
    let gamma_zero = gamma * cos_sq_xi * sin_sq_xi;
    let gamma_perp = 4.0 * gamma_zero + gamma_plus + gamma_minus;
    let f = if gamma_minus == 0.0 {
        f64::INFINITY
    } else {
        gamma_plus / gamma_minus
    };

    Ok(DressedFrame {
        delta_e,
        cos2theta,
        sin2theta,
        delta_omega,
        omega_rabi,
        rabi_bare,
        cos2xi,
        sin2xi,
        cos_sq_xi,
        sin_sq_xi,
        g,
        g_tilde: g * cos2theta * sin2xi,
        g0: 2.0 * g * g * cos2xi * sin2theta * sin2theta / delta_e,
        gamma,
        gamma_plus,
        gamma_minus,
        gamma_zero,
        gamma_perp,
        f,
        cavity_detuning: omega_rabi - omega_c,
    })
}

/// Complete input set for one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConfig {
    pub qubit: QubitParams,
    pub drive: DriveParams,
    pub oscillator: OscillatorParams,
    /// Bare coupling g (rad/s).
    pub coupling: f64,
    pub ensemble: EnsembleConfig,
}

impl SystemConfig {
    /// Operating point of the independent-qubit figure: n̄ = 4, Δ/2π = 3 GHz,
    /// ε = 0.01Δ, g/2π = 1 MHz, ω_c/2π = 10 MHz, γ/2π = 100 kHz,
    /// κ/2π = 1 kHz, Ω locked to ω_c.
    pub fn reference(delta_omega_over_omega: f64, n_qubits: usize, mode: EnsembleMode) -> Self {
        let delta = hz_to_rad(3e9);
        let omega_c = hz_to_rad(1e7);
        Self {
            qubit: QubitParams {
                delta,
                epsilon: 0.01 * delta,
                gamma: hz_to_rad(1e5),
            },
            drive: DriveParams::locked(delta_omega_over_omega, omega_c),
            oscillator: OscillatorParams {
                omega_c,
                kappa: hz_to_rad(1e3),
                nbar: 4.0,
            },
            coupling: hz_to_rad(1e6),
            ensemble: EnsembleConfig { n_qubits, mode },
        }
    }

    pub fn frame(&self) -> Result<DressedFrame> {
        self.oscillator.validate()?;
        derive_dressed_frame(&self.qubit, &self.drive, self.coupling, self.oscillator.omega_c)
    }

    /// Same operating point with the drive re-locked at a new δω/Ω.
    pub fn with_detuning_ratio(mut self, ratio: f64) -> Self {
        self.drive = DriveParams::locked(ratio, self.oscillator.omega_c);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RegimeStatus {
    Ok,
    Marginal,
    Violated,
}

impl fmt::Display for RegimeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegimeStatus::Ok => "ok",
            RegimeStatus::Marginal => "marginal",
            RegimeStatus::Violated => "violated",
        })
    }
}

/// Ratio cut-offs for "≫": ratio ≥ `ok` is fine, ratio < `marginal` is a
/// violation, anything in between is marginal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeThresholds {
    pub ok: f64,
    pub marginal: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self {
            ok: 10.0,
            marginal: 2.0,
        }
    }
}

impl RegimeThresholds {
    pub fn classify(&self, ratio: f64) -> RegimeStatus {
        if ratio >= self.ok {
            RegimeStatus::Ok
        } else if ratio >= self.marginal {
            RegimeStatus::Marginal
        } else {
            RegimeStatus::Violated
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeEntry {
    pub name: &'static str,
    pub left: f64,
    pub right: f64,
    pub status: RegimeStatus,
}

impl RegimeEntry {
    pub fn ratio(&self) -> f64 {
        self.left / self.right
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub entries: Vec<RegimeEntry>,
    pub overall: RegimeStatus,
}

impl RegimeReport {
    pub fn entry(&self, name: &str) -> Option<&RegimeEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn is_acceptable(&self) -> bool {
        self.overall != RegimeStatus::Violated
    }
}

/// Check the scale separation the reduced resonator equation relies on:
/// Ω ≫ {γ_eff, g̃√N} and γ_eff ≫ g̃√N ≫ κ, with γ_eff = γ for independent
/// qubits and Nγ for collective decay.
pub fn regime_check(
    frame: &DressedFrame,
    ens: &EnsembleConfig,
    osc: &OscillatorParams,
    thresholds: &RegimeThresholds,
) -> RegimeReport {
    let n = ens.n_qubits as f64;
    let coupling = frame.g_tilde.abs() * n.sqrt();
    let (gamma_eff, names) = match ens.mode {
        EnsembleMode::Independent => (frame.gamma, ["rabi_over_gamma", "gamma_over_coupling"]),
        EnsembleMode::Collective => (n * frame.gamma, ["rabi_over_n_gamma", "n_gamma_over_coupling"]),
    };
    let pairs = [
        (names[0], frame.omega_rabi, gamma_eff),
        ("rabi_over_coupling", frame.omega_rabi, coupling),
        (names[1], gamma_eff, coupling),
        ("coupling_over_kappa", coupling, osc.kappa),
    ];
    let entries: Vec<RegimeEntry> = pairs
        .into_iter()
        .map(|(name, left, right)| {
            let ratio = left / right;
            // 0/0 never happens: right is γ, κ or Nγ in every case but g̃√N.
            let status = thresholds.classify(if ratio.is_nan() { 0.0 } else { ratio });
            RegimeEntry {
                name,
                left,
                right,
                status,
            }
        })
        .collect();
    let overall = entries
        .iter()
        .map(|e| e.status)
        .max()
        .unwrap_or(RegimeStatus::Ok);
    RegimeReport { entries, overall }
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and > 0, got {value}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fig2(ratio: f64) -> DressedFrame {
        SystemConfig::reference(ratio, 1, EnsembleMode::Independent)
            .frame()
            .unwrap()
    }

    #[test]
    fn symmetry_point_has_equal_dressed_rates() {
        let fr = fig2(0.0);
        let g = fr.gamma;
        assert_relative_eq!(fr.cos_sq_xi, 0.5);
        assert_relative_eq!(fr.sin_sq_xi, 0.5);
        assert_relative_eq!(fr.gamma_plus, g / 4.0, max_relative = 1e-14);
        assert_relative_eq!(fr.gamma_minus, g / 4.0, max_relative = 1e-14);
        assert_relative_eq!(fr.gamma_zero, g / 4.0, max_relative = 1e-14);
        assert_relative_eq!(fr.gamma_perp, 1.5 * g, max_relative = 1e-14);
        assert_relative_eq!(fr.f, 1.0);
    }

    #[test]
    fn detuned_rates_match_direct_substitution() {
        let fr = fig2(0.6);
        let g = fr.gamma;
        // cos²ξ = 0.8, sin²ξ = 0.2
        assert_relative_eq!(fr.cos_sq_xi, 0.8, max_relative = 1e-14);
        assert_relative_eq!(fr.sin_sq_xi, 0.2, max_relative = 1e-14);
        assert_relative_eq!(fr.gamma_plus, 0.64 * g, max_relative = 1e-13);
        assert_relative_eq!(fr.gamma_minus, 0.04 * g, max_relative = 1e-13);
        assert_relative_eq!(fr.gamma_zero, 0.16 * g, max_relative = 1e-13);
        assert_relative_eq!(fr.gamma_perp, 1.32 * g, max_relative = 1e-13);
        assert_relative_eq!(fr.f, 16.0, max_relative = 1e-12);
        assert_relative_eq!(fr.sin2xi, 0.8, max_relative = 1e-14);
    }

    #[test]
    fn figure_coupling_is_eight_khz() {
        let fr = fig2(0.6);
        // g cos2θ sin2ξ with cos2θ = 0.01/sqrt(1.0001)
        let expected = 1e6 * (0.01 / 1.0001f64.sqrt()) * 0.8;
        assert_relative_eq!(rad_to_hz(fr.g_tilde), expected, max_relative = 1e-12);
        assert!((rad_to_hz(fr.g_tilde) - 8.0e3).abs() < 1.0);
        assert_relative_eq!(fr.cos2theta, 0.01, max_relative = 1e-4);
    }

    #[test]
    fn locked_mode_rejects_detuning_beyond_rabi() {
        let cfg = SystemConfig::reference(1.2, 1, EnsembleMode::Independent);
        assert!(matches!(cfg.frame(), Err(Error::DetuningOutOfRange { .. })));
        let cfg = SystemConfig::reference(1.0, 1, EnsembleMode::Independent);
        assert!(matches!(cfg.frame(), Err(Error::DetuningOutOfRange { .. })));
    }

    #[test]
    fn explicit_drive_without_down_rate_gives_infinite_ratio() {
        let cfg = SystemConfig::reference(0.0, 1, EnsembleMode::Independent);
        let drive = DriveParams::explicit(hz_to_rad(1e7), 0.0);
        let fr = derive_dressed_frame(&cfg.qubit, &drive, cfg.coupling, cfg.oscillator.omega_c).unwrap();
        assert_eq!(fr.gamma_minus, 0.0);
        assert!(fr.f.is_infinite() && fr.f > 0.0);
        assert_eq!(fr.g_tilde, 0.0);
    }

    #[test]
    fn explicit_drive_reports_cavity_detuning() {
        let cfg = SystemConfig::reference(0.0, 1, EnsembleMode::Independent);
        let drive = DriveParams::explicit(hz_to_rad(6e6), hz_to_rad(8e6));
        let fr = derive_dressed_frame(&cfg.qubit, &drive, cfg.coupling, cfg.oscillator.omega_c).unwrap();
        assert_relative_eq!(fr.omega_rabi, hz_to_rad(1e7), max_relative = 1e-14);
        assert!(fr.is_resonant());
        let drive = DriveParams::explicit(hz_to_rad(6e6), hz_to_rad(9e6));
        let fr = derive_dressed_frame(&cfg.qubit, &drive, cfg.coupling, cfg.oscillator.omega_c).unwrap();
        assert!(!fr.is_resonant());
    }

    #[test]
    fn thermal_occupation_limits() {
        let omega = hz_to_rad(1e7);
        // ħω/k_BT = ln 2 → n̄ = 1
        let t = HBAR * omega / (K_B * std::f64::consts::LN_2);
        assert_relative_eq!(thermal_occupation(omega, t).unwrap(), 1.0, max_relative = 1e-12);
        // Rayleigh–Jeans for large occupation
        let t_hot = 100.0 * HBAR * omega / K_B;
        let nbar = thermal_occupation(omega, t_hot).unwrap();
        assert!(nbar > 50.0);
        assert!((nbar / (K_B * t_hot / (HBAR * omega)) - 1.0).abs() < 0.01);
        assert!(matches!(
            thermal_occupation(omega, 0.0),
            Err(Error::NonPositiveTemperature(_))
        ));
    }

    #[test]
    fn four_photons_at_ten_megahertz_is_about_two_millikelvin() {
        let omega = hz_to_rad(1e7);
        let t = temperature_for_occupation(omega, 4.0).unwrap();
        assert!((t - 2.15e-3).abs() < 0.01e-3, "T = {t}");
        assert_relative_eq!(thermal_occupation(omega, t).unwrap(), 4.0, max_relative = 1e-12);
    }

    #[test]
    fn circuit_frequency_depends_only_on_lc_product() {
        let raw = RawCircuitParams {
            inductance: 2e-9,
            capacitance: 1e-10,
            mutual_inductance: 1e-12,
            persistent_current: 5e-7,
        };
        let (w1, _) = derive_circuit_params(&raw).unwrap();
        let raw2 = RawCircuitParams {
            inductance: 4e-9,
            capacitance: 0.5e-10,
            ..raw
        };
        let (w2, _) = derive_circuit_params(&raw2).unwrap();
        assert_relative_eq!(w1, w2, max_relative = 1e-14);

        let decoupled = RawCircuitParams {
            mutual_inductance: 0.0,
            ..raw
        };
        assert_eq!(derive_circuit_params(&decoupled).unwrap().1, 0.0);
    }

    #[test]
    fn circuit_round_trip_reaches_reference_values() {
        let omega_c = hz_to_rad(1e7);
        let g = hz_to_rad(1e6);
        let raw = synthesize_circuit_params(omega_c, g, 1e-8, 5e-7).unwrap();
        let (w, gg) = derive_circuit_params(&raw).unwrap();
        assert_relative_eq!(w, omega_c, max_relative = 1e-12);
        assert_relative_eq!(gg, g, max_relative = 1e-12);
    }

    #[test]
    fn regime_report_for_reference_point() {
        let cfg = SystemConfig::reference(0.6, 30, EnsembleMode::Independent);
        let fr = cfg.frame().unwrap();
        let rep = regime_check(&fr, &cfg.ensemble, &cfg.oscillator, &RegimeThresholds::default());
        let r = |n: &str| rep.entry(n).unwrap();
        assert_relative_eq!(r("rabi_over_gamma").ratio(), 100.0, max_relative = 1e-12);
        assert_eq!(r("rabi_over_gamma").status, RegimeStatus::Ok);
        assert!((r("gamma_over_coupling").ratio() - 2.28).abs() < 0.01);
        assert_eq!(r("gamma_over_coupling").status, RegimeStatus::Marginal);
        assert!((r("coupling_over_kappa").ratio() - 43.8).abs() < 0.05);
        assert_eq!(r("coupling_over_kappa").status, RegimeStatus::Ok);
        assert_eq!(rep.overall, RegimeStatus::Marginal);

        let single = EnsembleConfig::new(1, EnsembleMode::Independent).unwrap();
        let rep = regime_check(&fr, &single, &cfg.oscillator, &RegimeThresholds::default());
        let gc = rep.entry("gamma_over_coupling").unwrap();
        assert!((gc.ratio() - 12.5).abs() < 0.01);
        assert_eq!(gc.status, RegimeStatus::Ok);
    }

    #[test]
    fn decoupled_system_violates_regime() {
        let mut cfg = SystemConfig::reference(0.6, 30, EnsembleMode::Independent);
        cfg.coupling = 0.0;
        let fr = cfg.frame().unwrap();
        let rep = regime_check(&fr, &cfg.ensemble, &cfg.oscillator, &RegimeThresholds::default());
        let e = rep.entry("coupling_over_kappa").unwrap();
        assert_eq!(e.ratio(), 0.0);
        assert_eq!(e.status, RegimeStatus::Violated);
        assert_eq!(rep.overall, RegimeStatus::Violated);
    }

    #[test]
    fn collective_regime_uses_n_gamma() {
        let cfg = SystemConfig::reference(0.6, 30, EnsembleMode::Collective);
        let fr = cfg.frame().unwrap();
        let rep = regime_check(&fr, &cfg.ensemble, &cfg.oscillator, &RegimeThresholds::default());
        let e = rep.entry("rabi_over_n_gamma").unwrap();
        assert_relative_eq!(e.ratio(), 100.0 / 30.0, max_relative = 1e-12);
        assert_eq!(e.status, RegimeStatus::Marginal);
    }

    proptest! {
        #[test]
        fn dressed_identities_hold(ratio in -0.999_999f64..0.999_999) {
            let fr = fig2(ratio);
            prop_assert!((fr.cos_sq_xi + fr.sin_sq_xi - 1.0).abs() < 1e-12);
            let s2 = fr.sin2xi * fr.sin2xi;
            prop_assert!((s2 - 4.0 * fr.sin_sq_xi * fr.cos_sq_xi).abs() < 1e-12);
            let prod = fr.gamma_plus * fr.gamma_minus;
            prop_assert!((fr.gamma_zero.powi(2) - prod).abs() <= 1e-12 * prod.max(f64::MIN_POSITIVE));
            let ratio_perp = fr.gamma_perp / fr.gamma;
            prop_assert!((1.0..=1.5).contains(&ratio_perp));
        }

        #[test]
        fn detuning_reflection_swaps_rates(ratio in -0.99f64..0.99) {
            let a = fig2(ratio);
            let b = fig2(-ratio);
            prop_assert!((a.gamma_plus - b.gamma_minus).abs() <= 1e-12 * a.gamma);
            prop_assert!((a.gamma_minus - b.gamma_plus).abs() <= 1e-12 * a.gamma);
            prop_assert!((a.gamma_zero - b.gamma_zero).abs() <= 1e-12 * a.gamma);
            prop_assert!((a.gamma_perp - b.gamma_perp).abs() <= 1e-12 * a.gamma);
            prop_assert!((a.g_tilde.abs() - b.g_tilde.abs()).abs() <= 1e-12 * a.g_tilde.abs());
        }

        #[test]
        fn circuit_synthesis_round_trips(
            nu_c in 1e6f64..1e10,
            nu_g in 1e3f64..1e8,
            l in 1e-10f64..1e-6,
        ) {
            let raw = synthesize_circuit_params(hz_to_rad(nu_c), hz_to_rad(nu_g), l, 1e-6).unwrap();
            let (w, g) = derive_circuit_params(&raw).unwrap();
            prop_assert!((w / hz_to_rad(nu_c) - 1.0).abs() < 1e-12);
            prop_assert!((g / hz_to_rad(nu_g) - 1.0).abs() < 1e-12);
        }
    }
}
