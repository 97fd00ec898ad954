//! Closed-form steady state of the resonator after eliminating the qubits.
//!
//! The reduced resonator equation has loss rate Γ₋ = κ(1 + n̄) + B and gain
//! rate Γ₊ = κn̄ + A, where A and B are the qubit-induced pump rates. Its
//! steady state is ρ ∝ exp(−α a†a) with α = ln η and η = Γ₋/Γ₊, so the photon
//! number is geometric with mean 1/(η − 1) and g²(0) = 2.
//!
//! Only the resonant case Ω = ω_c is covered; there is no detuning factor on A
//! and B.

use crate::error::{Error, Result};
use crate::model::{
    regime_check, DressedFrame, EnsembleConfig, EnsembleMode, OscillatorParams, RegimeReport,
    RegimeThresholds, SystemConfig,
};

/// Steady-state moments of the collective dressed-state operators of `N`
/// qubits driven without the resonator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollectiveMoments {
    /// ⟨R_z⟩, the total dressed inversion.
    pub rz: f64,
    /// ⟨R₊₋R₋₊⟩.
    pub pm_mp: f64,
    /// ⟨R₋₊R₊₋⟩.
    pub mp_pm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpRates {
    /// A, qubit contribution to photon gain.
    pub a_rate: f64,
    /// B, qubit contribution to photon loss.
    pub b_rate: f64,
    pub mode: EnsembleMode,
    /// Γ⊥ for independent qubits, Γ̃⊥ for collective decay.
    pub gamma_perp_effective: f64,
    /// Present for collective decay only.
    pub moments: Option<CollectiveMoments>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveRates {
    /// Γ₋ = κ(1 + n̄) + B.
    pub gamma_down: f64,
    /// Γ₊ = κn̄ + A.
    pub gamma_up: f64,
    /// η = Γ₋/Γ₊ (+∞ when Γ₊ = 0).
    pub eta: f64,
}

impl EffectiveRates {
    pub fn is_above_threshold(&self) -> bool {
        self.gamma_down <= self.gamma_up
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonStats {
    /// ⟨a†a⟩.
    pub n_mean: f64,
    /// ⟨a†²a²⟩.
    pub n2: f64,
    pub g2: f64,
    /// α = ln η.
    pub alpha: f64,
    pub eta: f64,
    /// Saturation photon number n₀ (+∞ when g̃ = 0).
    pub n_saturation: f64,
    pub below_saturation: bool,
    pub regime_ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhotonOutcome {
    Steady(PhotonStats),
    /// η ≤ 1: the reduced equation has no normalizable steady state.
    AboveThreshold { eta: f64, regime_ok: bool },
}

impl PhotonOutcome {
    pub fn stats(&self) -> Option<&PhotonStats> {
        match self {
            PhotonOutcome::Steady(s) => Some(s),
            PhotonOutcome::AboveThreshold { .. } => None,
        }
    }

    pub fn n_mean(&self) -> Option<f64> {
        self.stats().map(|s| s.n_mean)
    }

    pub fn is_above_threshold(&self) -> bool {
        matches!(self, PhotonOutcome::AboveThreshold { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoolingTimes {
    /// Relaxation rate of ⟨n⟩ under the reduced equation, 2(Γ₋ − Γ₊).
    pub model_rate: f64,
    /// Fastest rate the qubits can support: γ (independent) or Nγ (collective).
    pub physical_bound: f64,
}

impl CoolingTimes {
    pub fn rate(&self) -> f64 {
        self.model_rate.min(self.physical_bound)
    }
}

pub fn pump_rates_independent(frame: &DressedFrame, n_qubits: usize) -> Result<PumpRates> {
    let total = frame.gamma_plus + frame.gamma_minus;
    if !(total > 0.0) {
        return Err(Error::invalid("frame", "γ₊ + γ₋ must be positive"));
    }
    let scale = frame.g_tilde * frame.g_tilde * n_qubits as f64 / frame.gamma_perp;
    Ok(PumpRates {
        a_rate: scale * frame.gamma_minus / total,
        b_rate: scale * frame.gamma_plus / total,
        mode: EnsembleMode::Independent,
        gamma_perp_effective: frame.gamma_perp,
        moments: None,
    })
}

/// Langevin function coth(x) − 1/x, accurate through x = 0.
fn langevin(x: f64) -> f64 {
    if x.is_infinite() {
        return x.signum();
    }
    if x.abs() < 0.1 {
        let x2 = x * x;
        x * (1.0 / 3.0
            + x2 * (-1.0 / 45.0 + x2 * (2.0 / 945.0 + x2 * (-1.0 / 4725.0 + x2 * 2.0 / 93555.0))))
    } else {
        1.0 / x.tanh() - 1.0 / x
    }
}

/// Collective steady-state moments for detailed-balance ratio f = γ₊/γ₋.
///
/// The inversion is the closed-form expression
/// `[N(1 − f^{N+2}) + f(N+2)(f^N − 1)] / [(f − 1)(f^{N+1} − 1)]`, evaluated as
/// `L(s/2) − (N+1) L((N+1)s/2)` with `s = ln f` and `L` the Langevin function.
/// The rewrite is exact and neither overflows for large N·|ln f| nor cancels
/// near f = 1. The correlators follow as ⟨R_z⟩/(1 − f) and f⟨R_z⟩/(1 − f).
pub fn collective_moments(f: f64, n_qubits: usize) -> Result<CollectiveMoments> {
    if !(f >= 0.0) {
        return Err(Error::invalid("f", format!("must be >= 0, got {f}")));
    }
    if n_qubits == 0 {
        return Err(Error::invalid("n_qubits", "need at least one qubit"));
    }
    let n = n_qubits as f64;
    let s = f.ln();
    if s.abs() < 1e-12 {
        let c = n * (n + 2.0) / 6.0;
        return Ok(CollectiveMoments {
            rz: 0.0,
            pm_mp: c,
            mp_pm: c,
        });
    }
    let rz = langevin(0.5 * s) - (n + 1.0) * langevin(0.5 * (n + 1.0) * s);
    Ok(CollectiveMoments {
        rz,
        pm_mp: rz / (1.0 - f),
        mp_pm: rz / (1.0 / f - 1.0),
    })
}

/// The inversion formula for ⟨R_z⟩ evaluated term by term. Overflows once
/// f^(N+2) leaves the f64 range and loses digits near f = 1; kept as a
/// reference for [`collective_moments`].
pub fn inversion_closed_form(f: f64, n_qubits: usize) -> f64 {
    let n = n_qubits as f64;
    let num = n * (1.0 - f.powf(n + 2.0)) + f * (n + 2.0) * (f.powf(n) - 1.0);
    let den = (f - 1.0) * (f.powf(n + 1.0) - 1.0);
    num / den
}

/// Γ̃⊥ = Γ⊥ + (γ₋ − γ₊)⟨R_z⟩. A single qubit keeps Γ⊥: collective and
/// independent decay coincide there.
fn collective_linewidth(frame: &DressedFrame, n_qubits: usize, rz: f64) -> Result<f64> {
    if n_qubits == 1 {
        return Ok(frame.gamma_perp);
    }
    let width = frame.gamma_perp + (frame.gamma_minus - frame.gamma_plus) * rz;
    if width > 0.0 {
        Ok(width)
    } else {
        Err(Error::NonPositiveEffectiveLinewidth(width))
    }
}

pub fn pump_rates_collective(frame: &DressedFrame, n_qubits: usize) -> Result<PumpRates> {
    let moments = collective_moments(frame.f, n_qubits)?;
    let width = collective_linewidth(frame, n_qubits, moments.rz)?;
    let scale = frame.g_tilde * frame.g_tilde / width;
    Ok(PumpRates {
        a_rate: scale * moments.pm_mp,
        b_rate: scale * moments.mp_pm,
        mode: EnsembleMode::Collective,
        gamma_perp_effective: width,
        moments: Some(moments),
    })
}

pub fn pump_rates(frame: &DressedFrame, ens: &EnsembleConfig) -> Result<PumpRates> {
    match ens.mode {
        EnsembleMode::Independent => pump_rates_independent(frame, ens.n_qubits),
        EnsembleMode::Collective => pump_rates_collective(frame, ens.n_qubits),
    }
}

pub fn effective_rates(pump: &PumpRates, osc: &OscillatorParams) -> EffectiveRates {
    let gamma_down = osc.kappa * (1.0 + osc.nbar) + pump.b_rate;
    let gamma_up = osc.kappa * osc.nbar + pump.a_rate;
    let eta = if gamma_up == 0.0 {
        f64::INFINITY
    } else {
        gamma_down / gamma_up
    };
    EffectiveRates {
        gamma_down,
        gamma_up,
        eta,
    }
}

/// n₀ = Γ⊥(γ₊ + γ₋)/(g̃²N), with the single-particle Γ⊥ in both modes.
pub fn saturation_number(frame: &DressedFrame, n_qubits: usize) -> Result<f64> {
    if frame.g_tilde == 0.0 {
        return Err(Error::DivisionByZeroCoupling);
    }
    Ok(frame.gamma_perp * (frame.gamma_plus + frame.gamma_minus)
        / (frame.g_tilde * frame.g_tilde * n_qubits as f64))
}

pub fn steady_photon_stats(
    eff: &EffectiveRates,
    frame: &DressedFrame,
    ens: &EnsembleConfig,
    osc: &OscillatorParams,
    thresholds: &RegimeThresholds,
) -> PhotonOutcome {
    let regime_ok = regime_check(frame, ens, osc, thresholds).is_acceptable();
    if eff.is_above_threshold() {
        return PhotonOutcome::AboveThreshold {
            eta: eff.eta,
            regime_ok,
        };
    }
    // Γ₊/(Γ₋ − Γ₊) is 1/(η − 1) without rounding η first.
    let n_mean = eff.gamma_up / (eff.gamma_down - eff.gamma_up);
    let n_saturation = saturation_number(frame, ens.n_qubits).unwrap_or(f64::INFINITY);
    PhotonOutcome::Steady(PhotonStats {
        n_mean,
        n2: 2.0 * n_mean * n_mean,
        g2: 2.0,
        alpha: eff.eta.ln(),
        eta: eff.eta,
        n_saturation,
        below_saturation: n_mean < n_saturation,
        regime_ok,
    })
}

/// P(n) = (1 − 1/η) η^(−n) for n = 0..=n_max.
pub fn photon_distribution(eff: &EffectiveRates, n_max: usize) -> Result<Vec<f64>> {
    if eff.is_above_threshold() {
        return Err(Error::AboveThreshold { eta: eff.eta });
    }
    let q = eff.gamma_up / eff.gamma_down;
    let mut p = 1.0 - q;
    let mut out = Vec::with_capacity(n_max + 1);
    for _ in 0..=n_max {
        out.push(p);
        p *= q;
    }
    Ok(out)
}

pub fn cooling_time_scale(
    eff: &EffectiveRates,
    frame: &DressedFrame,
    ens: &EnsembleConfig,
) -> Result<CoolingTimes> {
    if eff.gamma_down < eff.gamma_up {
        return Err(Error::AboveThreshold { eta: eff.eta });
    }
    let physical_bound = match ens.mode {
        EnsembleMode::Independent => frame.gamma,
        EnsembleMode::Collective => ens.n_qubits as f64 * frame.gamma,
    };
    Ok(CoolingTimes {
        model_rate: 2.0 * (eff.gamma_down - eff.gamma_up),
        physical_bound,
    })
}

/// Every stage of the closed-form chain for one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticSolution {
    pub ensemble: EnsembleConfig,
    pub frame: DressedFrame,
    pub pump: PumpRates,
    pub rates: EffectiveRates,
    pub outcome: PhotonOutcome,
    pub regime: RegimeReport,
    /// n₀, +∞ when g̃ = 0.
    pub n_saturation: f64,
}

impl AnalyticSolution {
    /// Total steady inversion ⟨R_z⟩ of the qubits without the resonator.
    pub fn inversion(&self) -> f64 {
        match self.pump.moments {
            Some(m) => m.rz,
            None => {
                let fr = &self.frame;
                self.ensemble.n_qubits as f64 * (fr.gamma_minus - fr.gamma_plus)
                    / (fr.gamma_minus + fr.gamma_plus)
            }
        }
    }
}

pub fn solve(cfg: &SystemConfig, thresholds: &RegimeThresholds) -> Result<AnalyticSolution> {
    let frame = cfg.frame()?;
    let pump = pump_rates(&frame, &cfg.ensemble)?;
    let rates = effective_rates(&pump, &cfg.oscillator);
    let outcome = steady_photon_stats(&rates, &frame, &cfg.ensemble, &cfg.oscillator, thresholds);
    let regime = regime_check(&frame, &cfg.ensemble, &cfg.oscillator, thresholds);
    let n_saturation = saturation_number(&frame, cfg.ensemble.n_qubits).unwrap_or(f64::INFINITY);
    Ok(AnalyticSolution {
        ensemble: cfg.ensemble,
        frame,
        pump,
        rates,
        outcome,
        regime,
        n_saturation,
    })
}
