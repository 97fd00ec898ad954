//! Steady states of a [`LindbladModel`].
//!
//! The Hamiltonian and every jump operator shift the excitation number
//! n + (qubits in |+⟩) by a fixed amount, so the generator never feeds
//! coherences between different excitation numbers and a unique steady state
//! lives on the charge-diagonal blocks of ρ. The solve is restricted to those
//! blocks; if a model breaks the symmetry the whole matrix is used instead.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::evolve::Dopri;
use super::{DensityState, LindbladModel, ModelOptions, Observables, SparseMatrix, ONE, ZERO};
use crate::error::{Error, Result};
use crate::model::{DressedFrame, EnsembleConfig, OscillatorParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStateOptions {
    /// Relative residual bound ‖L(ρ)‖ ≤ tol·‖L‖·‖ρ‖.
    pub tolerance: f64,
    /// Largest restricted system solved by dense LU.
    pub dense_limit: usize,
    /// Relative drift of ⟨n⟩ and ⟨R_z⟩ between propagation chunks.
    pub drift_tolerance: f64,
    /// Propagation gives up after this many chunks.
    pub max_chunks: usize,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            dense_limit: 1600,
            drift_tolerance: 1e-9,
            max_chunks: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    DenseNullSpace,
    Propagation,
}

#[derive(Debug, Clone)]
pub struct SteadyReport {
    pub state: DensityState,
    /// ‖L(ρ)‖ / (‖L‖·‖ρ‖) on the solved blocks.
    pub residual: f64,
    pub method: SolveMethod,
    /// Number of unknown density-matrix elements.
    pub sector_size: usize,
    /// Propagated time, zero for the direct solve.
    pub time_reached: f64,
}

pub fn steady_state(model: &LindbladModel) -> Result<DensityState> {
    steady_state_with(model, &SteadyStateOptions::default()).map(|r| r.state)
}

struct Sector {
    dim: usize,
    block_of: Vec<usize>,
    pos: Vec<usize>,
    blocks: Vec<Vec<usize>>,
    offset: Vec<usize>,
    size: usize,
}

impl Sector {
    fn new(dim: usize, labels: impl Fn(usize) -> usize) -> Self {
        let mut grouped: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..dim {
            grouped.entry(labels(i)).or_default().push(i);
        }
        let blocks: Vec<Vec<usize>> = grouped.into_values().collect();
        let mut block_of = vec![0; dim];
        let mut pos = vec![0; dim];
        let mut offset = Vec::with_capacity(blocks.len());
        let mut size = 0;
        for (b, states) in blocks.iter().enumerate() {
            offset.push(size);
            size += states.len() * states.len();
            for (p, &s) in states.iter().enumerate() {
                block_of[s] = b;
                pos[s] = p;
            }
        }
        Self {
            dim,
            block_of,
            pos,
            blocks,
            offset,
            size,
        }
    }

    fn index(&self, i: usize, j: usize) -> Option<usize> {
        let b = self.block_of[i];
        (b == self.block_of[j]).then(|| self.offset[b] + self.pos[i] * self.blocks[b].len() + self.pos[j])
    }

    fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.blocks
            .iter()
            .flat_map(|states| states.iter().flat_map(move |&i| states.iter().map(move |&j| (i, j))))
    }

    fn to_matrix(&self, x: &[Complex64]) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (k, (i, j)) in self.pairs().enumerate() {
            m[(i, j)] = x[k];
        }
        m
    }
}

fn conserves_charge(model: &LindbladModel) -> bool {
    let charge = |i| model.basis.charge(i) as i64;
    let homogeneous = |op: &SparseMatrix| {
        let mut shift = None;
        op.triplets().all(|(i, j, _)| {
            let s = charge(i) - charge(j);
            *shift.get_or_insert(s) == s
        })
    };
    model
        .effective_hamiltonian()
        .triplets()
        .all(|(i, j, _)| charge(i) == charge(j))
        && model.weighted_jumps().all(|(op, _)| homogeneous(op))
}

/// Restricted generator acting on the sector's vectorized unknowns.
fn restricted_generator(model: &LindbladModel, sector: &Sector) -> SparseMatrix {
    let heff = model.effective_hamiltonian();
    let minus_i = Complex64::new(0.0, -1.0);
    let mut triplets = Vec::new();
    for (row, (i, j)) in sector.pairs().enumerate() {
        // −i H_eff ρ
        for (k, h) in heff.row(i) {
            if let Some(col) = sector.index(k, j) {
                triplets.push((row, col, minus_i * h));
            }
        }
        // +i ρ H_eff†
        for (k, h) in heff.row(j) {
            if let Some(col) = sector.index(i, k) {
                triplets.push((row, col, -minus_i * h.conj()));
            }
        }
        for (op, w) in model.weighted_jumps() {
            for (k, a) in op.row(i) {
                for (l, b) in op.row(j) {
                    if let Some(col) = sector.index(k, l) {
                        triplets.push((row, col, a * b.conj() * w));
                    }
                }
            }
        }
    }
    SparseMatrix::from_triplets(sector.size, sector.size, triplets)
}

fn vec_norm(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn relative_residual(l: &SparseMatrix, l_norm: f64, x: &[Complex64]) -> f64 {
    let mut r = vec![ZERO; x.len()];
    l.mul_vec_into(x, &mut r);
    let denom = l_norm * vec_norm(x);
    if denom > 0.0 {
        vec_norm(&r) / denom
    } else {
        f64::INFINITY
    }
}

fn finish(sector: &Sector, x: &[Complex64]) -> DensityState {
    let m = sector.to_matrix(x);
    let mut m = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let tr = m.trace();
    m /= tr;
    DensityState::new(m)
}

pub fn steady_state_with(model: &LindbladModel, opts: &SteadyStateOptions) -> Result<SteadyReport> {
    if !model.is_dissipative() {
        return Err(Error::NonConvergence {
            reason: "no channel has a positive rate; the steady manifold is degenerate".into(),
            residual: f64::NAN,
            time_reached: 0.0,
        });
    }
    let dim = model.dimension();
    let sector = if conserves_charge(model) {
        Sector::new(dim, |i| model.basis.charge(i))
    } else {
        Sector::new(dim, |_| 0)
    };
    let l = restricted_generator(model, &sector);
    let l_norm = l.norm_bound();

    if sector.size <= opts.dense_limit {
        solve_dense(&sector, &l, l_norm, opts)
    } else {
        propagate(model, &sector, &l, l_norm, opts)
    }
}

fn solve_dense(sector: &Sector, l: &SparseMatrix, l_norm: f64, opts: &SteadyStateOptions) -> Result<SteadyReport> {
    let s = sector.size;
    let mut a = l.to_dense();
    let first = sector.blocks[0][0];
    let trace_row = sector.index(first, first).expect("diagonal element is in the sector");
    a.row_mut(trace_row).fill(ZERO);
    let scale = Complex64::new(l_norm.max(1.0), 0.0);
    for i in 0..sector.dim {
        a[(trace_row, sector.index(i, i).unwrap())] = scale;
    }
    let mut b = DVector::zeros(s);
    b[trace_row] = scale;

    let lu = a.lu();
    let pivots = lu.u().diagonal().map(|z| z.norm());
    let (lo, hi) = (pivots.min(), pivots.max());
    if !(lo > 1e-12 * hi) {
        return Err(Error::NonConvergence {
            reason: format!("generator restricted to the steady sector is singular (pivot ratio {:e}); the steady manifold is degenerate", lo / hi),
            residual: f64::NAN,
            time_reached: 0.0,
        });
    }
    let x = lu.solve(&b).ok_or_else(|| Error::NonConvergence {
        reason: "linear solve failed".into(),
        residual: f64::NAN,
        time_reached: 0.0,
    })?;
    let x = x.as_slice();
    let residual = relative_residual(l, l_norm, x);
    if !(residual <= opts.tolerance) {
        return Err(Error::NonConvergence {
            reason: "direct solve residual above tolerance".into(),
            residual,
            time_reached: 0.0,
        });
    }
    Ok(SteadyReport {
        state: finish(sector, x),
        residual,
        method: SolveMethod::DenseNullSpace,
        sector_size: s,
        time_reached: 0.0,
    })
}

fn propagate(
    model: &LindbladModel,
    sector: &Sector,
    l: &SparseMatrix,
    l_norm: f64,
    opts: &SteadyStateOptions,
) -> Result<SteadyReport> {
    let mut x = vec![ZERO; sector.size];
    for i in 0..sector.dim {
        x[sector.index(i, i).unwrap()] = ONE / sector.dim as f64;
    }
    let diag: Vec<(usize, f64, f64)> = (0..sector.dim)
        .map(|i| {
            let (q, n) = model.basis.split(i);
            (sector.index(i, i).unwrap(), n as f64, model.basis.qubits.rz(q))
        })
        .collect();
    let moments = |x: &[Complex64]| {
        diag.iter()
            .fold((0.0, 0.0), |(n, z), &(k, nf, rz)| (n + nf * x[k].re, z + rz * x[k].re))
    };

    let chunk = 5.0 / model.slowest_rate().unwrap();
    let mut dopri = Dopri::new(sector.size, 1e-9, 1e-13);
    let mut f = |y: &[Complex64], dy: &mut [Complex64]| l.mul_vec_into(y, dy);
    let mut h = 1.0 / l_norm.max(f64::MIN_POSITIVE);
    let mut t = 0.0;
    let mut last = moments(&x);
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_chunks {
        dopri.advance(&mut f, &mut x, t, t + chunk, &mut h)?;
        t += chunk;
        let now = moments(&x);
        let drift = ((now.0 - last.0).abs() / now.0.abs().max(1e-12))
            .max((now.1 - last.1).abs() / now.1.abs().max(1e-12));
        last = now;
        residual = relative_residual(l, l_norm, &x);
        if residual <= opts.tolerance && drift <= opts.drift_tolerance {
            return Ok(SteadyReport {
                state: finish(sector, &x),
                residual,
                method: SolveMethod::Propagation,
                sector_size: sector.size,
                time_reached: t,
            });
        }
    }
    Err(Error::NonConvergence {
        reason: "propagation did not settle".into(),
        residual,
        time_reached: t,
    })
}

#[derive(Debug, Clone)]
pub struct AdaptiveSteadyState {
    pub model: LindbladModel,
    pub report: SteadyReport,
    pub observables: Observables,
}

/// Starts at n_max = 4(n̄+1) and doubles until the top Fock level holds less
/// than `options.tail_tolerance`. With `n_max_cap` set, the last attempt is
/// made at the cap and returned even if still truncation-unsafe.
pub fn steady_state_adaptive(
    frame: &DressedFrame,
    ens: &EnsembleConfig,
    osc: &OscillatorParams,
    options: &ModelOptions,
    solver: &SteadyStateOptions,
    n_max_cap: Option<usize>,
) -> Result<AdaptiveSteadyState> {
    let mut n_max = (4.0 * (osc.nbar + 1.0)).ceil().max(1.0) as usize;
    if let Some(cap) = n_max_cap {
        n_max = n_max.min(cap.max(1));
    }
    loop {
        let opts = ModelOptions { n_max, ..*options };
        let model = super::build_model_with(frame, ens, osc, &opts)?;
        let report = steady_state_with(&model, solver)?;
        let observables = model.observables(&report.state);
        let at_cap = n_max_cap.is_some_and(|c| n_max >= c);
        if observables.truncation_safe || at_cap {
            return Ok(AdaptiveSteadyState {
                model,
                report,
                observables,
            });
        }
        n_max *= 2;
        if let Some(cap) = n_max_cap {
            n_max = n_max.min(cap);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic;
    use crate::lindblad::{build_model, build_model_with, Frame};
    use crate::model::{EnsembleMode, SystemConfig};

    fn decoupled(cfg: &SystemConfig) -> DressedFrame {
        let mut fr = cfg.frame().unwrap();
        fr.g_tilde = 0.0;
        fr.g0 = 0.0;
        fr
    }

    #[test]
    fn pure_decay_reaches_ground_and_vacuum() {
        let mut cfg = SystemConfig::reference(0.6, 1, EnsembleMode::Independent);
        cfg.oscillator.nbar = 0.0;
        let mut fr = decoupled(&cfg);
        fr.gamma_minus = 0.0;
        fr.gamma_zero = 0.0;
        let m = build_model(&fr, &cfg.ensemble, &cfg.oscillator, 1, false).unwrap();
        let rho = steady_state(&m).unwrap();
        assert!((rho.matrix[(0, 0)].re - 1.0).abs() < 1e-12);
        assert!(rho.is_physical());
    }

    #[test]
    fn thermal_channels_give_a_geometric_state() {
        let cfg = SystemConfig::reference(0.6, 1, EnsembleMode::Independent);
        let fr = decoupled(&cfg);
        let m = build_model(&fr, &cfg.ensemble, &cfg.oscillator, 120, true).unwrap();
        let rep = steady_state_with(&m, &SteadyStateOptions::default()).unwrap();
        assert_eq!(rep.method, SolveMethod::DenseNullSpace);
        let obs = m.observables(&rep.state);
        assert!((obs.n_mean - 4.0).abs() < 1e-6, "{}", obs.n_mean);
        assert!((obs.g2 - 2.0).abs() < 1e-6, "{}", obs.g2);
        let q = m.qubit_populations(&rep.state);
        assert!((q[1] - fr.upper_population()).abs() < 1e-10);
    }

    #[test]
    fn decoupled_state_factorizes() {
        let cfg = SystemConfig::reference(0.6, 3, EnsembleMode::Collective);
        let fr = decoupled(&cfg);
        let m = build_model(&fr, &cfg.ensemble, &cfg.oscillator, 80, true).unwrap();
        let rho = steady_state(&m).unwrap();
        let q = m.qubit_populations(&rho);
        let p = m.photon_populations(&rho);
        let ladder = crate::lindblad::dicke_rate_ladder_steady(fr.f, 3);
        for (a, b) in q.iter().zip(&ladder.distribution) {
            assert!((a - b).abs() < 1e-8);
        }
        for i in 0..m.dimension() {
            let (qi, n) = m.basis.split(i);
            assert!((rho.matrix[(i, i)].re - q[qi] * p[n]).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_rates_are_degenerate() {
        let mut cfg = SystemConfig::reference(0.6, 1, EnsembleMode::Independent);
        let mut fr = cfg.frame().unwrap();
        cfg.oscillator.kappa = 0.0;
        fr.gamma_plus = 0.0;
        fr.gamma_minus = 0.0;
        fr.gamma_zero = 0.0;
        let m = build_model(&fr, &cfg.ensemble, &cfg.oscillator, 4, true).unwrap();
        assert!(matches!(steady_state(&m), Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn oscillator_without_damping_is_degenerate() {
        let mut cfg = SystemConfig::reference(0.6, 1, EnsembleMode::Independent);
        let fr = decoupled(&cfg);
        cfg.oscillator.kappa = 0.0;
        let m = build_model(&fr, &cfg.ensemble, &cfg.oscillator, 4, true).unwrap();
        assert!(matches!(steady_state(&m), Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn propagation_agrees_with_the_direct_solve() {
        let base = SystemConfig::reference(0.6, 1, EnsembleMode::Independent);
        let cfg = crate::lindblad::scale_separated_config(&base, 0.6).unwrap();
        let mut cfg = cfg;
        cfg.oscillator.kappa *= 100.0;
        let fr = cfg.frame().unwrap();
        let opts = ModelOptions {
            n_max: 12,
            frame: Frame::CoRotating,
            ..ModelOptions::default()
        };
        let m = build_model_with(&fr, &cfg.ensemble, &cfg.oscillator, &opts).unwrap();
        let direct = steady_state_with(&m, &SteadyStateOptions::default()).unwrap();
        let slow = steady_state_with(
            &m,
            &SteadyStateOptions {
                dense_limit: 0,
                ..SteadyStateOptions::default()
            },
        )
        .unwrap();
        assert_eq!(slow.method, SolveMethod::Propagation);
        let a = m.observables(&direct.state);
        let b = m.observables(&slow.state);
        assert!((a.n_mean - b.n_mean).abs() < 1e-7 * a.n_mean, "{} {}", a.n_mean, b.n_mean);
    }

    #[test]
    fn frames_give_the_same_steady_state() {
        let cfg = SystemConfig::reference(0.6, 2, EnsembleMode::Independent);
        let fr = cfg.frame().unwrap();
        let mk = |frame| {
            let o = ModelOptions {
                n_max: 10,
                frame,
                ..ModelOptions::default()
            };
            let m = build_model_with(&fr, &cfg.ensemble, &cfg.oscillator, &o).unwrap();
            m.observables(&steady_state(&m).unwrap())
        };
        let (a, b) = (mk(Frame::Drive), mk(Frame::CoRotating));
        assert!((a.n_mean - b.n_mean).abs() < 1e-8 * a.n_mean);
        assert!((a.rz - b.rz).abs() < 1e-8);
    }

    #[test]
    fn representations_agree_only_for_one_qubit() {
        let obs = |n, mode| {
            let cfg = SystemConfig::reference(0.6, n, mode);
            let m = build_model(&cfg.frame().unwrap(), &cfg.ensemble, &cfg.oscillator, 24, true).unwrap();
            m.observables(&steady_state(&m).unwrap())
        };
        let a = obs(1, EnsembleMode::Independent);
        let b = obs(1, EnsembleMode::Collective);
        assert!((a.n_mean - b.n_mean).abs() < 1e-10 * a.n_mean);
        for n in [2, 3] {
            let a = obs(n, EnsembleMode::Independent);
            let b = obs(n, EnsembleMode::Collective);
            assert!((a.n_mean - b.n_mean).abs() > 1e-3 * a.n_mean);
        }
    }

    #[test]
    fn adaptive_truncation_grows_until_the_tail_is_small() {
        let cfg = SystemConfig::reference(0.6, 1, EnsembleMode::Independent);
        let fr = decoupled(&cfg);
        let out = steady_state_adaptive(
            &fr,
            &cfg.ensemble,
            &cfg.oscillator,
            &ModelOptions::default(),
            &SteadyStateOptions::default(),
            None,
        )
        .unwrap();
        assert_eq!(out.model.basis.n_max, 80);
        assert!(out.observables.truncation_safe);
        let capped = steady_state_adaptive(
            &fr,
            &cfg.ensemble,
            &cfg.oscillator,
            &ModelOptions::default(),
            &SteadyStateOptions::default(),
            Some(30),
        )
        .unwrap();
        assert_eq!(capped.model.basis.n_max, 30);
        assert!(!capped.observables.truncation_safe);
    }

    #[test]
    fn scale_separated_single_qubit_matches_the_reduced_equation() {
        let base = SystemConfig::reference(0.6, 1, EnsembleMode::Independent);
        let cfg = crate::lindblad::scale_separated_config(&base, 0.6).unwrap();
        let fr = cfg.frame().unwrap();
        let m = build_model(&fr, &cfg.ensemble, &cfg.oscillator, 40, true).unwrap();
        let obs = m.observables(&steady_state(&m).unwrap());
        let sol = analytic::solve(&cfg, &Default::default()).unwrap();
        let n = sol.outcome.n_mean().unwrap();
        assert!((obs.n_mean - n).abs() < 0.1 * n, "oracle {} analytic {}", obs.n_mean, n);
        assert!((1.8..=2.2).contains(&obs.g2), "{}", obs.g2);
    }
}
