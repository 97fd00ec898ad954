//! Brute-force master-equation oracle on a truncated qubit ⊗ Fock space.
//!
//! Channels carry the rate symbols of the dissipators as written, γ[X, Yρ] + H.c.
//! Expanding that form gives jump operator Y at rate 2γ, so the generator
//! multiplies every stored rate by two:
//!
//! L(ρ) = −i[H, ρ] + Σₖ 2rₖ (Lₖ ρ Lₖ† − ½{Lₖ†Lₖ, ρ}).
//!
//! Basis states are indexed `q·(n_max+1) + n` with `q` the qubit label and `n`
//! the photon number. In the tensor-product representation bit `i` of `q` is
//! qubit `i` (set = upper dressed state |+⟩); in the Dicke ladder `q = k` counts
//! excitations, so R_z = 2k − N.

pub mod evolve;
pub mod ladder;
pub mod sparse;
pub mod steady;

use nalgebra::DMatrix;
use num_complex::Complex64;

pub use evolve::{evolve, fit_decay_rate, EvolveOptions, Trajectory, TrajectoryPoint};
pub use ladder::{dicke_rate_ladder_steady, LadderSteadyState};
pub use sparse::SparseMatrix;
pub use steady::{
    steady_state, steady_state_adaptive, steady_state_with, AdaptiveSteadyState, SolveMethod,
    SteadyReport, SteadyStateOptions,
};

use crate::error::{Error, Result};
use crate::model::{
    DressedFrame, DriveParams, EnsembleConfig, EnsembleMode, OscillatorParams, SystemConfig,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QubitRepresentation {
    /// Full 2^N space, one factor per qubit.
    TensorProduct(usize),
    /// Symmetric sector |j = N/2, m⟩, dimension N + 1.
    DickeLadder(usize),
}

impl QubitRepresentation {
    pub fn n_qubits(&self) -> usize {
        match *self {
            Self::TensorProduct(n) | Self::DickeLadder(n) => n,
        }
    }

    pub fn dimension(&self) -> usize {
        match *self {
            Self::TensorProduct(n) => 1 << n,
            Self::DickeLadder(n) => n + 1,
        }
    }

    /// Number of qubits in |+⟩ for basis label `q`.
    pub fn excitations(&self, q: usize) -> usize {
        match *self {
            Self::TensorProduct(_) => q.count_ones() as usize,
            Self::DickeLadder(_) => q,
        }
    }

    /// Eigenvalue of R_z on basis label `q`.
    pub fn rz(&self, q: usize) -> f64 {
        2.0 * self.excitations(q) as f64 - self.n_qubits() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Basis {
    pub n_max: usize,
    pub qubits: QubitRepresentation,
}

impl Basis {
    pub fn fock_dimension(&self) -> usize {
        self.n_max + 1
    }

    pub fn dimension(&self) -> usize {
        self.qubits.dimension() * self.fock_dimension()
    }

    pub fn index(&self, q: usize, n: usize) -> usize {
        q * self.fock_dimension() + n
    }

    /// Inverse of [`Basis::index`]: `(q, n)`.
    pub fn split(&self, idx: usize) -> (usize, usize) {
        (idx / self.fock_dimension(), idx % self.fock_dimension())
    }

    /// Total excitation number n + (qubits in |+⟩).
    pub fn charge(&self, idx: usize) -> usize {
        let (q, n) = self.split(idx);
        n + self.qubits.excitations(q)
    }
}

/// Reference frame of the Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Frame {
    /// Rotating at the drive: ω_c a†a + Ω R_z/2 retained.
    #[default]
    Drive,
    /// Additionally rotating at ω_c(a†a + R_z/2); only Ω − ω_c survives.
    CoRotating,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelOptions {
    pub n_max: usize,
    pub include_g0: bool,
    pub frame: Frame,
    /// Largest N accepted in the tensor-product representation.
    pub max_tensor_qubits: usize,
    /// Budget for dense working storage, in bytes.
    pub storage_budget: usize,
    /// Tail population above which observables are flagged truncation-unsafe.
    pub tail_tolerance: f64,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            n_max: 20,
            include_g0: true,
            frame: Frame::Drive,
            max_tensor_qubits: 4,
            storage_budget: 2 << 30,
            tail_tolerance: 1e-8,
        }
    }
}

impl ModelOptions {
    pub fn with_n_max(n_max: usize) -> Self {
        Self {
            n_max,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct JumpChannel {
    pub label: String,
    pub operator: SparseMatrix,
    /// Rate symbol as it appears in the dissipator; the jump fires at 2·rate.
    pub rate: f64,
}

#[derive(Debug, Clone)]
struct CompiledJump {
    op: SparseMatrix,
    weight: f64,
}

#[derive(Debug, Clone)]
pub struct LindbladModel {
    pub basis: Basis,
    pub hamiltonian: SparseMatrix,
    pub channels: Vec<JumpChannel>,
    pub options: ModelOptions,
    /// H − i Σ rₖ Lₖ†Lₖ.
    effective: SparseMatrix,
    jumps: Vec<CompiledJump>,
}

/// Qubit-space operators: total raising R₊₋, per-qubit lowering/raising/R_z.
struct QubitOps {
    raise: SparseMatrix,
    rz: SparseMatrix,
    single: Vec<(SparseMatrix, SparseMatrix, SparseMatrix)>,
}

fn qubit_ops(rep: QubitRepresentation) -> QubitOps {
    let dim = rep.dimension();
    let rz = SparseMatrix::diagonal(&(0..dim).map(|q| re(rep.rz(q))).collect::<Vec<_>>());
    match rep {
        QubitRepresentation::TensorProduct(n) => {
            let mut single = Vec::with_capacity(n);
            let mut total = Vec::new();
            for i in 0..n {
                let bit = 1usize << i;
                let raise: Vec<_> = (0..dim)
                    .filter(|q| q & bit == 0)
                    .map(|q| (q | bit, q, ONE))
                    .collect();
                total.extend(raise.iter().copied());
                let raise = SparseMatrix::from_triplets(dim, dim, raise);
                let lower = raise.adjoint();
                let z = SparseMatrix::diagonal(
                    &(0..dim)
                        .map(|q| if q & bit != 0 { ONE } else { -ONE })
                        .collect::<Vec<_>>(),
                );
                single.push((lower, raise, z));
            }
            QubitOps {
                raise: SparseMatrix::from_triplets(dim, dim, total),
                rz,
                single,
            }
        }
        QubitRepresentation::DickeLadder(n) => {
            let raise = SparseMatrix::from_triplets(
                dim,
                dim,
                (0..n)
                    .map(|k| (k + 1, k, re((((n - k) * (k + 1)) as f64).sqrt())))
                    .collect(),
            );
            QubitOps {
                raise,
                rz,
                single: Vec::new(),
            }
        }
    }
}

fn annihilation(n_max: usize) -> SparseMatrix {
    SparseMatrix::from_triplets(
        n_max + 1,
        n_max + 1,
        (1..=n_max).map(|n| (n - 1, n, re((n as f64).sqrt()))).collect(),
    )
}

fn representation_for(ens: &EnsembleConfig, opts: &ModelOptions) -> Result<QubitRepresentation> {
    match ens.mode {
        EnsembleMode::Independent => {
            if ens.n_qubits > opts.max_tensor_qubits {
                return Err(Error::DimensionTooLarge {
                    reason: format!(
                        "independent qubits need the 2^N tensor-product space; N = {} exceeds the limit of {}",
                        ens.n_qubits, opts.max_tensor_qubits
                    ),
                });
            }
            Ok(QubitRepresentation::TensorProduct(ens.n_qubits))
        }
        EnsembleMode::Collective => Ok(QubitRepresentation::DickeLadder(ens.n_qubits)),
    }
}

pub fn build_model(
    frame: &DressedFrame,
    ens: &EnsembleConfig,
    osc: &OscillatorParams,
    n_max: usize,
    include_g0: bool,
) -> Result<LindbladModel> {
    build_model_with(
        frame,
        ens,
        osc,
        &ModelOptions {
            n_max,
            include_g0,
            ..ModelOptions::default()
        },
    )
}

pub fn build_model_with(
    frame: &DressedFrame,
    ens: &EnsembleConfig,
    osc: &OscillatorParams,
    opts: &ModelOptions,
) -> Result<LindbladModel> {
    if opts.n_max < 1 {
        return Err(Error::invalid("oracle.n_max", "must be at least 1"));
    }
    if ens.n_qubits == 0 {
        return Err(Error::invalid("ensemble.n", "must be at least 1"));
    }
    // A switched-off oscillator bath is allowed here; the steady solver reports
    // the resulting degeneracy.
    if !(osc.omega_c > 0.0 && osc.kappa >= 0.0 && osc.nbar >= 0.0)
        || !(osc.omega_c.is_finite() && osc.kappa.is_finite() && osc.nbar.is_finite())
    {
        return Err(Error::invalid("oscillator", "need ω_c > 0, κ >= 0, n̄ >= 0, all finite"));
    }
    let rep = representation_for(ens, opts)?;
    let basis = Basis {
        n_max: opts.n_max,
        qubits: rep,
    };
    let dim = basis.dimension();
    // Propagation keeps roughly a dozen dense d×d complex buffers alive.
    let storage = (dim as f64).powi(2) * 16.0 * 12.0;
    if storage > opts.storage_budget as f64 {
        return Err(Error::DimensionTooLarge {
            reason: format!(
                "dimension {dim} needs ~{:.1} MiB of working storage, budget is {:.1} MiB",
                storage / (1 << 20) as f64,
                opts.storage_budget as f64 / (1 << 20) as f64
            ),
        });
    }

    let q = qubit_ops(rep);
    let qid = SparseMatrix::identity(rep.dimension());
    let fid = SparseMatrix::identity(basis.fock_dimension());
    let a_f = annihilation(opts.n_max);
    let num_f = SparseMatrix::diagonal(&(0..=opts.n_max).map(|n| re(n as f64)).collect::<Vec<_>>());

    let a = qid.kron(&a_f);
    let adag = a.adjoint();
    let num = qid.kron(&num_f);
    let rz = q.rz.kron(&fid);
    let raise = q.raise.kron(&fid);
    let lower = raise.adjoint();

    let (w_osc, w_qubit) = match opts.frame {
        Frame::Drive => (osc.omega_c, frame.omega_rabi),
        Frame::CoRotating => (0.0, frame.omega_rabi - osc.omega_c),
    };
    let mut h = num
        .scale(re(w_osc))
        .add(&rz.scale(re(0.5 * w_qubit)))
        .add(&raise.matmul(&a).add(&adag.matmul(&lower)).scale(re(frame.g_tilde)));
    if opts.include_g0 && frame.g0 != 0.0 {
        // aa† + a†a = 2n + 1 on the untruncated space.
        let two_n_plus_one = SparseMatrix::diagonal(
            &(0..=opts.n_max).map(|n| re(2.0 * n as f64 + 1.0)).collect::<Vec<_>>(),
        );
        h = h.add(&q.rz.kron(&two_n_plus_one).scale(re(0.5 * frame.g0)));
    }

    let mut channels = Vec::new();
    match rep {
        QubitRepresentation::TensorProduct(_) => {
            for (i, (lo, up, z)) in q.single.iter().enumerate() {
                channels.push(JumpChannel {
                    label: format!("qubit {i} down"),
                    operator: lo.kron(&fid),
                    rate: frame.gamma_plus,
                });
                channels.push(JumpChannel {
                    label: format!("qubit {i} up"),
                    operator: up.kron(&fid),
                    rate: frame.gamma_minus,
                });
                channels.push(JumpChannel {
                    label: format!("qubit {i} dephasing"),
                    operator: z.kron(&fid),
                    rate: frame.gamma_zero,
                });
            }
        }
        QubitRepresentation::DickeLadder(_) => {
            channels.push(JumpChannel {
                label: "collective down".into(),
                operator: lower.clone(),
                rate: frame.gamma_plus,
            });
            channels.push(JumpChannel {
                label: "collective up".into(),
                operator: raise.clone(),
                rate: frame.gamma_minus,
            });
            channels.push(JumpChannel {
                label: "collective dephasing".into(),
                operator: rz.clone(),
                rate: frame.gamma_zero,
            });
        }
    }
    channels.push(JumpChannel {
        label: "photon loss".into(),
        operator: a,
        rate: osc.kappa * (1.0 + osc.nbar),
    });
    channels.push(JumpChannel {
        label: "photon gain".into(),
        operator: adag,
        rate: osc.kappa * osc.nbar,
    });

    LindbladModel::new(basis, h, channels, *opts)
}

impl LindbladModel {
    pub fn new(
        basis: Basis,
        hamiltonian: SparseMatrix,
        channels: Vec<JumpChannel>,
        options: ModelOptions,
    ) -> Result<Self> {
        let dim = basis.dimension();
        if hamiltonian.nrows() != dim || hamiltonian.ncols() != dim {
            return Err(Error::invalid("hamiltonian", "shape does not match the basis"));
        }
        let scale = hamiltonian.norm_bound().max(1.0);
        if hamiltonian.hermiticity_defect() > 1e-12 * scale {
            return Err(Error::invalid("hamiltonian", "not Hermitian"));
        }
        let mut effective = hamiltonian.clone();
        let mut jumps = Vec::new();
        for ch in &channels {
            if !(ch.rate >= 0.0 && ch.rate.is_finite()) {
                return Err(Error::invalid("channel rate", format!("`{}` has rate {}", ch.label, ch.rate)));
            }
            if ch.operator.nrows() != dim || ch.operator.ncols() != dim {
                return Err(Error::invalid("jump operator", "shape does not match the basis"));
            }
            if ch.rate == 0.0 || ch.operator.nnz() == 0 {
                continue;
            }
            let ldl = ch.operator.adjoint().matmul(&ch.operator);
            effective = effective.add(&ldl.scale(-I * ch.rate));
            jumps.push(CompiledJump {
                op: ch.operator.clone(),
                weight: 2.0 * ch.rate,
            });
        }
        Ok(Self {
            basis,
            hamiltonian,
            channels,
            options,
            effective,
            jumps,
        })
    }

    pub fn dimension(&self) -> usize {
        self.basis.dimension()
    }

    /// True if at least one channel has a positive rate.
    pub fn is_dissipative(&self) -> bool {
        !self.jumps.is_empty()
    }

    pub(crate) fn effective_hamiltonian(&self) -> &SparseMatrix {
        &self.effective
    }

    pub(crate) fn weighted_jumps(&self) -> impl Iterator<Item = (&SparseMatrix, f64)> {
        self.jumps.iter().map(|j| (&j.op, j.weight))
    }

    /// Smallest positive jump weight 2rₖ, the slowest dissipative scale.
    pub(crate) fn slowest_rate(&self) -> Option<f64> {
        self.jumps.iter().map(|j| j.weight).reduce(f64::min)
    }

    /// L(ρ), applied without forming the superoperator.
    pub fn apply_generator(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let d = self.dimension();
        let mut out = DMatrix::zeros(d, d);
        let mut work = DMatrix::zeros(d, d);
        self.apply_generator_into(rho, &mut out, &mut work);
        out
    }

    pub(crate) fn apply_generator_into(
        &self,
        rho: &DMatrix<Complex64>,
        out: &mut DMatrix<Complex64>,
        work: &mut DMatrix<Complex64>,
    ) {
        // −i H_eff ρ + i ρ H_eff†, with ρ H_eff† = (H_eff ρ†)†.
        self.effective.mul_dense_into(rho, out);
        let rho_dag = rho.adjoint();
        self.effective.mul_dense_into(&rho_dag, work);
        let d = rho.nrows();
        for c in 0..d {
            for r in 0..d {
                out[(r, c)] = -I * out[(r, c)] + I * work[(c, r)].conj();
            }
        }
        for jump in &self.jumps {
            // L ρ L† = L (L ρ†)†.
            jump.op.mul_dense_into(&rho_dag, work);
            let half = work.adjoint();
            jump.op.mul_dense_into(&half, work);
            out.zip_apply(work, |o, w| *o += w * jump.weight);
        }
    }

    pub fn observables(&self, state: &DensityState) -> Observables {
        let p = self.populations(&state.matrix);
        let mut n_mean = 0.0;
        let mut n2 = 0.0;
        let mut rz = 0.0;
        let mut tail = 0.0;
        for (idx, &pi) in p.iter().enumerate() {
            let (q, n) = self.basis.split(idx);
            let nf = n as f64;
            n_mean += nf * pi;
            n2 += nf * (nf - 1.0) * pi;
            rz += self.basis.qubits.rz(q) * pi;
            if n == self.basis.n_max {
                tail += pi;
            }
        }
        let g2 = if n_mean > 0.0 { n2 / (n_mean * n_mean) } else { f64::NAN };
        Observables {
            n_mean,
            n2,
            g2,
            rz,
            tail_probability: tail,
            truncation_safe: tail < self.options.tail_tolerance,
        }
    }

    fn populations(&self, rho: &DMatrix<Complex64>) -> Vec<f64> {
        (0..self.dimension()).map(|i| rho[(i, i)].re).collect()
    }

    /// Reduced photon-number distribution.
    pub fn photon_populations(&self, state: &DensityState) -> Vec<f64> {
        let mut out = vec![0.0; self.basis.fock_dimension()];
        for (idx, p) in self.populations(&state.matrix).into_iter().enumerate() {
            out[self.basis.split(idx).1] += p;
        }
        out
    }

    /// Reduced populations over qubit basis labels.
    pub fn qubit_populations(&self, state: &DensityState) -> Vec<f64> {
        let mut out = vec![0.0; self.basis.qubits.dimension()];
        for (idx, p) in self.populations(&state.matrix).into_iter().enumerate() {
            out[self.basis.split(idx).0] += p;
        }
        out
    }

    /// Diagonal product state with the given qubit and photon populations.
    pub fn product_state(&self, qubit: &[f64], photons: &[f64]) -> Result<DensityState> {
        if qubit.len() != self.basis.qubits.dimension() || photons.len() != self.basis.fock_dimension() {
            return Err(Error::invalid("initial state", "population vectors do not match the basis"));
        }
        let diag: Vec<Complex64> = (0..self.dimension())
            .map(|idx| {
                let (q, n) = self.basis.split(idx);
                re(qubit[q] * photons[n])
            })
            .collect();
        Ok(DensityState::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag))))
    }

    /// Truncated, renormalized geometric distribution with mean `nbar` before truncation.
    pub fn thermal_photons(&self, nbar: f64) -> Vec<f64> {
        let ratio = if nbar > 0.0 { nbar / (1.0 + nbar) } else { 0.0 };
        let mut p: Vec<f64> = (0..=self.basis.n_max).map(|n| ratio.powi(n as i32)).collect();
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= total);
        p
    }

    /// All qubits in |−⟩.
    pub fn qubit_ground(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.basis.qubits.dimension()];
        p[0] = 1.0;
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables {
    pub n_mean: f64,
    /// ⟨a†²a²⟩.
    pub n2: f64,
    pub g2: f64,
    pub rz: f64,
    /// Population of the top Fock level.
    pub tail_probability: f64,
    pub truncation_safe: bool,
}

#[derive(Debug, Clone)]
pub struct DensityState {
    pub matrix: DMatrix<Complex64>,
    pub trace: f64,
    pub hermiticity_defect: f64,
    pub min_eigenvalue: f64,
}

pub(crate) fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Components larger than this get a Gershgorin bound instead of an eigensolve.
const EXACT_EIGEN_LIMIT: usize = 1200;

impl DensityState {
    pub fn new(matrix: DMatrix<Complex64>) -> Self {
        let trace = matrix.trace().re;
        let hermiticity_defect = max_abs(&(&matrix - matrix.adjoint()));
        let min_eigenvalue = min_eigenvalue_estimate(&matrix);
        Self {
            matrix,
            trace,
            hermiticity_defect,
            min_eigenvalue,
        }
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_physical(&self) -> bool {
        (self.trace - 1.0).abs() <= 1e-9 && self.hermiticity_defect < 1e-9 && self.min_eigenvalue > -1e-8
    }
}

/// Eigenvalues are taken per connected block of the sparsity pattern, which is
/// exact for block-diagonal states and cheap for the charge-diagonal ones.
fn min_eigenvalue_estimate(m: &DMatrix<Complex64>) -> f64 {
    let d = m.nrows();
    let mut parent: Vec<usize> = (0..d).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for c in 0..d {
        for r in 0..c {
            if m[(r, c)] != ZERO || m[(c, r)] != ZERO {
                let (a, b) = (find(&mut parent, r), find(&mut parent, c));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..d {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    let mut min = f64::INFINITY;
    for idx in groups.values() {
        let k = idx.len();
        let block = DMatrix::from_fn(k, k, |r, c| {
            0.5 * (m[(idx[r], idx[c])] + m[(idx[c], idx[r])].conj())
        });
        let low = if k == 1 {
            block[(0, 0)].re
        } else if k <= EXACT_EIGEN_LIMIT {
            block
                .symmetric_eigenvalues()
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min)
        } else {
            (0..k)
                .map(|r| {
                    let off: f64 = (0..k).filter(|&c| c != r).map(|c| block[(r, c)].norm()).sum();
                    block[(r, r)].re - off
                })
                .fold(f64::INFINITY, f64::min)
        };
        min = min.min(low);
    }
    min
}

/// The widened-separation oracle point: Ω locked to ω_c at δω/Ω = `ratio`,
/// g chosen so g̃ = 0.01γ, κ = 10⁻⁴γ; qubit parameters and n̄ are kept.
pub fn scale_separated_config(base: &SystemConfig, ratio: f64) -> Result<SystemConfig> {
    let mut cfg = *base;
    cfg.drive = DriveParams::locked(ratio, cfg.oscillator.omega_c);
    cfg.coupling = 0.0;
    let unit = cfg.frame()?;
    let per_g = unit.cos2theta * unit.sin2xi;
    if per_g == 0.0 {
        return Err(Error::DivisionByZeroCoupling);
    }
    cfg.coupling = (0.01 * cfg.qubit.gamma / per_g).abs();
    cfg.oscillator.kappa = 1e-4 * cfg.qubit.gamma;
    Ok(cfg)
}
