//! Steady-state cooling of a quantum LC resonator coupled to an ensemble of
//! driven flux qubits.
//!
//! The crate has two independent routes to the resonator steady state:
//!
//! * [`analytic`]: the closed-form dressed-state pipeline. Qubit variables are
//!   eliminated and the resonator obeys a birth–death master equation with
//!   effective rates Γ₋ (photon loss) and Γ₊ (photon gain). Its steady state is
//!   geometric with ⟨n⟩ = 1/(η − 1), η = Γ₋/Γ₊.
//! * [`lindblad`]: a brute-force oracle that builds the effective Hamiltonian
//!   and dissipators on a truncated joint qubit–Fock space and solves for the
//!   steady state numerically.
//!
//! [`model`] turns raw circuit and drive parameters into the dressed-frame
//! quantities both routes consume, [`sweep`] produces figure-style tables and
//! [`cli`] is the command-line front end.
//!
//! All frequencies and rates inside the crate are angular (rad/s). Config files
//! and CSV output use ordinary frequencies ν = ω/2π in Hz.

pub mod analytic;
pub mod cli;
pub mod error;
pub mod lindblad;
pub mod model;
pub mod sweep;

pub use error::{Error, Result};
