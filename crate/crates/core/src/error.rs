use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("detuning |δω| = {delta_omega:e} rad/s must be below the Rabi frequency Ω = {omega:e} rad/s")]
    DetuningOutOfRange { delta_omega: f64, omega: f64 },

    #[error("temperature must be positive, got {0} K")]
    NonPositiveTemperature(f64),

    #[error("collective linewidth Γ̃⊥ = {0:e} rad/s is not positive")]
    NonPositiveEffectiveLinewidth(f64),

    #[error("effective coupling g̃ is zero")]
    DivisionByZeroCoupling,

    #[error("resonator is above threshold (η = {eta}); no normalizable steady state")]
    AboveThreshold { eta: f64 },

    #[error("model too large: {reason}")]
    DimensionTooLarge { reason: String },

    #[error("steady state did not converge: {reason} (residual {residual:e}, time reached {time_reached:e} s)")]
    NonConvergence {
        reason: String,
        residual: f64,
        time_reached: f64,
    },

    #[error("step size underflow at t = {time:e} s (h = {step:e} s)")]
    StepSizeUnderflow { time: f64, step: f64 },

    #[error("sweep grids differ between modes: {0}")]
    MismatchedGrids(String),

    #[error("table is empty")]
    EmptyTable,

    #[error("config: {0}")]
    Config(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
