use thiserror::Error;

use crate::vortons::Trajectory;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Evaluation at a singular point of a Green's function or field.
    #[error("pole: {0}")]
    Pole(String),

    /// The requested combination of parameters is not supported.
    #[error("unsupported: {0}")]
    Capability(String),

    #[error("expected {expected} vortons, got {got}")]
    Arity { expected: usize, got: usize },

    /// An oscillatory integral whose partial sums do not settle.
    #[error("integral does not converge: {0}")]
    Divergence(String),

    /// Adaptive stepping collapsed; carries everything integrated so far.
    #[error("step size underflow at t = {t} (near collision)")]
    NearCollision { t: f64, partial: Box<Trajectory> },

    #[error("CFL violation: dt = {dt} exceeds stable step, try dt <= {suggested}")]
    Cfl { dt: f64, suggested: f64 },

    #[error("resolution too low: {0}")]
    Resolution(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}
