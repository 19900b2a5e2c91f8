//! Periodic Fourier-spectral solver for `D_t U = A(t, x, D_x) U + F` in one
//! space dimension, with the exact oracle of the Qi family, weighted norms,
//! energy ratios and empirical measurement of the loss of regularity.

mod analysis;
mod grid;
mod integrate;
mod oracle;
mod system;

use thiserror::Error;

pub use analysis::{
    decay_exponent, decay_exponent_weighted, default_q, empirical_loss, energy_ratio,
    power_law_data, weighted_norm, DecayFit, EnergyRatio, LossMeasurement, LossOptions,
    LossProblem,
};
pub use grid::PeriodicGrid;
pub use integrate::{solve_cauchy, Forcing, SpectralState, SpectralTrajectory, TrajectoryMeta};
pub use oracle::{qi_coefficients, qi_exact, qi_exact_dt, qi_residual};
pub use system::{MatrixField, ModeCtx, ModeSymbol, SeparableTerm, SpectralSystem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("grid size {0} must be a power of two and at least 16")]
    InvalidGrid(usize),
    #[error("regularization eps = {0} not allowed for this system")]
    Regularization(f64),
    #[error("step size underflow at t = {t} (h = {h:e}); max symbol norm {max_symbol_norm:e}")]
    Stiff { t: f64, h: f64, max_symbol_norm: f64 },
    #[error("solution diverged (non-finite values) at t = {t}")]
    Divergence { t: f64 },
    #[error("step limit exceeded at t = {t}")]
    TooManySteps { t: f64 },
    #[error("output times must be finite, nonnegative and strictly increasing")]
    BadTimes,
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("state shape {got:?} does not match (components, modes) = {expected:?}")]
    Shape {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("decay fit failed: {0}")]
    Fit(String),
    #[error("D_t^{s} is not available from a stored trajectory (at most 2)")]
    Capability { s: u32 },
    #[error("invalid problem: {0}")]
    Problem(String),
}
