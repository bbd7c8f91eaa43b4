use thiserror::Error;

/// Errors raised by the model, its solvers and the experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("index {index} out of range (limit {limit})")]
    OutOfRange { index: usize, limit: usize },

    #[error("numerical failure: {0}")]
    Numerical(#[from] NumericalFailure),
}

/// A solver that did not reach its tolerance. Carries enough context to
/// reproduce the offending evaluation.
#[derive(Debug, Clone, Error)]
pub enum NumericalFailure {
    #[error("eigensolver did not converge for eigenvalue {index} after {iterations} iterations (seed {seed:?}, t = {time})")]
    Eigensolver {
        index: usize,
        iterations: usize,
        seed: Option<u64>,
        time: f64,
    },

    #[error("fixed-point iteration stalled after {iterations} iterations (damping {damping}, last step {residual:e})")]
    FixedPoint {
        iterations: usize,
        damping: f64,
        residual: f64,
    },

    #[error("ODE step size underflow at t = {time} (h = {step:e}); {samples} samples recorded")]
    StepUnderflow {
        time: f64,
        step: f64,
        samples: usize,
    },

    #[error("preimage shooting failed to converge: residual {residual:e} after {iterations} corrections")]
    Shooting { residual: f64, iterations: usize },

    #[error("characteristic from ({re}, {im}) stopped before the horizon while solving for a preimage")]
    PrematureStop { re: f64, im: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
