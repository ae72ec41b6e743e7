use thiserror::Error;

use crate::navier_stokes::PicardReport;
use crate::robin_stokes::ScheduleViolation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(&'static str),

    #[error("{solver} did not converge: {iterations} iterations, relative residual {residual:.3e}")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("unsupported norm exponent {0} (expected 2, 3, 6 or infinity)")]
    UnsupportedNorm(f64),

    #[error("operation needs at least one wall axis")]
    NoBoundary,

    #[error("field is not admissible: {0}")]
    Inadmissible(String),

    #[error("schedule rejected: {0}")]
    Schedule(#[from] ScheduleViolation),

    #[error("time step {dt} does not divide segment [{start}, {end}]")]
    MisalignedStep { dt: f64, start: f64, end: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Picard iteration diverged after {} iterations", .0.increments.len())]
    PicardDivergence(Box<PicardReport>),
}
