use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("argument outside function domain: {0}")]
    Domain(String),

    #[error("singular system at u = {u}: g1'(u) = {slope:e}")]
    Singularity { u: f64, slope: f64 },

    #[error("step size underflow at t = {time} (h = {step:e}); system may be stiff")]
    Stiffness { time: f64, step: f64 },

    #[error("state invariant violated at t = {time}: {detail}")]
    Invariant { time: f64, detail: String },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("no edges found in {}", .0.display())]
    EmptyInput(PathBuf),

    #[error("graph generation failed: {0}")]
    Generation(String),

    #[error("simulation did not terminate within {steps} steps")]
    Timeout { steps: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
