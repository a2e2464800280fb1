use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// `v_g` carries `cot g` and `csc g`, both undefined at `g = 0`.
    #[error("generation velocity is singular at g = {g}")]
    SingularTime { g: f64 },

    /// The hybrid step ratio `sin g2 / sin g1` is undefined when `g1 = 0`.
    #[error("hybrid step cannot start at g1 = 0; take a booting step first")]
    SingularStart,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("insufficient data: need at least {need} samples, got {got}")]
    InsufficientData { need: usize, got: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-finite loss {loss} at step {step} (r = {r}, g = {g})")]
    NonFiniteLoss { step: usize, r: f64, g: f64, loss: f64 },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
