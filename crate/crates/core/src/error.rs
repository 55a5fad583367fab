use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    DimensionMismatch {
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },

    #[error("invalid dimensions {width}x{height}: {reason}")]
    InvalidDimensions {
        width: usize,
        height: usize,
        reason: &'static str,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("value {value} at index {index} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("mask value {value} at index {index} is not binary")]
    NotBinary { index: usize, value: f64 },

    #[error("inverse transform left an imaginary residual of {residual:e} (real scale {scale:e})")]
    ImaginaryResidual { residual: f64, scale: f64 },

    #[error("direct O(N^2) evaluation refused for {width}x{height} grid (limit 64x64 unless forced)")]
    DirectTooLarge { width: usize, height: usize },

    #[error("AUC is undefined: the mask contains only one class")]
    DegenerateMask,

    #[error("gradient flow aborted at step {step}: step size fell below {min_eta:e}")]
    Diverged { step: usize, min_eta: f64 },

    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("malformed image {path}: {reason}")]
    Image { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
