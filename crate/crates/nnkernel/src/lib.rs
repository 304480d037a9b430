//! Small, deterministic neural-network kernel in 64-bit floats.
//!
//! Provides exactly what the wind-power feature learners need: a tensor
//! type, a reverse-mode tape ([`Graph`]), four-gate LSTM, valid 2-D
//! convolution, fully-connected layers, ELU/ReLU activations, squared-error
//! losses and the Adam optimizer. Everything runs on one thread; separate
//! graphs share no state.

mod adam;
mod graph;
mod layers;
mod loss;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use graph::{Graph, Var};
pub use layers::{
    conv2d_forward, elu, fc_forward, glorot_uniform, lstm_forward, Conv2dParams, Conv2dVars, FcParams, FcVars,
    LstmParams, LstmVars,
};
pub use loss::{combined_loss, mse_loss};
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("{op}: shape mismatch, expected {expected}, got {got}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("{rows}x{cols} input is smaller than the {kernel:?} kernel")]
    InputTooSmall {
        rows: usize,
        cols: usize,
        kernel: (usize, usize),
    },
    #[error("{0}: empty input")]
    EmptyInput(&'static str),
    #[error("backward called on a node that was never recorded")]
    NoForward,
    #[error("gradients requested before backward")]
    NoGradient,
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),
}
