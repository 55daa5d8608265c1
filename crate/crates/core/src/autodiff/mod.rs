//! Minimal reverse-mode automatic differentiation over dense `f64` arrays.
//!
//! Only the operations the encoder and the training losses need are
//! provided. Values are recorded on a [`Tape`]; [`Tape::backward`] fills the
//! gradients of every node that requires one.

mod adam;
pub mod gradcheck;
mod tape;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use tape::{cross_entropy, entropy, softmax_t, Tape, Var, LAYER_NORM_EPS, LOG_CLAMP};
pub use tensor::{matmul_plain, Tensor};
