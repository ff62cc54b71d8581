//! A small feed-forward network stack with hand-written backpropagation.
//!
//! Everything here works on `f64` row-major batches (`rows = samples`).
//! Networks are chains of dense layers; the backward pass returns parameter
//! gradients plus the gradient with respect to the network input so that
//! several networks can be composed by the caller.

mod adam;
mod dense;
mod dropout;
mod gradcheck;
mod loss;

pub use adam::{AdamConfig, AdamState};
pub use dense::{Activation, Dense, DenseNet, Forward, Gradients};
pub use dropout::{dropout_mask, dropout_mask_with};
pub use gradcheck::{grad_check, GradCheckReport, Parameterized};
pub use loss::{accuracy, argmax_rows, mse, softmax_xent};
