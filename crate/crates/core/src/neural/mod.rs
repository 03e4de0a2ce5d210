//! Dense numeric kernel: two-layer MLPs with hand-derived gradients, Xavier
//! initialization, Adam, dropout and losses.
//!
//! Everything is generic over the element type so tests can run in `f64`
//! and production runs in `f32`.

mod adam;
mod loss;
mod mlp;

pub use adam::{AdamConfig, AdamState};
pub use loss::{bce_with_logits, cross_entropy, softmax, softmax_rows, LossTarget, Prediction};
pub use mlp::{mlp_backward, mlp_forward, xavier_init, Activation, MlpCache, MlpGrads, MlpParams, Mode};

use ndarray::NdFloat;

/// Converts an `f64` constant into the working precision.
#[inline]
pub fn cst<F: NdFloat>(x: f64) -> F {
    F::from(x).expect("f64 constant representable")
}
