//! Toy-scale tri-branch fusion classifier with hand-derived gradients.
//!
//! The network is generic over [`Scalar`]: training uses `f32`, finite
//! difference checks use `f64`.

mod attention;
pub mod checkpoint;
mod config;
pub mod diagnostics;
mod model;
pub mod ops;
mod params;
mod scalar;

pub use attention::WindowPlan;
pub use config::{Branch, Branches, FusionMode, NetworkConfig, CONV_STRIDE};
pub use model::{
    argmax, average_pool, backward, conv2d_relu, coord_encode, cross_entropy_from_logits,
    cross_entropy_from_probabilities, cross_entropy_loss, forward, fuse_forward, geometric_encode, photometric_encode,
    predict, window_attention, ForwardTrace, NetInput, PROB_FLOOR,
};
pub(crate) use model::{add_regularizer_grad, backward_into, forward_unchecked};
pub use ops::{layer_norm, softmax, LN_EPS};
pub use params::{Layout, NetworkParams, ParamKind, ParamSpec, Seg};
pub use scalar::Scalar;
