//! A small deterministic feed-forward engine: dense layers, activations,
//! weighted binary cross-entropy, hand-written reverse-mode gradients,
//! SGD/Adam, and a finite-difference gradient checker.
//!
//! Everything runs in `f64`. Models expose their learnable tensors through
//! [`ParamSet`]; gradients are represented as a second instance of the same
//! model type, so the optimizer and the gradient checker are generic over any
//! topology.

mod activation;
mod gradcheck;
pub(crate) mod layer;
mod loss;
mod optim;
mod params;

pub use activation::{sigmoid, Activation};
pub use gradcheck::{grad_check, Differentiable, GradCheckConfig, GradCheckReport};
pub use layer::{glorot_limit, DenseLayer, MlpStack};
pub use loss::{bce_term, clamp_probability, weighted_bce_loss, PROB_CLAMP};
pub use optim::{OptimizerConfig, OptimizerKind, OptimizerState};
pub use params::{check_finite, param_count, zeroed, ParamSet, TensorRef};
