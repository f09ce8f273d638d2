//! Two-hidden-layer MLP policy, its supervised losses with hand-derived
//! gradients, Adam, and a finite-difference gradient checker.

pub mod adam;
pub mod checkpoint;
mod gradcheck;
mod loss;
mod net;
mod sample;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{grad_check, GradCheck};
pub use loss::{
    continuous_loss_and_grad, continuous_loss_and_grad_raw, discrete_loss_and_grad, discrete_loss_and_grad_raw,
    loss_and_grad, softmax, BatchActions, BatchSample,
};
pub use net::{HeadKind, Layout, PolicyParams, DEFAULT_HIDDEN};
pub use sample::{greedy_action, sample_action};
