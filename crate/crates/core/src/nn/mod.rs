//! Numeric core: tensors, the differentiation tape, parameters, and optimization.

pub mod gradcheck;
mod kernels;
mod optim;
mod params;
mod real;
pub mod rng;
mod tape;
mod tensor;

pub use optim::{adam_step, clip_grad_norm, uniform_init, AdamConfig, AdamState};
pub use params::ParamStore;
pub use real::Real;
pub use tape::{Elementwise, Tape, Var, XentLoss};
pub use tensor::Tensor;
