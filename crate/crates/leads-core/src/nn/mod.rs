//! Neural building blocks: a matrix autodiff tape, dense networks, Adam,
//! the squashed-Gaussian policy, and binary checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod dense;
pub mod policy;
pub mod tape;

pub use adam::AdamState;
pub use checkpoint::{load_policy, save_policy};
pub use dense::{flatten_grads, Activation, DenseNet, Layer};
pub use policy::{
    sample_noise, squashed_logp, squashed_logp_tape, tanh_log_jacobian, PolicyModel, PolicyVars,
    LOGSTD_MAX, LOGSTD_MIN,
};
pub use tape::{sigmoid, softplus, Gradients, Tape, Var};
