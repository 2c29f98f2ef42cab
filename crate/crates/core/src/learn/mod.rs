//! Dictionary learning.

pub mod gradient;
pub mod optim;
pub mod train;

pub use gradient::{dict_gradient, dict_gradient_masked, frobenius, DictGradient};
pub use optim::{OptimizerKind, OptimizerState};
pub use train::{
    train_batch, train_batch_on, train_stochastic, train_stochastic_on, LrDecay, OptimizerPhase,
    TrainConfig, TrainOutcome, TrainReport,
};
