//! Sequence NLL, Adam with polynomial learning-rate decay, and the
//! full-unroll training loop.

mod adam;
mod loss;
mod schedule;
mod train;

pub use adam::{adam_update, clip_grad_norm, AdamState};
pub use loss::{nll_loss, NllLoss};
pub use schedule::{lr_at, LrSchedule};
pub use train::{train, train_with, StepRecord, TrainConfig, TrainLog};
