pub mod baselines;
pub mod checkpoint;
pub mod container;
pub mod data;
pub mod error;
pub mod eval;
pub mod kind;
pub mod layers;
pub mod numkernel;
pub mod optim;

pub use error::{Error, Result};
pub use kind::ModelKind;
