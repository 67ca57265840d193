//! Dense row-major tensors, a reverse-mode tape over them, and a
//! finite-difference gradient checker.
//!
//! Everything here is deliberately small: the models in this crate only
//! need matrix products, a handful of elementwise maps, row gathers,
//! layer normalization and a fused softmax/NLL. Shapes never broadcast
//! implicitly; the only broadcasting ops are [`Tape::add_row`] (bias row
//! over a batch) and [`Tape::mul_col`] (per-row scalar).

mod gradcheck;
mod params;
mod tape;
mod tensor;

pub use gradcheck::gradient_check;
pub use params::{ParamId, ParamStore, Parameter};
pub use tape::{Gradients, Tape, Var};
pub use tensor::{softmax, Real, Tensor};
