//! Minimal dense-tensor engine with reverse-mode differentiation.
//!
//! A dynamic [`Tape`] records every primitive as it runs; gradients come
//! from one reverse sweep. Tapes are cheap and rebuilt per forward pass,
//! which suits per-graph edge partitions that change sample to sample.
//! Everything is f64.

mod check;
mod optim;
mod tape;
mod tensor;

pub use check::{grad_check, GRAD_CHECK_EPS};
pub use optim::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use tape::{Axis, Gradients, Tape, TapeError, Value};
pub use tensor::Tensor;
