//! Dual encoder/decoder image translation with latent cross-translators.
//!
//! Everything in this crate is pure computation over `alloc` collections:
//! a small reverse-mode autodiff engine, the eight translation networks,
//! the latent consistency losses, the training step, synthetic two-domain
//! data, and the evaluation math (Fréchet distance, latent PCA, foreground
//! extraction, ROC/AUC). File formats and the command-line driver live in
//! the `crossnet` crate.
#![no_std]
// `!(x > y)` on floats is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod data;
pub mod error;
pub mod eval;
pub mod history;
mod kernels;
pub mod losses;
pub mod nn;
pub mod optim;
pub mod param;
pub mod scalar;
pub mod tape;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Real;
pub use tape::{PadSpec, Tape, Var};
pub use tensor::Tensor;
