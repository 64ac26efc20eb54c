//! File formats, checkpoints, experiment configuration and the `crossnet`
//! command-line driver on top of [`crossnet_core`].

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod csv;
pub mod dataset;
pub mod error;
pub mod pipeline;
pub mod ppm;

pub use error::{AppError, ErrorKind, Result};
