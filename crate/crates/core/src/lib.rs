//! Trajectory prediction with an adversarially trained augmenter of
//! synthetic data.
//!
//! The crate is organized bottom-up:
//!
//! - [`nn`]: tensors, a reverse-mode tape, layers, Adam, checkpoint container
//! - [`data`] and [`synth`]: dataset files, scene windows, synthetic data
//! - [`models`]: Augmenter, Generator, Discriminator and social pooling
//! - [`losses`]: adversarial and variety objectives
//! - [`training`]: the three-phase schedule, baselines and checkpoints
//! - [`eval`]: ADE/FDE, best-of-N, leave-one-out, plots

pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod losses;
pub mod models;
pub mod nn;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
