//! Multiplierless CNN inference over power-of-two weight codebooks.
//!
//! - [`codebook`]: codeword sets, the greedy multi-stage quantizer, distortion.
//! - [`tensorio`]: tensors, dynamic fixed point, model and tensor files.
//! - [`engine`]: shift/add convolution over precomputed terms, the float
//!   reference, and the network runner.
//! - [`analyzer`]: cycle-count model, histograms, output divergence.
//! - [`cli`]: the `shiftconv` command-line front end.

pub mod analyzer;
pub mod cli;
pub mod codebook;
pub mod engine;
mod error;
pub mod synth;
pub mod tensorio;

pub use error::{Error, Result};
