//! Style-consistency testing and diffusion-based repair for machine
//! translation output.
//!
//! The crate has two halves. The *detector* compares the style label a
//! per-language classifier assigns to a source sentence with the label
//! assigned to its translation and flags disagreements. The *applicator*
//! rewrites a flagged translation with a guided discrete diffusion sampler
//! that pulls the text toward exemplars of the source style, and *repair*
//! picks the best meaning-preserving candidate.
//!
//! All learned components sit behind [`backend::ModelBackend`].

pub mod applicator;
pub mod backend;
pub mod cli;
pub mod detector;
pub mod diffusion;
pub mod error;
pub mod harness;
pub mod repair;
pub mod tensor;

pub use error::{Error, Result};
