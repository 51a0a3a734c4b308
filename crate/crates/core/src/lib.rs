//! Core algorithms for a visual speech recognition pipeline.
//!
//! The crate is organized around the stages of a tandem recognizer:
//!
//! * [`pcanet`] — two-stage PCA convolutional network turning grayscale
//!   mouth frames into binary-hash block-histogram feature vectors,
//! * [`lstm`] — a from-scratch single-layer LSTM frame classifier trained
//!   with momentum SGD and backpropagation through time,
//! * [`tandem`] — log-posterior observations with delta and acceleration
//!   coefficients, with optional multi-view concatenation,
//! * [`gmmhmm`] — whole-word left-to-right HMMs with diagonal-covariance
//!   GMM emissions, segmental training and Viterbi decoding,
//! * [`scoring`] — word/sentence/frame recognition metrics.
//!
//! Everything here is deterministic: fixed seeds produce bitwise-identical
//! results. The crate is `no_std` (with `alloc`); all file formats and the
//! CLI live in the companion `lipvsr` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod eigen;
pub mod gmmhmm;
pub mod image;
pub mod lstm;
pub mod mat;
pub mod math;
pub mod pcanet;
pub mod rng;
pub mod scoring;
pub mod tandem;

mod error;

pub use error::{Error, Result};
pub use mat::Mat;
