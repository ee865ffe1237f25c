//! Handwritten text line segmentation.
//!
//! Text pixels are sampled from a binarized page, joined into a Delaunay
//! Markov random field and labelled with regression lines. Line parameters
//! are fitted with EM; the E-step is a message-passing solver for a convex
//! free energy that learns the pairwise and line-probability parameters of
//! the prior by moment matching.
//!
//! The crate is `no_std` (it needs `alloc`). Image decoding, the CLI and the
//! on-disk formats live in the `textline` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
pub mod math;
pub mod raster;

pub mod document;
pub mod eval;
pub mod graph;
pub mod init;
pub mod lines;
pub mod mrf;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};

pub use document::{BinaryDocument, ConnectedComponent};
pub use graph::{MrfGraph, SamplePoint};
pub use lines::{LineModel, Posteriors, Variant};
pub use mrf::{BeliefState, Moments, PriorParams};
pub use pipeline::{segment, segment_with_lines, EmConfig, SegmentationResult};
pub use raster::Raster;
