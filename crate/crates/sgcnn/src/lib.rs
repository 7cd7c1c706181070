//! Structural graph convolutional networks for classifying attributed
//! subgraphs.
//!
//! The pipeline: a schema induces target subgraphs from an attributed host
//! graph; node attributes become fixed-dimension feature vectors; a
//! path-based aggregation layer folds neighborhood information into the
//! subgraph; stacked subgraph convolution layers extract features from
//! pooled k-subset candidates; a readout plus linear softmax classifier
//! produces class logits. Training runs reverse-mode gradients through the
//! whole stack in 64-bit precision.
//!
//! See the `book/` guide for a narrative walk-through of each stage.

pub mod aggregation;
pub mod data;
pub mod embedding;
pub mod error;
pub mod graph;
pub mod layer;
pub mod model;
pub mod nn;
pub mod synth;

mod guide;

pub use error::{Error, Result};
