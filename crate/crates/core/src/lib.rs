//! Disease-gene link prediction on a heterogeneous gene/disease graph.
//!
//! The pipeline: assemble a [`graph::HeteroGraph`], align language-model
//! embeddings into one feature space ([`features`]), split gene-disease edges
//! without homology leakage and sample negatives ([`dataset`]), train a
//! two-layer GCN encoder with a Hadamard-product decoder ([`model`],
//! [`train`]) and score it with ranking metrics ([`metrics`]).
//! [`pipeline`] wires these into the commands exposed by the CLI.

pub mod config;
pub mod dataset;
pub mod error;
pub mod features;
pub mod graph;
pub mod hash;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
