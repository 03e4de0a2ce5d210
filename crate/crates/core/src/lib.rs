//! Meta-path search on heterogeneous information networks.
//!
//! The pipeline enumerates target-rooted meta-paths over a schema, aggregates
//! node features along each path once, searches a relaxed mixture of
//! per-path projections for the most useful `M` paths, and trains a final
//! classifier on the selected paths alone.

pub mod aggregate;
pub mod batch;
pub mod bench;
pub mod binfmt;
pub mod datagen;
pub mod error;
pub mod hin;
pub mod metapath;
pub mod metrics;
pub mod neural;
pub mod parallel;
pub mod pipeline;
pub mod rng;
pub mod search;
pub mod target;

pub use error::{Error, ErrorClass, Result};
