//! Inverted-file vector search with adaptive probe allocation.
//!
//! The library builds an IVF index over unit-normalized vectors and lets the
//! per-query probe budget vary by cluster instead of being a single global
//! knob. Clusters are tiered by how often queries land on them (frequency)
//! and how cleanly they separate from the rest of the space (coherence):
//! rarely-hit, poorly-separated clusters get a larger budget, hot coherent
//! clusters get a smaller one. The crate also ships a synthetic data
//! generator that plants a frequency/coherence power law, a Zipf-skewed
//! query sampler, and a benchmark harness that compares uniform and
//! adaptive allocation on recall-versus-cost curves.
//!
//! Everything is deterministic for a fixed seed: generation, training,
//! query sampling, and search all use explicit seeded RNG streams and
//! fully ordered tie-breaking.

pub mod bench;
mod binio;
pub mod dataset;
pub mod error;
pub mod index;
pub mod policy;
pub mod quantizer;
pub mod stats;
pub mod vecmath;
pub mod workload;

pub use dataset::{SynthConfig, VectorSet};
pub use error::{Error, Result};
pub use index::{InvertedIndex, SearchResult};
pub use policy::{PolicyKind, ProbePolicy, TierMultipliers};
pub use quantizer::Centroids;
pub use stats::ClusterStats;
pub use workload::QuerySet;
