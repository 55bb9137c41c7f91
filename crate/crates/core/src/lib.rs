//! Multi-topology reasoning toolkit.
//!
//! Responses produced under chain, tree and graph prompting topologies are
//! labelled for correctness, aggregated into per-topology success rates,
//! segmented by difficulty, and used to train a two-headed reward model that
//! picks a topology and an answer per problem. A seeded synthetic world with
//! planted success probabilities stands in for a language model so that every
//! stage can be checked against known ground truth.

// Validation uses `!(x > 0.0)` style guards so NaN is rejected along with
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod answer;
pub mod competition;
pub mod dataset;
pub mod error;
pub mod generation;
pub mod jsonl;
pub mod metrics;
pub mod tag;
pub mod trm;
pub mod types;

pub use answer::{canonicalize_answer, extract_final_answer};
pub use dataset::Dataset;
pub use error::{Error, Result};
pub use types::{
    DifficultyTier, GenerationParams, PerTopology, Problem, Record, ResponseRecord, RewardScores,
    TopoAnnotation, Topology,
};
