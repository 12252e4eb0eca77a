//! Recommends diverse, compatible API compositions for a keyword query.
//!
//! The pipeline builds a co-usage graph from historical mashups, compresses
//! it into supernodes, finds minimum group Steiner trees covering the query,
//! and picks a top-k list by maximal marginal relevance under a partition
//! matroid defined by clustering the candidates.

pub mod compress;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod graph;
pub mod recommend;
pub mod scoring;
pub mod steiner;
pub mod synth;

pub use error::{Error, Result};
