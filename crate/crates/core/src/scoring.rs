//! Composition quality, batch normalization and the MMR score.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::embedding::{similarity, CompositionVector};
use crate::error::{Error, Result};
use crate::graph::{AssociationGraph, NodeId};

pub const DEFAULT_LAMBDA: f64 = 0.5;

/// Raw quality plus its min-max position inside the candidate batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityScore {
    pub raw: f64,
    pub normalized: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmrParams {
    lambda: f64,
}

impl MmrParams {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::invalid(format!("lambda {lambda} outside [0, 1]")));
        }
        Ok(MmrParams { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl Default for MmrParams {
    fn default() -> Self {
        MmrParams {
            lambda: DEFAULT_LAMBDA,
        }
    }
}

/// Mean usage count of the members plus the co-invocation counts of every
/// member pair adjacent in `g`, divided by the squared size.
pub fn quality(g: &AssociationGraph, nodes: &BTreeSet<NodeId>) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::invalid("quality of an empty composition"));
    }
    let n = nodes.len() as f64;
    let mut times = 0u64;
    for &v in nodes {
        times += g.times(v)? as u64;
    }
    let mut pairs = 0u64;
    for &u in nodes {
        for &v in g.neighbors(u) {
            if v > u && nodes.contains(&v) {
                pairs += g.times_pair(u, v)? as u64;
            }
        }
    }
    Ok(times as f64 / n + pairs as f64 / (n * n))
}

/// Min-max scaling onto [0, 1]; a constant batch maps to 1.
pub fn normalize_batch(qualities: &[f64]) -> Result<Vec<f64>> {
    if qualities.is_empty() {
        return Err(Error::invalid("normalizing an empty batch"));
    }
    if let Some(bad) = qualities.iter().find(|q| !q.is_finite()) {
        return Err(Error::invalid(format!("non-finite quality {bad}")));
    }
    let lo = qualities.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = qualities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return Ok(vec![1.0; qualities.len()]);
    }
    Ok(qualities.iter().map(|q| (q - lo) / (hi - lo)).collect())
}

/// Scores every composition of a batch.
pub fn score_batch(g: &AssociationGraph, batch: &[&BTreeSet<NodeId>]) -> Result<Vec<QualityScore>> {
    let raw = batch
        .iter()
        .map(|nodes| quality(g, nodes))
        .collect::<Result<Vec<_>>>()?;
    let normalized = normalize_batch(&raw)?;
    Ok(raw
        .into_iter()
        .zip(normalized)
        .map(|(raw, normalized)| QualityScore { raw, normalized })
        .collect())
}

/// `lambda * quality - (1 - lambda) * max similarity to the list`, where the
/// maximum over an empty list is 0.
pub fn mmr_score(
    normalized_quality: f64,
    vector: &CompositionVector,
    list: &[&CompositionVector],
    params: MmrParams,
) -> Result<f64> {
    let mut max_sim: Option<f64> = None;
    for other in list {
        let s = similarity(vector, other)?;
        max_sim = Some(max_sim.map_or(s, |m| m.max(s)));
    }
    Ok(mmr_from_parts(normalized_quality, max_sim.unwrap_or(0.0), params))
}

pub(crate) fn mmr_from_parts(normalized_quality: f64, max_sim: f64, params: MmrParams) -> f64 {
    params.lambda * normalized_quality - (1.0 - params.lambda) * max_sim
}
