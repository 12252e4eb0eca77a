//! Text formats for candidate and recommendation files.
//!
//! Both start with `#` header lines carrying the hashes of the artifacts they
//! were derived from; data lines are `|`-separated.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use anyhow::{bail, Context, Result};

use apicomp::graph::{AssociationGraph, NodeId};
use apicomp::recommend::RecommendedItem;
use apicomp::steiner::CandidateComposition;

pub const CANDIDATES_FORMAT: &str = "apicomp-candidates/1";
pub const RECOMMENDATION_FORMAT: &str = "apicomp-recommendation/1";

#[derive(Debug, Clone, PartialEq)]
pub struct CandidatesFile {
    pub graph_hash: String,
    pub supergraph_hash: String,
    pub keywords: Vec<String>,
    pub candidates: Vec<CandidateComposition>,
}

fn api_list(g: &AssociationGraph, nodes: &BTreeSet<NodeId>) -> String {
    nodes
        .iter()
        .map(|&v| g.nodes()[v].api_id.as_str())
        .collect::<Vec<_>>()
        .join(",")
}

impl CandidatesFile {
    pub fn to_text(&self, g: &AssociationGraph) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {CANDIDATES_FORMAT}");
        let _ = writeln!(out, "# graph {}", self.graph_hash);
        let _ = writeln!(out, "# supergraph {}", self.supergraph_hash);
        let _ = writeln!(out, "# keywords {}", self.keywords.join(","));
        for c in &self.candidates {
            let kws: Vec<&str> = c.covered_keywords.iter().map(String::as_str).collect();
            let _ = writeln!(out, "{} | {} | {}", api_list(g, &c.nodes), c.size(), kws.join(","));
        }
        out
    }

    /// Parses a candidates file, resolving API ids against `g`, whose hash
    /// must match the header.
    pub fn parse(text: &str, g: &AssociationGraph) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let mut header = |key: &str| -> Result<String> {
            let (i, line) = lines.next().with_context(|| format!("missing `{key}` header"))?;
            line.strip_prefix("# ")
                .and_then(|rest| rest.strip_prefix(key))
                .map(|v| v.trim().to_owned())
                .with_context(|| format!("line {}: expected `# {key}` header", i + 1))
        };
        let format = header(CANDIDATES_FORMAT)?;
        if !format.is_empty() {
            bail!("unsupported candidates format");
        }
        let graph_hash = header("graph")?;
        let supergraph_hash = header("supergraph")?;
        let keywords: Vec<String> = header("keywords")?
            .split(',')
            .map(|k| k.trim().to_owned())
            .filter(|k| !k.is_empty())
            .collect();
        if graph_hash != g.content_hash() {
            bail!(
                "candidates were computed on graph {graph_hash}, but graph {} was given",
                g.content_hash()
            );
        }
        let mut candidates = Vec::new();
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split('|').map(str::trim).collect();
            let [apis, size, covered] = parts[..] else {
                bail!("line {}: expected `api_ids | size | keywords`", i + 1);
            };
            let mut nodes = BTreeSet::new();
            for api in apis.split(',').map(str::trim) {
                let v = g
                    .node_by_api(api)
                    .with_context(|| format!("line {}: unknown api `{api}`", i + 1))?;
                if !nodes.insert(v) {
                    bail!("line {}: api `{api}` listed twice", i + 1);
                }
            }
            let size: usize = size.parse().with_context(|| format!("line {}: bad size", i + 1))?;
            if size != nodes.len() {
                bail!("line {}: size {size} but {} apis", i + 1, nodes.len());
            }
            let covered_keywords = covered
                .split(',')
                .map(str::trim)
                .filter(|k| !k.is_empty())
                .map(str::to_owned)
                .collect();
            candidates.push(CandidateComposition {
                nodes,
                covered_keywords,
            });
        }
        Ok(CandidatesFile {
            graph_hash,
            supergraph_hash,
            keywords,
            candidates,
        })
    }
}

/// Header facts echoed into a recommendation file.
pub struct RecommendationHeader<'a> {
    pub graph_hash: &'a str,
    pub candidates_hash: &'a str,
    pub embeddings_hash: &'a str,
    pub k: usize,
    pub lambda: f64,
    pub clusters: usize,
    pub swap_passes: usize,
}

pub fn format_recommendation(
    g: &AssociationGraph,
    header: &RecommendationHeader<'_>,
    candidates: &[CandidateComposition],
    items: &[RecommendedItem],
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {RECOMMENDATION_FORMAT}");
    let _ = writeln!(out, "# graph {}", header.graph_hash);
    let _ = writeln!(out, "# candidates {}", header.candidates_hash);
    let _ = writeln!(out, "# embeddings {}", header.embeddings_hash);
    let _ = writeln!(
        out,
        "# k {} lambda {} clusters {} swap_passes {}",
        header.k, header.lambda, header.clusters, header.swap_passes
    );
    let _ = writeln!(
        out,
        "# rank | api_ids | size | quality | normalized_quality | cluster | mmr_score"
    );
    for (rank, it) in items.iter().enumerate() {
        let c = &candidates[it.candidate];
        let _ = writeln!(
            out,
            "{} | {} | {} | {} | {} | {} | {}",
            rank + 1,
            api_list(g, &c.nodes),
            c.size(),
            it.quality.raw,
            it.quality.normalized,
            it.cluster,
            it.mmr_score
        );
    }
    out
}
