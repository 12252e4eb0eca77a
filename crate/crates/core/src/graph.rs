//! The API association graph: one node per API seen in the records, one
//! undirected edge per pair of APIs used together in at least one mashup.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{catalog_lookup, functional_keyword, CatalogEntry, MashupRecord, Query};
use crate::error::{Error, Result};

pub type NodeId = usize;

const GRAPH_FORMAT: &str = "apicomp-graph/1";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KeywordMode {
    /// Only the first category keyword of each API.
    #[default]
    FunctionalOnly,
    AllCategories,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiNode {
    pub node_id: NodeId,
    pub api_id: String,
    pub keywords: BTreeSet<String>,
    pub times_used: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiEdge {
    pub u: NodeId,
    pub v: NodeId,
    pub co_invocations: u32,
}

#[derive(Debug, Clone)]
pub struct AssociationGraph {
    nodes: Vec<ApiNode>,
    edges: Vec<ApiEdge>,
    adjacency: Vec<Vec<NodeId>>,
    keyword_index: BTreeMap<String, Vec<NodeId>>,
    edge_of: FxHashMap<(NodeId, NodeId), usize>,
    api_index: FxHashMap<String, NodeId>,
    content_hash: String,
}

fn ordered(u: NodeId, v: NodeId) -> (NodeId, NodeId) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

impl AssociationGraph {
    /// Builds the graph. Node ids follow catalog order, restricted to APIs that
    /// occur in at least one record.
    pub fn build(
        records: &[MashupRecord],
        catalog: &[CatalogEntry],
        mode: KeywordMode,
    ) -> Result<Self> {
        let lookup = catalog_lookup(catalog);
        let mut used = FxHashMap::default();
        for rec in records {
            for api in &rec.apis {
                if !lookup.contains_key(api.as_str()) {
                    return Err(Error::UnresolvedApi {
                        mashup_id: rec.mashup_id.clone(),
                        api_id: api.clone(),
                    });
                }
                *used.entry(api.as_str()).or_insert(0u32) += 1;
            }
        }

        let mut nodes = Vec::new();
        let mut id_of = FxHashMap::default();
        for entry in catalog {
            if let Some(&times) = used.get(entry.api_id.as_str()) {
                let keywords = match mode {
                    KeywordMode::FunctionalOnly => {
                        BTreeSet::from([functional_keyword(entry).to_owned()])
                    }
                    KeywordMode::AllCategories => entry.category_keywords.iter().cloned().collect(),
                };
                id_of.insert(entry.api_id.as_str(), nodes.len());
                nodes.push(ApiNode {
                    node_id: nodes.len(),
                    api_id: entry.api_id.clone(),
                    keywords,
                    times_used: times,
                });
            }
        }

        let mut pair_counts: BTreeMap<(NodeId, NodeId), u32> = BTreeMap::new();
        for rec in records {
            let ids: Vec<NodeId> = rec.apis.iter().map(|a| id_of[a.as_str()]).collect();
            for (i, &a) in ids.iter().enumerate() {
                for &b in &ids[i + 1..] {
                    if a != b {
                        *pair_counts.entry(ordered(a, b)).or_insert(0) += 1;
                    }
                }
            }
        }
        let edges = pair_counts
            .into_iter()
            .map(|((u, v), c)| ApiEdge {
                u,
                v,
                co_invocations: c,
            })
            .collect();
        Ok(Self::assemble(nodes, edges))
    }

    fn assemble(nodes: Vec<ApiNode>, edges: Vec<ApiEdge>) -> Self {
        let mut adjacency = vec![Vec::new(); nodes.len()];
        let mut edge_of = FxHashMap::default();
        for (i, e) in edges.iter().enumerate() {
            adjacency[e.u].push(e.v);
            adjacency[e.v].push(e.u);
            edge_of.insert((e.u, e.v), i);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        let mut keyword_index: BTreeMap<String, Vec<NodeId>> = BTreeMap::new();
        for n in &nodes {
            for k in &n.keywords {
                keyword_index.entry(k.clone()).or_default().push(n.node_id);
            }
        }
        let api_index = nodes.iter().map(|n| (n.api_id.clone(), n.node_id)).collect();
        let content_hash = content_hash(&nodes, &edges);
        AssociationGraph {
            nodes,
            edges,
            adjacency,
            keyword_index,
            edge_of,
            api_index,
            content_hash,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[ApiNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[ApiEdge] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> Result<&ApiNode> {
        self.nodes.get(id).ok_or(Error::OutOfRange {
            what: "node",
            index: id,
            len: self.nodes.len(),
        })
    }

    /// Sorted neighbor list. Panics on an invalid id.
    pub fn neighbors(&self, id: NodeId) -> &[NodeId] {
        &self.adjacency[id]
    }

    pub fn keyword_index(&self) -> &BTreeMap<String, Vec<NodeId>> {
        &self.keyword_index
    }

    pub fn nodes_with_keyword(&self, keyword: &str) -> &[NodeId] {
        self.keyword_index.get(keyword).map_or(&[], Vec::as_slice)
    }

    pub fn node_by_api(&self, api_id: &str) -> Option<NodeId> {
        self.api_index.get(api_id).copied()
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.edge_of.contains_key(&ordered(u, v))
    }

    /// Hex SHA-256 over the canonical node and edge lists.
    pub fn content_hash(&self) -> &str {
        &self.content_hash
    }

    /// For each query keyword, the nodes carrying it (empty when none do).
    pub fn keyword_cover_sets(&self, query: &Query) -> BTreeMap<String, BTreeSet<NodeId>> {
        query
            .keywords
            .iter()
            .map(|k| (k.clone(), self.nodes_with_keyword(k).iter().copied().collect()))
            .collect()
    }

    pub fn times(&self, id: NodeId) -> Result<u32> {
        Ok(self.node(id)?.times_used)
    }

    pub fn times_pair(&self, u: NodeId, v: NodeId) -> Result<u32> {
        self.node(u)?;
        self.node(v)?;
        if u == v {
            return Err(Error::invalid(format!("times_pair of node {u} with itself")));
        }
        Ok(self
            .edge_of
            .get(&ordered(u, v))
            .map_or(0, |&i| self.edges[i].co_invocations))
    }

    /// Whether the subgraph induced by `members` is connected. The empty set
    /// counts as connected.
    pub fn is_connected_subset(&self, members: &BTreeSet<NodeId>) -> bool {
        let Some(&start) = members.iter().next() else {
            return true;
        };
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in self.neighbors(u) {
                if members.contains(&v) && seen.insert(v) {
                    queue.push_back(v);
                }
            }
        }
        seen.len() == members.len()
    }

    /// Connected-component label per node, labels assigned in ascending order
    /// of each component's smallest node.
    pub fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.nodes.len()];
        let mut next = 0;
        for s in 0..self.nodes.len() {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = next;
            let mut stack = vec![s];
            while let Some(u) = stack.pop() {
                for &v in &self.adjacency[u] {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn save(&self, path: impl AsRef<Path>, input_hash: &str) -> Result<()> {
        let file = GraphFile {
            format: GRAPH_FORMAT.to_owned(),
            content_hash: self.content_hash.clone(),
            input_hash: input_hash.to_owned(),
            nodes: self.nodes.clone(),
            edges: self.edges.clone(),
            keyword_index: self.keyword_index.clone(),
        };
        std::fs::write(path, serde_json::to_string(&file)? + "\n")?;
        Ok(())
    }

    /// Loads a graph artifact, returning it with the recorded input hash.
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, String)> {
        let file: GraphFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if file.format != GRAPH_FORMAT {
            return Err(Error::Consistency(format!(
                "unsupported graph format `{}`",
                file.format
            )));
        }
        validate_parts(&file.nodes, &file.edges)?;
        let g = Self::assemble(file.nodes, file.edges);
        if g.content_hash != file.content_hash {
            return Err(Error::Consistency("graph content hash does not match".into()));
        }
        if g.keyword_index != file.keyword_index {
            return Err(Error::Consistency("stored keyword index is stale".into()));
        }
        Ok((g, file.input_hash))
    }
}

fn validate_parts(nodes: &[ApiNode], edges: &[ApiEdge]) -> Result<()> {
    for (i, n) in nodes.iter().enumerate() {
        if n.node_id != i {
            return Err(Error::Consistency(format!("node {i} stored with id {}", n.node_id)));
        }
        if n.keywords.is_empty() {
            return Err(Error::Consistency(format!("node {i} has no keywords")));
        }
    }
    let mut prev = None;
    for e in edges {
        if e.u >= e.v || e.v >= nodes.len() || e.co_invocations == 0 {
            return Err(Error::Consistency(format!("bad edge {e:?}")));
        }
        if prev >= Some((e.u, e.v)) {
            return Err(Error::Consistency("edges not in canonical order".into()));
        }
        prev = Some((e.u, e.v));
    }
    Ok(())
}

#[derive(Serialize)]
struct HashView<'a> {
    format: &'a str,
    nodes: &'a [ApiNode],
    edges: &'a [ApiEdge],
}

fn content_hash(nodes: &[ApiNode], edges: &[ApiEdge]) -> String {
    let view = HashView {
        format: GRAPH_FORMAT,
        nodes,
        edges,
    };
    let bytes = serde_json::to_vec(&view).expect("graph serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// Hex SHA-256 of arbitrary bytes; used to stamp artifacts with their inputs.
pub fn hash_bytes(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    format: String,
    content_hash: String,
    input_hash: String,
    nodes: Vec<ApiNode>,
    edges: Vec<ApiEdge>,
    keyword_index: BTreeMap<String, Vec<NodeId>>,
}
