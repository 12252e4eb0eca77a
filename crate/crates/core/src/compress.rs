//! Reachability-preserving compression of an association graph.
//!
//! Each supernode is grown from the smallest unused node by repeatedly
//! absorbing the smallest unused neighbor of the current set until it holds
//! `p` nodes or has no unused neighbor left. Ancestors of a supernode are
//! therefore connected, and two original nodes are connected exactly when
//! their supernodes are.

use std::collections::{BTreeSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{hash_bytes, AssociationGraph, NodeId};

pub type SuperId = usize;

const SUPERGRAPH_FORMAT: &str = "apicomp-supergraph/1";

pub const DEFAULT_GRANULARITY: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperNode {
    pub super_id: SuperId,
    /// Sorted ascending.
    pub ancestors: Vec<NodeId>,
    pub keywords: BTreeSet<String>,
}

impl SuperNode {
    pub fn weight(&self) -> u32 {
        self.ancestors.len() as u32
    }
}

#[derive(Debug, Clone)]
pub struct SuperGraph<'g> {
    original: &'g AssociationGraph,
    granularity: usize,
    supernodes: Vec<SuperNode>,
    superedges: Vec<(SuperId, SuperId)>,
    adjacency: Vec<Vec<SuperId>>,
    owner: Vec<SuperId>,
}

pub fn compress(g: &AssociationGraph, p: usize) -> Result<SuperGraph<'_>> {
    if p < 1 {
        return Err(Error::invalid("compression granularity must be at least 1"));
    }
    let n = g.node_count();
    let mut owner = vec![usize::MAX; n];
    let mut groups: Vec<Vec<NodeId>> = Vec::new();
    for seed in 0..n {
        if owner[seed] != usize::MAX {
            continue;
        }
        let sid = groups.len();
        let mut members = vec![seed];
        owner[seed] = sid;
        let mut frontier: BTreeSet<NodeId> = BTreeSet::new();
        frontier.extend(g.neighbors(seed).iter().filter(|&&v| owner[v] == usize::MAX));
        while members.len() < p {
            let Some(u) = frontier.pop_first() else { break };
            owner[u] = sid;
            members.push(u);
            frontier.extend(g.neighbors(u).iter().filter(|&&v| owner[v] == usize::MAX));
        }
        members.sort_unstable();
        groups.push(members);
    }
    Ok(SuperGraph::from_groups(g, p, groups, owner))
}

impl<'g> SuperGraph<'g> {
    fn from_groups(
        g: &'g AssociationGraph,
        granularity: usize,
        groups: Vec<Vec<NodeId>>,
        owner: Vec<SuperId>,
    ) -> Self {
        let supernodes: Vec<SuperNode> = groups
            .into_iter()
            .enumerate()
            .map(|(super_id, ancestors)| {
                let keywords = ancestors
                    .iter()
                    .flat_map(|&a| g.nodes()[a].keywords.iter().cloned())
                    .collect();
                SuperNode {
                    super_id,
                    ancestors,
                    keywords,
                }
            })
            .collect();
        let mut edge_set = BTreeSet::new();
        for e in g.edges() {
            let (a, b) = (owner[e.u], owner[e.v]);
            if a != b {
                edge_set.insert((a.min(b), a.max(b)));
            }
        }
        let mut adjacency = vec![Vec::new(); supernodes.len()];
        for &(a, b) in &edge_set {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        SuperGraph {
            original: g,
            granularity,
            supernodes,
            superedges: edge_set.into_iter().collect(),
            adjacency,
            owner,
        }
    }

    pub fn original(&self) -> &'g AssociationGraph {
        self.original
    }

    pub fn granularity(&self) -> usize {
        self.granularity
    }

    pub fn len(&self) -> usize {
        self.supernodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.supernodes.is_empty()
    }

    pub fn supernodes(&self) -> &[SuperNode] {
        &self.supernodes
    }

    pub fn supernode(&self, id: SuperId) -> &SuperNode {
        &self.supernodes[id]
    }

    /// Canonical `(a, b)` pairs with `a < b`, sorted.
    pub fn superedges(&self) -> &[(SuperId, SuperId)] {
        &self.superedges
    }

    pub fn neighbors(&self, id: SuperId) -> &[SuperId] {
        &self.adjacency[id]
    }

    pub fn owner_of(&self, node: NodeId) -> Result<SuperId> {
        self.owner.get(node).copied().ok_or(Error::OutOfRange {
            what: "node",
            index: node,
            len: self.owner.len(),
        })
    }

    /// Connected-component label per supernode.
    pub fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.len()];
        let mut next = 0;
        for s in 0..self.len() {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = next;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &v in &self.adjacency[u] {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        queue.push_back(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    fn file(&self) -> SuperGraphFile {
        SuperGraphFile {
            format: SUPERGRAPH_FORMAT.to_owned(),
            graph_hash: self.original.content_hash().to_owned(),
            granularity: self.granularity,
            supernodes: self.supernodes.iter().map(|s| s.ancestors.clone()).collect(),
            superedges: self.superedges.clone(),
        }
    }

    /// Hash of the persisted form; identifies this supergraph downstream.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.file()).expect("supergraph serializes");
        hash_bytes(&[&bytes])
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(&self.file())? + "\n")?;
        Ok(())
    }

    /// Loads a supergraph artifact against the graph it was built from.
    pub fn load(g: &'g AssociationGraph, path: impl AsRef<Path>) -> Result<Self> {
        let file: SuperGraphFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if file.format != SUPERGRAPH_FORMAT {
            return Err(Error::Consistency(format!(
                "unsupported supergraph format `{}`",
                file.format
            )));
        }
        if file.graph_hash != g.content_hash() {
            return Err(Error::Consistency(format!(
                "supergraph was built from graph {} but graph {} was given",
                file.graph_hash,
                g.content_hash()
            )));
        }
        if file.granularity < 1 {
            return Err(Error::Consistency("granularity 0 in supergraph file".into()));
        }
        let mut owner = vec![usize::MAX; g.node_count()];
        for (sid, anc) in file.supernodes.iter().enumerate() {
            if anc.is_empty() || anc.len() > file.granularity {
                return Err(Error::Consistency(format!("supernode {sid} has bad size")));
            }
            for &a in anc {
                if a >= owner.len() || owner[a] != usize::MAX {
                    return Err(Error::Consistency(format!("node {a} not partitioned")));
                }
                owner[a] = sid;
            }
        }
        if owner.contains(&usize::MAX) {
            return Err(Error::Consistency("supernodes do not cover every node".into()));
        }
        let mut groups = file.supernodes;
        for grp in &mut groups {
            grp.sort_unstable();
        }
        let sg = SuperGraph::from_groups(g, file.granularity, groups, owner);
        if sg.superedges != file.superedges {
            return Err(Error::Consistency("stored superedges disagree with graph".into()));
        }
        Ok(sg)
    }
}

#[derive(Serialize, Deserialize)]
struct SuperGraphFile {
    format: String,
    graph_hash: String,
    granularity: usize,
    supernodes: Vec<Vec<NodeId>>,
    superedges: Vec<(SuperId, SuperId)>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{example_catalog, example_records};
    use crate::graph::KeywordMode;
    use crate::synth::random_graph;
    use proptest::prelude::*;

    fn example_graph() -> AssociationGraph {
        AssociationGraph::build(&example_records(), &example_catalog(), KeywordMode::AllCategories)
            .unwrap()
    }

    fn names(g: &AssociationGraph, ids: &[NodeId]) -> Vec<String> {
        ids.iter().map(|&i| g.nodes()[i].api_id.clone()).collect()
    }

    #[test]
    fn granularity_zero_rejected() {
        assert!(matches!(compress(&example_graph(), 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn granularity_one_is_identity() {
        let g = example_graph();
        let sg = compress(&g, 1).unwrap();
        assert_eq!(sg.len(), g.node_count());
        assert!(sg.supernodes().iter().all(|s| s.weight() == 1));
        for v in 0..g.node_count() {
            assert_eq!(sg.owner_of(v).unwrap(), v);
        }
        let edges: Vec<_> = g.edges().iter().map(|e| (e.u, e.v)).collect();
        assert_eq!(sg.superedges(), edges.as_slice());
    }

    #[test]
    fn large_granularity_collapses_connected_graph() {
        let g = example_graph();
        let sg = compress(&g, 8).unwrap();
        assert_eq!(sg.len(), 1);
        assert_eq!(sg.supernode(0).weight(), 8);
        assert!(sg.superedges().is_empty());
        assert!((0..8).all(|v| sg.owner_of(v).unwrap() == 0));
        assert!(sg.owner_of(8).is_err());
    }

    #[test]
    fn example_golden_p4() {
        // seed v1 absorbs v2, v3, v4 in id order; v5's only neighbor is used;
        // v6 absorbs v7 then v8
        let g = example_graph();
        let sg = compress(&g, 4).unwrap();
        let groups: Vec<Vec<String>> = sg
            .supernodes()
            .iter()
            .map(|s| names(&g, &s.ancestors))
            .collect();
        assert_eq!(
            groups,
            vec![
                vec!["v1", "v2", "v3", "v4"],
                vec!["v5"],
                vec!["v6", "v7", "v8"]
            ]
        );
        assert_eq!(sg.superedges(), &[(0, 1), (0, 2)]);
        let owners: Vec<SuperId> = (0..8).map(|v| sg.owner_of(v).unwrap()).collect();
        assert_eq!(owners, [0, 0, 0, 0, 1, 2, 2, 2]);
        let kw: Vec<&str> = sg.supernode(2).keywords.iter().map(String::as_str).collect();
        assert_eq!(kw, ["k10", "k3", "k7", "k8", "k9"]);
    }

    #[test]
    fn save_load_roundtrip_and_hash_check() {
        let g = example_graph();
        let sg = compress(&g, 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sg.json");
        sg.save(&path).unwrap();
        let back = SuperGraph::load(&g, &path).unwrap();
        assert_eq!(back.supernodes(), sg.supernodes());
        assert_eq!(back.superedges(), sg.superedges());
        assert_eq!(back.content_hash(), sg.content_hash());

        let other = AssociationGraph::build(
            &example_records()[..4],
            &example_catalog(),
            KeywordMode::AllCategories,
        )
        .unwrap();
        assert!(matches!(SuperGraph::load(&other, &path), Err(Error::Consistency(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn partition_and_reachability(seed in any::<u64>(), n in 1usize..40, m in 0usize..80, p in 1usize..9) {
            let g = random_graph(seed, n, m, 5, 2);
            let sg = compress(&g, p).unwrap();
            let total: u32 = sg.supernodes().iter().map(SuperNode::weight).sum();
            prop_assert_eq!(total as usize, g.node_count());
            prop_assert!(sg.len() >= g.node_count().div_ceil(p));
            for s in sg.supernodes() {
                prop_assert!(s.weight() as usize <= p);
                let set: BTreeSet<NodeId> = s.ancestors.iter().copied().collect();
                prop_assert!(g.is_connected_subset(&set));
            }
            let gc = g.components();
            let sc = sg.components();
            for u in 0..g.node_count() {
                for v in 0..g.node_count() {
                    let a = gc[u] == gc[v];
                    let b = sc[sg.owner_of(u).unwrap()] == sc[sg.owner_of(v).unwrap()];
                    prop_assert_eq!(a, b);
                }
            }
            let kw_g: BTreeSet<&String> = g.nodes().iter().flat_map(|n| &n.keywords).collect();
            let kw_s: BTreeSet<&String> = sg.supernodes().iter().flat_map(|s| &s.keywords).collect();
            prop_assert_eq!(kw_g, kw_s);
        }
    }
}
