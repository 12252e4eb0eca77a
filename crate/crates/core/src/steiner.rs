//! Minimum group Steiner trees over a supergraph.
//!
//! The solver is a best-first dynamic program over states `(root, covered)`:
//! the cheapest tree rooted at supernode `root` whose supernodes together
//! carry exactly the query keywords in `covered`. Tree weight is the number of
//! original APIs, i.e. the sum of supernode weights. States are settled in
//! ascending weight order. Full-coverage states are reported as they settle
//! and are not expanded further, so every partial state is optimal for its key
//! and the first reported tree is a minimum group Steiner tree; later trees
//! (one per root) are the cheapest the search found for that root.
//!
//! Transitions from a freshly settled state `(v, K)`:
//! * grow: for each neighbor `u`, `(u, K ∪ kw(u))` at `w + w(u)`;
//! * merge: for each settled `(v, K2)` that neither contains nor is contained
//!   in `K`, `(v, K ∪ K2)` at `w + w2 - w(v)` (the shared root is counted once).

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};
use std::time::{Duration, Instant};

use rustc_hash::FxHashMap;

use crate::compress::{SuperGraph, SuperId};
use crate::error::{Error, Result};
use crate::graph::{AssociationGraph, NodeId};

pub const MAX_QUERY_KEYWORDS: usize = 16;
pub const DEFAULT_MAX_CANDIDATES: usize = 500;
pub const DEFAULT_MAX_POPS: u64 = 5_000_000;
pub const DEFAULT_WALL_TIME: Duration = Duration::from_secs(30);
pub const BRUTE_FORCE_MAX_NODES: usize = 14;

/// Bitset over query keyword positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct KeywordMask(pub u32);

impl KeywordMask {
    pub fn full(len: usize) -> Self {
        debug_assert!(len <= MAX_QUERY_KEYWORDS);
        KeywordMask(((1u64 << len) - 1) as u32)
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: KeywordMask) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn union(self, other: KeywordMask) -> Self {
        KeywordMask(self.0 | other.0)
    }

    pub fn count(self) -> u32 {
        self.0.count_ones()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchBudget {
    pub max_pops: u64,
    pub wall_time: Duration,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_pops: DEFAULT_MAX_POPS,
            wall_time: DEFAULT_WALL_TIME,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SteinerTree {
    pub root: SuperId,
    pub covered: KeywordMask,
    pub supernodes: BTreeSet<SuperId>,
    pub superedges: BTreeSet<(SuperId, SuperId)>,
    /// Sum of the weights of the distinct supernodes.
    pub weight: u32,
    /// Search cost at which the tree was reported. Equals `weight` for the
    /// first tree; later trees may count a supernode shared by two branches
    /// twice, so `cost >= weight`.
    pub cost: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateComposition {
    pub nodes: BTreeSet<NodeId>,
    pub covered_keywords: BTreeSet<String>,
}

impl CandidateComposition {
    pub fn size(&self) -> usize {
        self.nodes.len()
    }
}

#[derive(Debug, Clone, Copy)]
enum Parent {
    Seed,
    Grow { child: SuperId, mask: KeywordMask },
    Merge { left: KeywordMask, right: KeywordMask },
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    weight: u32,
    parent: Parent,
    settled: bool,
}

/// Counters from one solver run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub pops: u64,
    pub states: usize,
    /// Number of times a stored state was replaced by a strictly lighter one.
    pub improvements: u64,
    pub budget_exhausted: bool,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub trees: Vec<SteinerTree>,
    pub stats: SolveStats,
}

fn key(root: SuperId, mask: KeywordMask) -> u64 {
    (root as u64) << 32 | mask.0 as u64
}

/// Query keyword mask carried by each supernode.
pub fn supernode_masks(sg: &SuperGraph<'_>, keywords: &[String]) -> Vec<KeywordMask> {
    let g = sg.original();
    let mut masks = vec![KeywordMask::default(); sg.len()];
    for (i, k) in keywords.iter().enumerate() {
        for &v in g.nodes_with_keyword(k) {
            let s = sg.owner_of(v).expect("graph node has an owner");
            masks[s].0 |= 1 << i;
        }
    }
    masks
}

fn check_query(keywords: &[String]) -> Result<()> {
    if keywords.is_empty() {
        return Err(Error::invalid("query has no keywords"));
    }
    if keywords.len() > MAX_QUERY_KEYWORDS {
        return Err(Error::invalid(format!(
            "query has {} keywords; at most {MAX_QUERY_KEYWORDS} are supported",
            keywords.len()
        )));
    }
    Ok(())
}

struct Search<'a, 'g> {
    sg: &'a SuperGraph<'g>,
    masks: Vec<KeywordMask>,
    table: FxHashMap<u64, Entry>,
    settled_masks: Vec<Vec<KeywordMask>>,
    heap: BinaryHeap<Reverse<(u32, SuperId, KeywordMask)>>,
    stats: SolveStats,
}

impl Search<'_, '_> {
    fn relax(&mut self, root: SuperId, mask: KeywordMask, weight: u32, parent: Parent) {
        let entry = Entry {
            weight,
            parent,
            settled: false,
        };
        match self.table.get_mut(&key(root, mask)) {
            Some(e) if e.settled || e.weight <= weight => return,
            Some(e) => {
                *e = entry;
                self.stats.improvements += 1;
            }
            None => {
                self.table.insert(key(root, mask), entry);
            }
        }
        self.heap.push(Reverse((weight, root, mask)));
    }

    fn expand(&mut self, root: SuperId, mask: KeywordMask, weight: u32) {
        let sg = self.sg;
        for &u in sg.neighbors(root) {
            let w = weight + sg.supernode(u).weight();
            self.relax(u, mask.union(self.masks[u]), w, Parent::Grow { child: root, mask });
        }
        let root_weight = sg.supernode(root).weight();
        for i in 0..self.settled_masks[root].len() {
            let other = self.settled_masks[root][i];
            if other.is_subset_of(mask) || mask.is_subset_of(other) {
                continue;
            }
            let w2 = self.table[&key(root, other)].weight;
            self.relax(
                root,
                mask.union(other),
                weight + w2 - root_weight,
                Parent::Merge {
                    left: mask,
                    right: other,
                },
            );
        }
        self.settled_masks[root].push(mask);
    }

    fn reconstruct(&self, root: SuperId, mask: KeywordMask) -> SteinerTree {
        let mut supernodes = BTreeSet::new();
        let mut superedges = BTreeSet::new();
        let mut stack = vec![(root, mask)];
        while let Some((r, m)) = stack.pop() {
            supernodes.insert(r);
            match self.table[&key(r, m)].parent {
                Parent::Seed => {}
                Parent::Grow { child, mask } => {
                    superedges.insert((r.min(child), r.max(child)));
                    stack.push((child, mask));
                }
                Parent::Merge { left, right } => {
                    stack.push((r, left));
                    stack.push((r, right));
                }
            }
        }
        let weight = supernodes.iter().map(|&s| self.sg.supernode(s).weight()).sum();
        SteinerTree {
            root,
            covered: mask,
            supernodes,
            superedges,
            weight,
            cost: self.table[&key(root, mask)].weight,
        }
    }
}

/// Runs the best-first search and returns up to `max_candidates` full-coverage
/// trees, at most one per root, in ascending order of search cost.
pub fn solve_mgst(
    sg: &SuperGraph<'_>,
    query_keywords: &[String],
    max_candidates: usize,
    budget: SearchBudget,
) -> Result<Vec<SteinerTree>> {
    solve_mgst_with_stats(sg, query_keywords, max_candidates, budget).map(|r| r.trees)
}

pub fn solve_mgst_with_stats(
    sg: &SuperGraph<'_>,
    query_keywords: &[String],
    max_candidates: usize,
    budget: SearchBudget,
) -> Result<SolveReport> {
    check_query(query_keywords)?;
    if max_candidates == 0 {
        return Err(Error::invalid("max_candidates must be at least 1"));
    }
    let masks = supernode_masks(sg, query_keywords);
    let reachable = masks.iter().fold(KeywordMask::default(), |a, &m| a.union(m));
    let missing: Vec<String> = query_keywords
        .iter()
        .enumerate()
        .filter(|&(i, _)| !reachable.contains(i))
        .map(|(_, k)| k.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::UnsatisfiableKeywords(missing));
    }
    let full = KeywordMask::full(query_keywords.len());

    let mut search = Search {
        sg,
        masks,
        table: FxHashMap::default(),
        settled_masks: vec![Vec::new(); sg.len()],
        heap: BinaryHeap::new(),
        stats: SolveStats::default(),
    };
    for sv in 0..sg.len() {
        let m = search.masks[sv];
        if !m.is_empty() {
            search.relax(sv, m, sg.supernode(sv).weight(), Parent::Seed);
        }
    }

    let started = Instant::now();
    let mut trees = Vec::new();
    while let Some(Reverse((weight, root, mask))) = search.heap.pop() {
        let Some(entry) = search.table.get_mut(&key(root, mask)) else {
            unreachable!("queued state missing from table")
        };
        if entry.settled || entry.weight != weight {
            continue;
        }
        entry.settled = true;
        search.stats.pops += 1;
        if mask == full {
            trees.push(search.reconstruct(root, mask));
            if trees.len() >= max_candidates {
                break;
            }
            continue;
        }
        search.expand(root, mask, weight);
        if search.stats.pops >= budget.max_pops
            || (search.stats.pops % 256 == 0 && started.elapsed() >= budget.wall_time)
        {
            search.stats.budget_exhausted = true;
            break;
        }
    }
    search.stats.states = search.table.len();
    if trees.is_empty() && search.stats.budget_exhausted {
        return Err(Error::Timeout {
            pops: search.stats.pops,
        });
    }
    Ok(SolveReport {
        trees,
        stats: search.stats,
    })
}

fn node_mask(g: &AssociationGraph, v: NodeId, keywords: &[String]) -> KeywordMask {
    let kws = &g.nodes()[v].keywords;
    let mut m = KeywordMask::default();
    for (i, k) in keywords.iter().enumerate() {
        if kws.contains(k) {
            m.0 |= 1 << i;
        }
    }
    m
}

/// Expands a tree into original APIs, then drops APIs whose query keywords
/// are all supplied by the rest, as long as the remainder stays connected.
/// Candidates are tried in ascending usage count (ties by node id), and passes
/// repeat until nothing more can be removed.
pub fn decompress_and_prune(
    tree: &SteinerTree,
    sg: &SuperGraph<'_>,
    query_keywords: &[String],
) -> CandidateComposition {
    let g = sg.original();
    let mut nodes: BTreeSet<NodeId> = tree
        .supernodes
        .iter()
        .flat_map(|&s| sg.supernode(s).ancestors.iter().copied())
        .collect();
    let mask_of: FxHashMap<NodeId, KeywordMask> = nodes
        .iter()
        .map(|&v| (v, node_mask(g, v, query_keywords)))
        .collect();
    let mut counts = vec![0u32; query_keywords.len()];
    for m in mask_of.values() {
        for (i, c) in counts.iter_mut().enumerate() {
            if m.contains(i) {
                *c += 1;
            }
        }
    }
    let mut order: Vec<NodeId> = nodes.iter().copied().collect();
    order.sort_by_key(|&v| (g.nodes()[v].times_used, v));

    loop {
        let mut changed = false;
        for &v in &order {
            if !nodes.contains(&v) || nodes.len() == 1 {
                continue;
            }
            let m = mask_of[&v];
            let still_covered = (0..counts.len()).all(|i| !m.contains(i) || counts[i] > 1);
            if !still_covered {
                continue;
            }
            nodes.remove(&v);
            if g.is_connected_subset(&nodes) {
                for (i, c) in counts.iter_mut().enumerate() {
                    if m.contains(i) {
                        *c -= 1;
                    }
                }
                changed = true;
            } else {
                nodes.insert(v);
            }
        }
        if !changed {
            break;
        }
    }
    let covered = nodes
        .iter()
        .fold(KeywordMask::default(), |a, &v| a.union(mask_of[&v]));
    CandidateComposition {
        covered_keywords: query_keywords
            .iter()
            .enumerate()
            .filter(|&(i, _)| covered.contains(i))
            .map(|(_, k)| k.clone())
            .collect(),
        nodes,
    }
}

/// Solves, decompresses and prunes; compositions that prune to the same API
/// set are reported once, keeping first-found order.
pub fn discover(
    sg: &SuperGraph<'_>,
    query_keywords: &[String],
    max_candidates: usize,
    budget: SearchBudget,
) -> Result<Vec<CandidateComposition>> {
    let trees = solve_mgst(sg, query_keywords, max_candidates, budget)?;
    let mut seen = BTreeSet::new();
    Ok(trees
        .iter()
        .map(|t| decompress_and_prune(t, sg, query_keywords))
        .filter(|c| seen.insert(c.nodes.clone()))
        .collect())
}

/// Exhaustive search for the smallest connected node set covering every
/// keyword, enumerating subsets by ascending size. `None` when no such set
/// exists.
pub fn brute_force_mgst(
    g: &AssociationGraph,
    query_keywords: &[String],
    max_nodes: usize,
) -> Result<Option<(usize, BTreeSet<NodeId>)>> {
    check_query(query_keywords)?;
    if max_nodes > BRUTE_FORCE_MAX_NODES {
        return Err(Error::invalid(format!(
            "brute force limited to {BRUTE_FORCE_MAX_NODES} nodes"
        )));
    }
    let n = g.node_count();
    if n > max_nodes {
        return Err(Error::invalid(format!(
            "graph has {n} nodes, above the limit of {max_nodes}"
        )));
    }
    let full = KeywordMask::full(query_keywords.len());
    let masks: Vec<KeywordMask> = (0..n).map(|v| node_mask(g, v, query_keywords)).collect();
    for size in 1..=n {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            let cover = idx.iter().fold(KeywordMask::default(), |a, &v| a.union(masks[v]));
            if cover == full {
                let set: BTreeSet<NodeId> = idx.iter().copied().collect();
                if g.is_connected_subset(&set) {
                    return Ok(Some((size, set)));
                }
            }
            // next combination in lexicographic order
            let mut i = size;
            while i > 0 && idx[i - 1] == n - size + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..size {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    Ok(None)
}
