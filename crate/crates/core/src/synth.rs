//! Seeded synthetic corpora and graphs for tests and benchmarks.

use std::collections::BTreeSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{CatalogEntry, MashupRecord};
use crate::graph::{AssociationGraph, KeywordMode};

fn api(i: usize) -> String {
    format!("a{i}")
}

fn random_catalog(rng: &mut ChaCha8Rng, n: usize, vocab: usize, max_kw: usize) -> Vec<CatalogEntry> {
    (0..n)
        .map(|i| {
            let count = rng.gen_range(1..=max_kw.max(1));
            let mut kws: Vec<String> = Vec::new();
            while kws.len() < count.min(vocab) {
                let k = format!("k{}", rng.gen_range(0..vocab));
                if !kws.contains(&k) {
                    kws.push(k);
                }
            }
            CatalogEntry {
                api_id: api(i),
                category_keywords: kws,
            }
        })
        .collect()
}

fn graph_from_pairs(
    catalog: &[CatalogEntry],
    pairs: &BTreeSet<(usize, usize)>,
) -> AssociationGraph {
    let mut records: Vec<MashupRecord> = pairs
        .iter()
        .enumerate()
        .map(|(i, &(u, v))| MashupRecord {
            mashup_id: format!("e{i}"),
            apis: vec![api(u), api(v)],
        })
        .collect();
    // singleton records keep isolated APIs in the graph
    for i in 0..catalog.len() {
        records.push(MashupRecord {
            mashup_id: format!("s{i}"),
            apis: vec![api(i)],
        });
    }
    AssociationGraph::build(&records, catalog, KeywordMode::AllCategories)
        .expect("synthetic records resolve")
}

/// `n` nodes, up to `m` distinct random edges, each node carrying 1 to
/// `max_kw` keywords drawn from `k0 .. k{vocab-1}`.
pub fn random_graph(seed: u64, n: usize, m: usize, vocab: usize, max_kw: usize) -> AssociationGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let catalog = random_catalog(&mut rng, n, vocab, max_kw);
    let mut pairs = BTreeSet::new();
    if n >= 2 {
        for _ in 0..m {
            let u = rng.gen_range(0..n);
            let v = rng.gen_range(0..n);
            if u != v {
                pairs.insert((u.min(v), u.max(v)));
            }
        }
    }
    graph_from_pairs(&catalog, &pairs)
}

/// Like [`random_graph`] but connected: a random spanning tree plus extra
/// random edges up to `m` in total (capped by the complete graph).
pub fn random_connected_graph(
    seed: u64,
    n: usize,
    m: usize,
    vocab: usize,
    max_kw: usize,
) -> AssociationGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let catalog = random_catalog(&mut rng, n, vocab, max_kw);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut pairs = BTreeSet::new();
    for i in 1..n {
        let u = order[i];
        let v = order[rng.gen_range(0..i)];
        pairs.insert((u.min(v), u.max(v)));
    }
    let target = m.min(n * n.saturating_sub(1) / 2);
    while pairs.len() < target {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u != v {
            pairs.insert((u.min(v), u.max(v)));
        }
    }
    graph_from_pairs(&catalog, &pairs)
}

/// Parameters for a synthetic mashup corpus with community structure and
/// skewed API popularity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub apis: usize,
    /// Generation stops once the co-usage graph has this many distinct edges.
    pub target_edges: usize,
    pub vocabulary: usize,
    pub communities: usize,
    /// Probability that a record member is drawn from the record's community.
    pub locality: f64,
    pub min_record_len: usize,
    pub max_record_len: usize,
    pub seed: u64,
}

impl CorpusConfig {
    pub fn new(apis: usize, target_edges: usize, seed: u64) -> Self {
        CorpusConfig {
            apis,
            target_edges,
            vocabulary: (apis / 10).max(4),
            communities: (apis / 40).max(1),
            locality: 0.85,
            min_record_len: 2,
            max_record_len: 6,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub catalog: Vec<CatalogEntry>,
    pub records: Vec<MashupRecord>,
}

pub fn generate_corpus(cfg: &CorpusConfig) -> SyntheticCorpus {
    let n = cfg.apis.max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let communities = cfg.communities.clamp(1, n);
    let community: Vec<usize> = (0..n).map(|i| i % communities).collect();

    // each community leans on a slice of the vocabulary for its functional keyword
    let catalog: Vec<CatalogEntry> = (0..n)
        .map(|i| {
            let c = community[i];
            let primary = if rng.gen_bool(0.7) {
                (c * 7 + rng.gen_range(0..8)) % cfg.vocabulary
            } else {
                rng.gen_range(0..cfg.vocabulary)
            };
            let mut kws = vec![format!("k{primary}")];
            for _ in 0..rng.gen_range(0..=2) {
                let k = format!("k{}", rng.gen_range(0..cfg.vocabulary));
                if !kws.contains(&k) {
                    kws.push(k);
                }
            }
            CatalogEntry {
                api_id: api(i),
                category_keywords: kws,
            }
        })
        .collect();

    let mut popularity: Vec<f64> = (1..=n).map(|r| 1.0 / (r as f64).powf(0.8)).collect();
    popularity.shuffle(&mut rng);
    let members: Vec<Vec<usize>> = (0..communities)
        .map(|c| (0..n).filter(|&i| community[i] == c).collect())
        .collect();
    let local_pick: Vec<WeightedIndex<f64>> = members
        .iter()
        .map(|m| WeightedIndex::new(m.iter().map(|&i| popularity[i])).expect("positive weights"))
        .collect();
    let global_pick = WeightedIndex::new(&popularity).expect("positive weights");

    let mut pairs = BTreeSet::new();
    let mut records = Vec::new();
    let mut used = vec![false; n];
    let mut unused = n;
    let max_len = cfg.max_record_len.clamp(2, n);
    let min_len = cfg.min_record_len.clamp(1, max_len);
    let mut push = |apis: Vec<usize>, pairs: &mut BTreeSet<(usize, usize)>, used: &mut Vec<bool>| {
        for (i, &a) in apis.iter().enumerate() {
            for &b in &apis[i + 1..] {
                pairs.insert((a.min(b), a.max(b)));
            }
        }
        let fresh = apis.iter().filter(|&&a| !std::mem::replace(&mut used[a], true)).count();
        records.push(MashupRecord {
            mashup_id: format!("m{}", records.len()),
            apis: apis.into_iter().map(api).collect(),
        });
        fresh
    };
    // leave room for one extra edge per API that no record has touched yet
    while pairs.len() + unused < cfg.target_edges {
        let first = global_pick.sample(&mut rng);
        let c = community[first];
        let len = rng.gen_range(min_len..=max_len);
        let mut apis = vec![first];
        let mut attempts = 0;
        while apis.len() < len && attempts < 50 {
            attempts += 1;
            let cand = if rng.gen_bool(cfg.locality) {
                members[c][local_pick[c].sample(&mut rng)]
            } else {
                global_pick.sample(&mut rng)
            };
            if !apis.contains(&cand) {
                apis.push(cand);
            }
        }
        unused -= push(apis, &mut pairs, &mut used);
    }
    for a in 0..n {
        if used[a] {
            continue;
        }
        let c = community[a];
        let partner = (0..50)
            .map(|_| members[c][local_pick[c].sample(&mut rng)])
            .find(|&b| b != a)
            .unwrap_or((a + 1) % n);
        push(vec![a, partner], &mut pairs, &mut used);
    }
    drop(push);
    SyntheticCorpus { catalog, records }
}
