//! node2vec-style embeddings: biased second-order random walks over the
//! uncompressed association graph, fed to skip-gram with negative sampling.
//!
//! Every walk draws from its own generator, seeded from the run seed and the
//! walk's index, so walk generation gives the same corpus whether it runs on
//! one thread or many. Gradient updates are applied sequentially, which makes
//! a fixed seed reproduce the model bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AssociationGraph, NodeId};
use crate::steiner::CandidateComposition;

const EMBEDDING_FORMAT: &str = "# apicomp-embeddings/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingParams {
    pub dimension: usize,
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub window: usize,
    /// node2vec `p`: weight 1/p for stepping straight back.
    pub return_param: f64,
    /// node2vec `q`: weight 1/q for stepping away from the previous node.
    pub inout_param: f64,
    pub negative_samples: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Generate walks on the rayon pool. Results are identical either way.
    pub parallel: bool,
}

impl Default for EmbeddingParams {
    fn default() -> Self {
        EmbeddingParams {
            dimension: 128,
            walks_per_node: 10,
            walk_length: 80,
            window: 10,
            return_param: 1.0,
            inout_param: 1.0,
            negative_samples: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 0,
            parallel: false,
        }
    }
}

impl EmbeddingParams {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("walks_per_node", self.walks_per_node),
            ("walk_length", self.walk_length),
            ("window", self.window),
            ("negative_samples", self.negative_samples),
            ("epochs", self.epochs),
        ];
        if self.dimension < 2 {
            return Err(Error::invalid("embedding dimension must be at least 2"));
        }
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::invalid(format!("{name} must be at least 1")));
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("return_param", self.return_param),
            ("inout_param", self.inout_param),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive and finite")));
            }
        }
        Ok(())
    }

    fn header(&self) -> String {
        format!(
            "walks_per_node={} walk_length={} window={} return_param={} inout_param={} \
             negative_samples={} epochs={} learning_rate={} parallel={}",
            self.walks_per_node,
            self.walk_length,
            self.window,
            self.return_param,
            self.inout_param,
            self.negative_samples,
            self.epochs,
            self.learning_rate,
            self.parallel
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub params: EmbeddingParams,
    pub graph_hash: String,
    /// Row `i` belongs to original node `i`.
    vectors: Vec<Vec<f32>>,
    api_ids: Vec<String>,
}

/// Unit-length mean of a composition's node vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionVector {
    values: Vec<f64>,
}

impl CompositionVector {
    /// Normalizes `values`; fails when they are all zero.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::DegenerateVector);
        }
        Ok(CompositionVector {
            values: values.into_iter().map(|x| x / norm).collect(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn negated(&self) -> Self {
        CompositionVector {
            values: self.values.iter().map(|x| -x).collect(),
        }
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(stream)))
}

fn walk(g: &AssociationGraph, start: NodeId, params: &EmbeddingParams, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut path = Vec::with_capacity(params.walk_length);
    path.push(start as u32);
    let unbiased = params.return_param == 1.0 && params.inout_param == 1.0;
    let mut weights = Vec::new();
    while path.len() < params.walk_length {
        let cur = *path.last().unwrap() as usize;
        let nbrs = g.neighbors(cur);
        if nbrs.is_empty() {
            break;
        }
        let next = if unbiased || path.len() == 1 {
            nbrs[rng.gen_range(0..nbrs.len())]
        } else {
            let prev = path[path.len() - 2] as usize;
            let prev_nbrs = g.neighbors(prev);
            weights.clear();
            weights.extend(nbrs.iter().map(|&x| {
                if x == prev {
                    1.0 / params.return_param
                } else if prev_nbrs.binary_search(&x).is_ok() {
                    1.0
                } else {
                    1.0 / params.inout_param
                }
            }));
            let total: f64 = weights.iter().sum();
            let mut r = rng.gen::<f64>() * total;
            let mut chosen = nbrs[nbrs.len() - 1];
            for (i, &w) in weights.iter().enumerate() {
                if r < w {
                    chosen = nbrs[i];
                    break;
                }
                r -= w;
            }
            chosen
        };
        path.push(next as u32);
    }
    path
}

fn generate_walks(g: &AssociationGraph, params: &EmbeddingParams) -> Vec<Vec<u32>> {
    let n = g.node_count();
    let mut jobs = Vec::with_capacity(n * params.walks_per_node);
    for round in 0..params.walks_per_node {
        let mut order: Vec<NodeId> = (0..n).collect();
        order.shuffle(&mut stream_rng(params.seed, u64::MAX - round as u64));
        jobs.extend(order);
    }
    let run = |(i, &start): (usize, &NodeId)| walk(g, start, params, &mut stream_rng(params.seed, i as u64));
    if params.parallel {
        jobs.par_iter().enumerate().map(run).collect()
    } else {
        jobs.iter().enumerate().map(run).collect()
    }
}

/// Dot product with eight independent accumulators so it vectorizes; the
/// summation order is fixed, keeping results reproducible.
fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0f32; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f32 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    acc.iter().sum::<f32>() + tail
}

fn sigmoid(x: f32) -> f32 {
    if x > 6.0 {
        1.0
    } else if x < -6.0 {
        0.0
    } else {
        1.0 / (1.0 + (-x).exp())
    }
}

pub fn train_embeddings(g: &AssociationGraph, params: &EmbeddingParams) -> Result<EmbeddingModel> {
    params.validate()?;
    if g.is_empty() {
        return Err(Error::invalid("cannot embed an empty graph"));
    }
    let n = g.node_count();
    let dim = params.dimension;
    let walks = generate_walks(g, params);

    let mut counts = vec![0f64; n];
    for w in &walks {
        for &v in w {
            counts[v as usize] += 1.0;
        }
    }
    let noise = WeightedIndex::new(counts.iter().map(|c| c.powf(0.75)))
        .map_err(|e| Error::invalid(format!("noise distribution: {e}")))?;

    let mut rng = stream_rng(params.seed, u64::MAX / 2);
    let mut input: Vec<f32> = (0..n * dim)
        .map(|_| (rng.gen::<f32>() - 0.5) / dim as f32)
        .collect();
    let mut output = vec![0f32; n * dim];
    let mut grad = vec![0f32; dim];

    let tokens: usize = walks.iter().map(Vec::len).sum();
    let total = (tokens * params.epochs).max(1) as f64;
    let mut processed = 0usize;
    let lr0 = params.learning_rate;

    for _ in 0..params.epochs {
        for w in &walks {
            for (i, &center) in w.iter().enumerate() {
                let lr = (lr0 * (1.0 - processed as f64 / total)).max(lr0 * 1e-4) as f32;
                processed += 1;
                let span = params.window - rng.gen_range(0..params.window);
                let lo = i.saturating_sub(span);
                let hi = (i + span).min(w.len() - 1);
                let c = center as usize * dim;
                for (j, &ctx) in w.iter().enumerate().take(hi + 1).skip(lo) {
                    if j == i {
                        continue;
                    }
                    grad.iter_mut().for_each(|x| *x = 0.0);
                    for d in 0..=params.negative_samples {
                        let (target, label) = if d == 0 {
                            (ctx as usize, 1.0)
                        } else {
                            let t = noise.sample(&mut rng);
                            if t == ctx as usize {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let inp = &input[c..c + dim];
                        let out = &mut output[target * dim..(target + 1) * dim];
                        let step = (label - sigmoid(dot(inp, out))) * lr;
                        for ((g, o), &x) in grad.iter_mut().zip(out.iter_mut()).zip(inp) {
                            *g += step * *o;
                            *o += step * x;
                        }
                    }
                    for (x, &g) in input[c..c + dim].iter_mut().zip(&grad) {
                        *x += g;
                    }
                }
            }
        }
    }

    Ok(EmbeddingModel {
        params: params.clone(),
        graph_hash: g.content_hash().to_owned(),
        vectors: input.chunks(dim).map(<[f32]>::to_vec).collect(),
        api_ids: g.nodes().iter().map(|n| n.api_id.clone()).collect(),
    })
}

impl EmbeddingModel {
    pub fn dimension(&self) -> usize {
        self.params.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Vector of an original graph node.
    pub fn vector(&self, node: NodeId) -> Result<&[f32]> {
        self.vectors.get(node).map(Vec::as_slice).ok_or(Error::OutOfRange {
            what: "node",
            index: node,
            len: self.vectors.len(),
        })
    }

    /// Fails unless the model was trained on exactly this graph.
    pub fn ensure_graph(&self, g: &AssociationGraph) -> Result<()> {
        if self.graph_hash != g.content_hash() {
            return Err(Error::Consistency(format!(
                "embeddings were trained on graph {} but graph {} was given",
                self.graph_hash,
                g.content_hash()
            )));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{EMBEDDING_FORMAT}");
        let _ = writeln!(s, "graph {}", self.graph_hash);
        let _ = writeln!(s, "dimension {}", self.params.dimension);
        let _ = writeln!(s, "params {}", self.params.header());
        let _ = writeln!(s, "seed {}", self.params.seed);
        for (i, (v, api)) in self.vectors.iter().zip(&self.api_ids).enumerate() {
            let _ = write!(s, "{i} {api}");
            for x in v {
                let _ = write!(s, " {x}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Parse {
            path: "<embeddings>".into(),
            line,
            message: msg.to_owned(),
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut field = |name: &str| -> Result<(usize, String)> {
            let (no, line) = lines.next().ok_or_else(|| bad(0, "truncated header"))?;
            let rest = line
                .strip_prefix(name)
                .and_then(|r| r.strip_prefix(' '))
                .ok_or_else(|| bad(no, &format!("expected `{name}`")))?;
            Ok((no, rest.to_owned()))
        };
        let (_, magic) = field("#")?;
        if format!("# {magic}") != EMBEDDING_FORMAT {
            return Err(bad(1, "not an embeddings file"));
        }
        let (_, graph_hash) = field("graph")?;
        let (no, dim) = field("dimension")?;
        let dimension: usize = dim.parse().map_err(|_| bad(no, "bad dimension"))?;
        let (no, params_line) = field("params")?;
        let (sno, seed) = field("seed")?;
        let mut params = EmbeddingParams {
            dimension,
            seed: seed.parse().map_err(|_| bad(sno, "bad seed"))?,
            ..EmbeddingParams::default()
        };
        for kv in params_line.split_whitespace() {
            let (k, v) = kv.split_once('=').ok_or_else(|| bad(no, "bad params entry"))?;
            let perr = |_| bad(no, &format!("bad value for {k}"));
            match k {
                "walks_per_node" => params.walks_per_node = v.parse().map_err(perr)?,
                "walk_length" => params.walk_length = v.parse().map_err(perr)?,
                "window" => params.window = v.parse().map_err(perr)?,
                "return_param" => params.return_param = v.parse().map_err(|_| bad(no, k))?,
                "inout_param" => params.inout_param = v.parse().map_err(|_| bad(no, k))?,
                "negative_samples" => params.negative_samples = v.parse().map_err(perr)?,
                "epochs" => params.epochs = v.parse().map_err(perr)?,
                "learning_rate" => params.learning_rate = v.parse().map_err(|_| bad(no, k))?,
                "parallel" => params.parallel = v.parse().map_err(|_| bad(no, k))?,
                _ => return Err(bad(no, &format!("unknown parameter `{k}`"))),
            }
        }
        let mut vectors = Vec::new();
        let mut api_ids = Vec::new();
        for (no, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let id: usize = parts
                .next()
                .and_then(|p| p.parse().ok())
                .ok_or_else(|| bad(no, "bad node id"))?;
            if id != vectors.len() {
                return Err(bad(no, "node rows out of order"));
            }
            api_ids.push(parts.next().ok_or_else(|| bad(no, "missing api id"))?.to_owned());
            let v: Vec<f32> = parts
                .map(|p| p.parse::<f32>().map_err(|_| bad(no, "bad vector entry")))
                .collect::<Result<_>>()?;
            if v.len() != dimension {
                return Err(bad(no, "row length differs from dimension"));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(bad(no, "non-finite vector entry"));
            }
            vectors.push(v);
        }
        Ok(EmbeddingModel {
            params,
            graph_hash,
            vectors,
            api_ids,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Mean of the member vectors, scaled to unit length.
pub fn composition_vector(
    model: &EmbeddingModel,
    composition: &CandidateComposition,
) -> Result<CompositionVector> {
    if composition.nodes.is_empty() {
        return Err(Error::invalid("empty composition"));
    }
    let mut sum = vec![0f64; model.dimension()];
    for &v in &composition.nodes {
        for (s, &x) in sum.iter_mut().zip(model.vector(v)?) {
            *s += x as f64;
        }
    }
    let n = composition.nodes.len() as f64;
    CompositionVector::new(sum.into_iter().map(|s| s / n).collect())
}

/// Cosine similarity of two unit vectors.
pub fn similarity(a: &CompositionVector, b: &CompositionVector) -> Result<f64> {
    if a.dimension() != b.dimension() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            a.dimension(),
            b.dimension()
        )));
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok(dot.clamp(-1.0, 1.0))
}
