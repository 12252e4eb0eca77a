//! Benchmark metrics and drivers: precision, quality, intra-list diversity,
//! coverage, success rate, size and time per query.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compress::SuperGraph;
use crate::corpus::{MashupRecord, Query};
use crate::embedding::EmbeddingModel;
use crate::error::{Error, Result};
use crate::graph::{AssociationGraph, NodeId};
use crate::recommend::{recommend, RecommendParams, SelectParams, DEFAULT_KMEANS_ITERS};
use crate::scoring::{normalize_batch, quality, MmrParams};
use crate::steiner::{discover, CandidateComposition, SearchBudget};

pub const REPORT_FORMAT: &str = "apicomp-report/1";

/// Share of `recommended` that also appears in `truth`.
pub fn precision(recommended: &BTreeSet<NodeId>, truth: &BTreeSet<NodeId>) -> Result<f64> {
    if recommended.is_empty() {
        return Err(Error::invalid("precision of an empty composition"));
    }
    Ok(recommended.intersection(truth).count() as f64 / recommended.len() as f64)
}

/// `1 - |a ∩ b| / (|a| + |b|)`; 0.5 for identical sets, 1 for disjoint ones.
pub fn hamming_diversity(a: &BTreeSet<NodeId>, b: &BTreeSet<NodeId>) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("diversity of an empty composition"));
    }
    Ok(1.0 - a.intersection(b).count() as f64 / (a.len() + b.len()) as f64)
}

/// Mean pairwise diversity inside one list; `None` below two members.
pub fn list_diversity(list: &[BTreeSet<NodeId>]) -> Result<Option<f64>> {
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..list.len() {
        for j in i + 1..list.len() {
            sum += hamming_diversity(&list[i], &list[j])?;
            pairs += 1;
        }
    }
    Ok((pairs > 0).then(|| sum / pairs as f64))
}

pub fn coverage(recommended: &BTreeSet<NodeId>, total_nodes: usize) -> Result<f64> {
    if total_nodes == 0 {
        return Err(Error::invalid("coverage over an empty catalog"));
    }
    Ok(recommended.len() as f64 / total_nodes as f64)
}

/// Outcome of one query through the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub query: Query,
    /// Returned compositions: the recommended list, or every discovered
    /// candidate in discovery-only runs.
    pub compositions: Vec<BTreeSet<NodeId>>,
    pub candidate_count: usize,
    pub seconds: f64,
    /// Module error that ended the query early.
    pub error: Option<String>,
}

/// Fraction of results holding a composition smaller than
/// `factor * |keywords|`.
pub fn success_rate_with(results: &[QueryResult], factor: f64) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    let ok = results
        .iter()
        .filter(|r| {
            let limit = factor * r.query.keywords.len() as f64;
            r.compositions.iter().any(|c| (c.len() as f64) < limit)
        })
        .count();
    ok as f64 / results.len() as f64
}

pub fn success_rate(results: &[QueryResult]) -> f64 {
    success_rate_with(results, 2.0)
}

fn all_compositions(results: &[QueryResult]) -> impl Iterator<Item = &BTreeSet<NodeId>> {
    results.iter().flat_map(|r| r.compositions.iter())
}

pub fn mean_size(results: &[QueryResult]) -> Result<f64> {
    let sizes: Vec<usize> = all_compositions(results).map(BTreeSet::len).collect();
    if sizes.is_empty() {
        return Err(Error::invalid("mean size over no compositions"));
    }
    Ok(sizes.iter().sum::<usize>() as f64 / sizes.len() as f64)
}

pub fn mean_quality(results: &[QueryResult], g: &AssociationGraph) -> Result<f64> {
    let qs = all_compositions(results)
        .map(|c| quality(g, c))
        .collect::<Result<Vec<_>>>()?;
    if qs.is_empty() {
        return Err(Error::invalid("mean quality over no compositions"));
    }
    Ok(qs.iter().sum::<f64>() / qs.len() as f64)
}

pub fn mean_time(results: &[QueryResult]) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::invalid("mean time over no queries"));
    }
    Ok(results.iter().map(|r| r.seconds).sum::<f64>() / results.len() as f64)
}

/// Per-composition precision averaged within each query, then across the
/// queries that have a ground truth and at least one composition.
pub fn mean_precision(
    results: &[QueryResult],
    truths: &BTreeMap<String, BTreeSet<NodeId>>,
) -> Result<Option<f64>> {
    let mut per_query = Vec::new();
    for r in results {
        let Some(truth) = r.query.source_mashup.as_ref().and_then(|m| truths.get(m)) else {
            continue;
        };
        if r.compositions.is_empty() {
            continue;
        }
        let mut sum = 0.0;
        for c in &r.compositions {
            sum += precision(c, truth)?;
        }
        per_query.push(sum / r.compositions.len() as f64);
    }
    Ok((!per_query.is_empty()).then(|| per_query.iter().sum::<f64>() / per_query.len() as f64))
}

/// Mean of the per-list diversities over lists with at least two members.
pub fn mean_intra_list_diversity(results: &[QueryResult]) -> Result<Option<f64>> {
    let mut vals = Vec::new();
    for r in results {
        if let Some(d) = list_diversity(&r.compositions)? {
            vals.push(d);
        }
    }
    Ok((!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64))
}

pub fn catalog_coverage(results: &[QueryResult], total_nodes: usize) -> Result<f64> {
    let seen: BTreeSet<NodeId> = all_compositions(results).flatten().copied().collect();
    coverage(&seen, total_nodes)
}

/// Ground-truth node sets keyed by mashup id; APIs missing from `g` are skipped.
pub fn truth_sets(g: &AssociationGraph, records: &[MashupRecord]) -> BTreeMap<String, BTreeSet<NodeId>> {
    records
        .iter()
        .map(|r| {
            let nodes = r.apis.iter().filter_map(|a| g.node_by_api(a)).collect();
            (r.mashup_id.clone(), nodes)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchMode {
    /// Discovery followed by top-k selection.
    Full,
    /// Candidate discovery only; every candidate counts as returned.
    DiscoveryOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub mode: BenchMode,
    pub k: usize,
    pub lambda: f64,
    pub granularity: usize,
    pub max_candidates: usize,
    pub k_clusters: Option<usize>,
    pub kmeans_iters: usize,
    pub swap_passes: usize,
    pub max_pops: u64,
    pub wall_time_secs: f64,
    /// Seeds of the upstream artifacts, echoed for provenance.
    pub seeds: BTreeMap<String, u64>,
    pub parallel: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let select = SelectParams::default();
        let budget = SearchBudget::default();
        BenchConfig {
            mode: BenchMode::Full,
            k: select.k,
            lambda: select.mmr.lambda(),
            granularity: crate::compress::DEFAULT_GRANULARITY,
            max_candidates: crate::steiner::DEFAULT_MAX_CANDIDATES,
            k_clusters: None,
            kmeans_iters: DEFAULT_KMEANS_ITERS,
            swap_passes: select.max_swap_passes,
            max_pops: budget.max_pops,
            wall_time_secs: budget.wall_time.as_secs_f64(),
            seeds: BTreeMap::new(),
            parallel: false,
        }
    }
}

impl BenchConfig {
    fn budget(&self) -> Result<SearchBudget> {
        if !(self.wall_time_secs.is_finite() && self.wall_time_secs > 0.0) {
            return Err(Error::invalid(format!("wall time {} must be positive", self.wall_time_secs)));
        }
        Ok(SearchBudget {
            max_pops: self.max_pops,
            wall_time: Duration::from_secs_f64(self.wall_time_secs),
        })
    }

    fn recommend_params(&self) -> Result<RecommendParams> {
        Ok(RecommendParams {
            select: SelectParams {
                k: self.k,
                mmr: MmrParams::new(self.lambda)?,
                max_swap_passes: self.swap_passes,
            },
            k_clusters: self.k_clusters,
            kmeans_iters: self.kmeans_iters,
        })
    }
}

/// One machine-readable row per query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRow {
    pub index: usize,
    pub keywords: Vec<String>,
    pub source: Option<String>,
    pub candidates: usize,
    /// API ids of each returned composition.
    pub compositions: Vec<Vec<String>>,
    pub precision: Option<f64>,
    pub diversity: Option<f64>,
    pub mean_quality: Option<f64>,
    pub seconds: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub queries: usize,
    pub failed: usize,
    pub mp: Option<f64>,
    pub mq: Option<f64>,
    pub mid: Option<f64>,
    pub coverage: f64,
    pub sr: f64,
    pub ms: Option<f64>,
    pub tc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: BenchConfig,
    pub graph_hash: String,
    pub rows: Vec<QueryRow>,
    pub summary: Summary,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "kebab-case")]
enum ReportLine {
    Header { format: String, graph_hash: String },
    Config(BenchConfig),
    Query(QueryRow),
    Summary(Summary),
}

impl BenchmarkReport {
    /// Copy with every wall-clock field zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        for row in &mut r.rows {
            row.seconds = 0.0;
        }
        r.summary.tc = 0.0;
        r
    }

    /// One JSON object per line: header, config, one row per query, summary.
    pub fn to_lines(&self) -> String {
        let mut lines = vec![
            ReportLine::Header {
                format: REPORT_FORMAT.to_owned(),
                graph_hash: self.graph_hash.clone(),
            },
            ReportLine::Config(self.config.clone()),
        ];
        lines.extend(self.rows.iter().cloned().map(ReportLine::Query));
        lines.push(ReportLine::Summary(self.summary.clone()));
        let mut out = String::new();
        for l in &lines {
            out.push_str(&serde_json::to_string(l).expect("report serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_lines(text: &str) -> Result<Self> {
        let origin = crate::corpus::inline_origin();
        let parse_err = |line: usize, message: String| Error::Parse {
            path: origin.clone(),
            line,
            message,
        };
        let mut graph_hash = None;
        let mut config = None;
        let mut rows = Vec::new();
        let mut summary = None;
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let line: ReportLine = serde_json::from_str(raw).map_err(|e| parse_err(i + 1, e.to_string()))?;
            match line {
                ReportLine::Header { format, graph_hash: h } => {
                    if format != REPORT_FORMAT {
                        return Err(parse_err(i + 1, format!("unsupported format `{format}`")));
                    }
                    graph_hash = Some(h);
                }
                ReportLine::Config(c) => config = Some(c),
                ReportLine::Query(r) => rows.push(r),
                ReportLine::Summary(s) => summary = Some(s),
            }
        }
        let missing = |what: &str| parse_err(0, format!("report has no {what} record"));
        Ok(BenchmarkReport {
            graph_hash: graph_hash.ok_or_else(|| missing("header"))?,
            config: config.ok_or_else(|| missing("config"))?,
            rows,
            summary: summary.ok_or_else(|| missing("summary"))?,
        })
    }

    /// Aligned table for terminals.
    pub fn to_table(&self) -> String {
        let fmt = |x: Option<f64>| x.map_or_else(|| "n/a".to_owned(), |v| format!("{v:.4}"));
        let s = &self.summary;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "mode={:?} p={} k={} lambda={} candidates={}",
            self.config.mode, self.config.granularity, self.config.k, self.config.lambda, self.config.max_candidates
        );
        let _ = writeln!(out, "{:<10} {:>10}", "metric", "value");
        for (name, v) in [
            ("MP", fmt(s.mp)),
            ("MQ", fmt(s.mq)),
            ("MID", fmt(s.mid)),
            ("Coverage", fmt(Some(s.coverage))),
            ("SR", fmt(Some(s.sr))),
            ("MS", fmt(s.ms)),
            ("TC (s)", fmt(Some(s.tc))),
        ] {
            let _ = writeln!(out, "{name:<10} {v:>10}");
        }
        let _ = writeln!(out, "{:<10} {:>10}", "queries", s.queries);
        let _ = writeln!(out, "{:<10} {:>10}", "failed", s.failed);
        out
    }
}

fn check_artifacts(g: &AssociationGraph, sg: &SuperGraph<'_>, model: Option<&EmbeddingModel>) -> Result<()> {
    if sg.original().content_hash() != g.content_hash() {
        return Err(Error::Consistency(format!(
            "supergraph built from graph {}, expected {}",
            sg.original().content_hash(),
            g.content_hash()
        )));
    }
    if let Some(m) = model {
        m.ensure_graph(g)?;
    }
    Ok(())
}

/// Candidates per query plus the discovery time in seconds.
type Discovered = (Result<Vec<CandidateComposition>>, f64);

fn discover_all(sg: &SuperGraph<'_>, queries: &[Query], config: &BenchConfig) -> Result<Vec<Discovered>> {
    let budget = config.budget()?;
    let run = |q: &Query| {
        let start = Instant::now();
        let found = discover(sg, &q.keywords, config.max_candidates, budget);
        (found, start.elapsed().as_secs_f64())
    };
    Ok(if config.parallel {
        queries.par_iter().map(run).collect()
    } else {
        queries.iter().map(run).collect()
    })
}

fn select_all(
    g: &AssociationGraph,
    model: Option<&EmbeddingModel>,
    queries: &[Query],
    discovered: &[Discovered],
    config: &BenchConfig,
) -> Result<Vec<QueryResult>> {
    let params = config.recommend_params()?;
    if config.mode == BenchMode::Full && model.is_none() {
        return Err(Error::invalid("full benchmark needs an embedding model"));
    }
    let run = |(q, (found, discover_secs)): (&Query, &Discovered)| {
        let mut result = QueryResult {
            query: q.clone(),
            compositions: Vec::new(),
            candidate_count: 0,
            seconds: *discover_secs,
            error: None,
        };
        let candidates = match found {
            Ok(c) => c,
            Err(e) => {
                result.error = Some(e.to_string());
                return result;
            }
        };
        result.candidate_count = candidates.len();
        match (config.mode, model) {
            (BenchMode::DiscoveryOnly, _) => {
                result.compositions = candidates.iter().map(|c| c.nodes.clone()).collect();
            }
            (BenchMode::Full, Some(model)) if !candidates.is_empty() => {
                let start = Instant::now();
                match recommend(g, model, candidates, &params) {
                    Ok(rec) => {
                        result.compositions = rec
                            .items
                            .iter()
                            .map(|it| candidates[it.candidate].nodes.clone())
                            .collect();
                    }
                    Err(e) => result.error = Some(e.to_string()),
                }
                result.seconds += start.elapsed().as_secs_f64();
            }
            _ => {}
        }
        result
    };
    let pairs: Vec<(&Query, &Discovered)> = queries.iter().zip(discovered).collect();
    Ok(if config.parallel {
        pairs.into_par_iter().map(run).collect()
    } else {
        pairs.into_iter().map(run).collect()
    })
}

/// Builds the report from finished query results.
pub fn summarize(
    g: &AssociationGraph,
    results: &[QueryResult],
    truths: &BTreeMap<String, BTreeSet<NodeId>>,
    config: &BenchConfig,
) -> Result<BenchmarkReport> {
    if results.is_empty() {
        return Err(Error::invalid("benchmark over no queries"));
    }
    let names = |c: &BTreeSet<NodeId>| c.iter().map(|&v| g.nodes()[v].api_id.clone()).collect();
    let mut rows = Vec::with_capacity(results.len());
    for (index, r) in results.iter().enumerate() {
        let truth = r.query.source_mashup.as_ref().and_then(|m| truths.get(m));
        let precision = match truth {
            Some(t) if !r.compositions.is_empty() => {
                let mut sum = 0.0;
                for c in &r.compositions {
                    sum += precision(c, t)?;
                }
                Some(sum / r.compositions.len() as f64)
            }
            _ => None,
        };
        let single = std::slice::from_ref(r);
        rows.push(QueryRow {
            index,
            keywords: r.query.keywords.clone(),
            source: r.query.source_mashup.clone(),
            candidates: r.candidate_count,
            compositions: r.compositions.iter().map(names).collect(),
            precision,
            diversity: list_diversity(&r.compositions)?,
            mean_quality: mean_quality(single, g).ok(),
            seconds: r.seconds,
            error: r.error.clone(),
        });
    }
    let any = all_compositions(results).next().is_some();
    let summary = Summary {
        queries: results.len(),
        failed: results.iter().filter(|r| r.error.is_some()).count(),
        mp: mean_precision(results, truths)?,
        mq: if any { Some(mean_quality(results, g)?) } else { None },
        mid: mean_intra_list_diversity(results)?,
        coverage: catalog_coverage(results, g.node_count())?,
        sr: success_rate(results),
        ms: if any { Some(mean_size(results)?) } else { None },
        tc: mean_time(results)?,
    };
    Ok(BenchmarkReport {
        config: config.clone(),
        graph_hash: g.content_hash().to_owned(),
        rows,
        summary,
    })
}

/// Runs every query through the pipeline. Wall time counts discovery and
/// selection only; graph, supergraph and embeddings are built beforehand.
pub fn run_benchmark(
    g: &AssociationGraph,
    sg: &SuperGraph<'_>,
    model: Option<&EmbeddingModel>,
    queries: &[Query],
    truths: &BTreeMap<String, BTreeSet<NodeId>>,
    config: &BenchConfig,
) -> Result<(BenchmarkReport, Vec<QueryResult>)> {
    check_artifacts(g, sg, model)?;
    if sg.granularity() != config.granularity {
        return Err(Error::Consistency(format!(
            "supergraph granularity {} but config says {}",
            sg.granularity(),
            config.granularity
        )));
    }
    let discovered = discover_all(sg, queries, config)?;
    let results = select_all(g, model, queries, &discovered, config)?;
    Ok((summarize(g, &results, truths, config)?, results))
}

/// Paired discovery-only runs at two granularities on the same queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub granularity: usize,
    pub sr: f64,
    pub ms: Option<f64>,
    pub tc: f64,
    pub failed: usize,
}

pub fn run_ablation(
    g: &AssociationGraph,
    granularities: &[usize],
    queries: &[Query],
    config: &BenchConfig,
) -> Result<Vec<AblationRow>> {
    let truths = BTreeMap::new();
    granularities
        .iter()
        .map(|&p| {
            let sg = crate::compress::compress(g, p)?;
            let cfg = BenchConfig {
                mode: BenchMode::DiscoveryOnly,
                granularity: p,
                ..config.clone()
            };
            let (report, _) = run_benchmark(g, &sg, None, queries, &truths, &cfg)?;
            Ok(AblationRow {
                granularity: p,
                sr: report.summary.sr,
                ms: report.summary.ms,
                tc: report.summary.tc,
                failed: report.summary.failed,
            })
        })
        .collect()
}

pub fn format_ablation(rows: &[AblationRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<4} {:>8} {:>8} {:>12} {:>7}", "p", "SR", "MS", "TC (s)", "failed");
    for r in rows {
        let ms = r.ms.map_or_else(|| "n/a".to_owned(), |v| format!("{v:.3}"));
        let _ = writeln!(
            out,
            "{:<4} {:>8.4} {:>8} {:>12.6} {:>7}",
            r.granularity, r.sr, ms, r.tc, r.failed
        );
    }
    out
}

/// Metrics at one lambda; `mq_standardized` is min-max scaled across the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub mp: Option<f64>,
    pub mq: Option<f64>,
    pub mq_standardized: Option<f64>,
    pub mid: Option<f64>,
    pub coverage: f64,
}

/// Discovers candidates once, then selects at every lambda.
pub fn lambda_sweep(
    g: &AssociationGraph,
    sg: &SuperGraph<'_>,
    model: &EmbeddingModel,
    queries: &[Query],
    truths: &BTreeMap<String, BTreeSet<NodeId>>,
    config: &BenchConfig,
    lambdas: &[f64],
) -> Result<Vec<SweepRow>> {
    check_artifacts(g, sg, Some(model))?;
    let discovered = discover_all(sg, queries, config)?;
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let cfg = BenchConfig {
            mode: BenchMode::Full,
            lambda,
            ..config.clone()
        };
        let results = select_all(g, Some(model), queries, &discovered, &cfg)?;
        let report = summarize(g, &results, truths, &cfg)?;
        rows.push(SweepRow {
            lambda,
            mp: report.summary.mp,
            mq: report.summary.mq,
            mq_standardized: None,
            mid: report.summary.mid,
            coverage: report.summary.coverage,
        });
    }
    let present: Vec<f64> = rows.iter().filter_map(|r| r.mq).collect();
    if !present.is_empty() {
        let mut scaled = normalize_batch(&present)?.into_iter();
        for r in rows.iter_mut().filter(|r| r.mq.is_some()) {
            r.mq_standardized = scaled.next();
        }
    }
    Ok(rows)
}

pub fn format_sweep(rows: &[SweepRow]) -> String {
    let fmt = |x: Option<f64>| x.map_or_else(|| "n/a".to_owned(), |v| format!("{v:.4}"));
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<7} {:>8} {:>9} {:>8} {:>8} {:>9}",
        "lambda", "MP", "MQ", "MQ std", "MID", "Coverage"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<7} {:>8} {:>9} {:>8} {:>8} {:>9.4}",
            r.lambda,
            fmt(r.mp),
            fmt(r.mq),
            fmt(r.mq_standardized),
            fmt(r.mid),
            r.coverage
        );
    }
    out
}
