use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

/// Every flag can also be set through an `APICOMP_*` environment variable or
/// the TOML file given by `--config`; flags win over the environment, which
/// wins over the file.
#[derive(Debug, Parser)]
#[command(name = "apicomp", version, about = "Diverse API composition recommendation")]
pub struct Cli {
    /// Optional TOML file with pipeline defaults.
    #[arg(long, global = true, env = "APICOMP_CONFIG")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a catalog and records file; optionally normalize them and derive queries.
    Ingest(IngestArgs),
    /// Build the co-usage graph artifact.
    Build(BuildArgs),
    /// Compress a graph into a supergraph.
    Compress(CompressArgs),
    /// Train node embeddings for a graph.
    Embed(EmbedArgs),
    /// Discover candidate compositions for one keyword query.
    Query(QueryArgs),
    /// Select a diverse top-k list from a candidates file.
    Recommend(RecommendArgs),
    /// Run the full pipeline over a query file and report metrics.
    Bench(BenchArgs),
    /// Write a seeded synthetic catalog, records and queries.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    /// Only the first category keyword of each API.
    FunctionalOnly,
    /// Every category keyword.
    AllCategories,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long, env = "APICOMP_CATALOG")]
    pub catalog: Option<PathBuf>,
    #[arg(long, env = "APICOMP_RECORDS")]
    pub records: Option<PathBuf>,
    /// Write the records back in pipe format.
    #[arg(long, env = "APICOMP_INGEST_OUT")]
    pub out: Option<PathBuf>,
    /// Write one query per record whose keyword union fits the length range.
    #[arg(long, env = "APICOMP_QUERIES_OUT")]
    pub queries_out: Option<PathBuf>,
    #[arg(long, env = "APICOMP_MIN_QUERY_LEN", default_value_t = 3)]
    pub min_query_len: usize,
    #[arg(long, env = "APICOMP_MAX_QUERY_LEN", default_value_t = 6)]
    pub max_query_len: usize,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long, env = "APICOMP_RECORDS")]
    pub records: Option<PathBuf>,
    #[arg(long, env = "APICOMP_CATALOG")]
    pub catalog: Option<PathBuf>,
    #[arg(long, value_enum, env = "APICOMP_KEYWORD_MODE")]
    pub keyword_mode: Option<ModeArg>,
    #[arg(long, env = "APICOMP_GRAPH_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    #[arg(long, env = "APICOMP_GRAPH")]
    pub graph: Option<PathBuf>,
    #[arg(long, env = "APICOMP_GRANULARITY")]
    pub granularity: Option<usize>,
    #[arg(long, env = "APICOMP_SUPERGRAPH_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long, env = "APICOMP_GRAPH")]
    pub graph: Option<PathBuf>,
    #[arg(long, env = "APICOMP_DIM")]
    pub dim: Option<usize>,
    /// Random when omitted; the chosen value is printed and stored.
    #[arg(long, env = "APICOMP_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "APICOMP_WALKS")]
    pub walks: Option<usize>,
    #[arg(long, env = "APICOMP_WALK_LENGTH")]
    pub walk_length: Option<usize>,
    #[arg(long, env = "APICOMP_WINDOW")]
    pub window: Option<usize>,
    #[arg(long, env = "APICOMP_EPOCHS")]
    pub epochs: Option<usize>,
    #[arg(long, env = "APICOMP_NEGATIVE")]
    pub negative: Option<usize>,
    /// node2vec return parameter.
    #[arg(long = "return-param", env = "APICOMP_RETURN_PARAM")]
    pub return_param: Option<f64>,
    /// node2vec in-out parameter.
    #[arg(long = "inout-param", env = "APICOMP_INOUT_PARAM")]
    pub inout_param: Option<f64>,
    #[arg(long, env = "APICOMP_LEARNING_RATE")]
    pub learning_rate: Option<f64>,
    /// Generate walks on all cores; output is unchanged.
    #[arg(long, env = "APICOMP_PARALLEL")]
    pub parallel: bool,
    /// File path, or a directory to receive `<graph-hash>.emb`.
    #[arg(long, env = "APICOMP_EMBEDDINGS_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Candidate cap per query.
    #[arg(long, env = "APICOMP_CANDIDATES")]
    pub candidates: Option<usize>,
    #[arg(long, env = "APICOMP_TIMEOUT_SECS")]
    pub timeout_secs: Option<f64>,
    #[arg(long, env = "APICOMP_MAX_POPS")]
    pub max_pops: Option<u64>,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long, env = "APICOMP_GRAPH")]
    pub graph: Option<PathBuf>,
    #[arg(long, env = "APICOMP_SUPERGRAPH")]
    pub supergraph: Option<PathBuf>,
    /// Comma-separated keywords.
    #[arg(long, env = "APICOMP_KEYWORDS", value_delimiter = ',', required = true)]
    pub keywords: Vec<String>,
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(long, env = "APICOMP_CANDIDATES_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long, env = "APICOMP_K")]
    pub k: Option<usize>,
    #[arg(long, env = "APICOMP_LAMBDA")]
    pub lambda: Option<f64>,
    /// Cluster count, or `auto` for max(2k, 10).
    #[arg(long, env = "APICOMP_CLUSTERS")]
    pub clusters: Option<String>,
    /// Phase 2 pass cap; 1 gives a single pass.
    #[arg(long, env = "APICOMP_SWAP_PASSES")]
    pub swap_passes: Option<usize>,
    #[arg(long, env = "APICOMP_KMEANS_ITERS")]
    pub kmeans_iters: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    #[arg(long = "candidates", env = "APICOMP_CANDIDATES_FILE")]
    pub candidates_file: PathBuf,
    #[arg(long, env = "APICOMP_EMBEDDINGS")]
    pub embeddings: Option<PathBuf>,
    #[arg(long, env = "APICOMP_GRAPH")]
    pub graph: Option<PathBuf>,
    #[command(flatten)]
    pub select: SelectArgs,
    #[arg(long, env = "APICOMP_RECOMMEND_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, env = "APICOMP_GRAPH")]
    pub graph: Option<PathBuf>,
    #[arg(long, env = "APICOMP_SUPERGRAPH")]
    pub supergraph: Option<PathBuf>,
    #[arg(long, env = "APICOMP_EMBEDDINGS")]
    pub embeddings: Option<PathBuf>,
    #[arg(long, env = "APICOMP_QUERIES")]
    pub queries: Option<PathBuf>,
    /// Records file supplying ground truth for precision.
    #[arg(long, env = "APICOMP_RECORDS")]
    pub records: Option<PathBuf>,
    #[command(flatten)]
    pub select: SelectArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Compare discovery at these granularities instead of the full pipeline.
    #[arg(long, env = "APICOMP_ABLATION", value_delimiter = ',')]
    pub ablation: Option<Vec<usize>>,
    /// Also report metrics at each of these lambdas.
    #[arg(long, env = "APICOMP_SWEEP", value_delimiter = ',')]
    pub sweep: Option<Vec<f64>>,
    /// Run queries concurrently; timings then overlap.
    #[arg(long, env = "APICOMP_PARALLEL")]
    pub parallel: bool,
    #[arg(long, env = "APICOMP_REPORT")]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, env = "APICOMP_SYNTH_APIS", default_value_t = 2000)]
    pub apis: usize,
    #[arg(long, env = "APICOMP_SYNTH_EDGES", default_value_t = 10000)]
    pub edges: usize,
    #[arg(long, env = "APICOMP_SYNTH_COMMUNITIES")]
    pub communities: Option<usize>,
    #[arg(long, env = "APICOMP_SEED")]
    pub seed: Option<u64>,
    /// Directory receiving catalog.txt, records.txt and queries.txt.
    #[arg(long, env = "APICOMP_SYNTH_OUT")]
    pub out_dir: PathBuf,
}
