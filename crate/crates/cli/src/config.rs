use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::Deserialize;

use crate::cli::ModeArg;

/// Values read from the `--config` file; any field may be omitted.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub records: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub graph: Option<PathBuf>,
    pub supergraph: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub keyword_mode: Option<ModeArg>,
    pub granularity: Option<usize>,
    pub dimension: Option<usize>,
    pub walks: Option<usize>,
    pub walk_length: Option<usize>,
    pub window: Option<usize>,
    pub epochs: Option<usize>,
    pub negative: Option<usize>,
    pub return_param: Option<f64>,
    pub inout_param: Option<f64>,
    pub learning_rate: Option<f64>,
    pub lambda: Option<f64>,
    pub k: Option<usize>,
    pub clusters: Option<String>,
    pub swap_passes: Option<usize>,
    pub kmeans_iters: Option<usize>,
    pub candidates: Option<usize>,
    pub timeout_secs: Option<f64>,
    pub max_pops: Option<u64>,
    pub seed: Option<u64>,
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// First present value, or an error naming the missing flag.
pub fn required<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T> {
    flag.or(file)
        .ok_or_else(|| anyhow!("--{name} is required (flag, APICOMP_* variable or config file)"))
}

/// Uses `seed` when given, otherwise draws one and reports it on stderr.
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> u64 {
    flag.or(file).unwrap_or_else(|| {
        let seed = rand::random::<u32>() as u64;
        eprintln!("seed: {seed} (randomly chosen; pass --seed {seed} to reproduce)");
        seed
    })
}
