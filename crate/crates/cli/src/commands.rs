use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};

use apicomp::compress::{compress, SuperGraph, DEFAULT_GRANULARITY};
use apicomp::corpus::{
    format_catalog, format_queries, format_records, generate_queries, parse_catalog, parse_queries,
    parse_records, CatalogEntry, MashupRecord,
};
use apicomp::embedding::{train_embeddings, EmbeddingModel, EmbeddingParams};
use apicomp::eval::{
    format_ablation, format_sweep, lambda_sweep, run_ablation, run_benchmark, truth_sets, BenchConfig,
    BenchMode,
};
use apicomp::graph::{hash_bytes, AssociationGraph, KeywordMode};
use apicomp::recommend::{recommend, RecommendParams, SelectParams};
use apicomp::scoring::MmrParams;
use apicomp::steiner::{discover, SearchBudget, DEFAULT_MAX_CANDIDATES};
use apicomp::synth::{generate_corpus, CorpusConfig};

use crate::artifacts::{format_recommendation, CandidatesFile, RecommendationHeader};
use crate::cli::{
    BenchArgs, BuildArgs, Cli, Command, CompressArgs, EmbedArgs, IngestArgs, ModeArg, QueryArgs,
    RecommendArgs, SearchArgs, SelectArgs, SynthArgs,
};
use crate::config::{required, resolve_seed, PipelineConfig};

pub fn run(cli: Cli) -> Result<()> {
    let cfg = PipelineConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest(a) => ingest(a, &cfg),
        Command::Build(a) => build(a, &cfg),
        Command::Compress(a) => compress_cmd(a, &cfg),
        Command::Embed(a) => embed(a, &cfg),
        Command::Query(a) => query(a, &cfg),
        Command::Recommend(a) => recommend_cmd(a, &cfg),
        Command::Bench(a) => bench(a, &cfg),
        Command::Synth(a) => synth(a, &cfg),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn load_inputs(catalog: &Path, records: &Path) -> Result<(Vec<CatalogEntry>, Vec<MashupRecord>)> {
    let catalog = parse_catalog(catalog).with_context(|| format!("loading catalog {}", catalog.display()))?;
    let records = parse_records(records).with_context(|| format!("loading records {}", records.display()))?;
    Ok((catalog, records))
}

fn load_graph(path: &Path) -> Result<AssociationGraph> {
    let (g, _) = AssociationGraph::load(path).with_context(|| format!("loading graph {}", path.display()))?;
    Ok(g)
}

fn load_supergraph<'g>(g: &'g AssociationGraph, path: &Path) -> Result<SuperGraph<'g>> {
    SuperGraph::load(g, path).with_context(|| format!("loading supergraph {}", path.display()))
}

fn load_embeddings(g: &AssociationGraph, path: &Path) -> Result<EmbeddingModel> {
    let model = EmbeddingModel::load(path).with_context(|| format!("loading embeddings {}", path.display()))?;
    model.ensure_graph(g)?;
    Ok(model)
}

fn keyword_mode(arg: Option<ModeArg>, file: Option<ModeArg>) -> KeywordMode {
    match arg.or(file) {
        Some(ModeArg::AllCategories) => KeywordMode::AllCategories,
        Some(ModeArg::FunctionalOnly) | None => KeywordMode::FunctionalOnly,
    }
}

fn ingest(a: IngestArgs, cfg: &PipelineConfig) -> Result<()> {
    let catalog_path = required(a.catalog, cfg.catalog.clone(), "catalog")?;
    let records_path = required(a.records, cfg.records.clone(), "records")?;
    let (catalog, records) = load_inputs(&catalog_path, &records_path)?;
    // resolve every record now so later stages cannot fail on it
    AssociationGraph::build(&records, &catalog, KeywordMode::FunctionalOnly)?;
    println!("catalog: {} apis; records: {} mashups", catalog.len(), records.len());
    if let Some(out) = a.out {
        write(&out, &format_records(&records))?;
        println!("records written to {}", out.display());
    }
    if let Some(out) = a.queries_out {
        let queries = generate_queries(&records, &catalog, a.min_query_len, a.max_query_len)?;
        write(&out, &format_queries(&queries))?;
        println!("{} queries written to {}", queries.len(), out.display());
    }
    Ok(())
}

fn build(a: BuildArgs, cfg: &PipelineConfig) -> Result<()> {
    let catalog_path = required(a.catalog, cfg.catalog.clone(), "catalog")?;
    let records_path = required(a.records, cfg.records.clone(), "records")?;
    let mode = keyword_mode(a.keyword_mode, cfg.keyword_mode);
    let (catalog, records) = load_inputs(&catalog_path, &records_path)?;
    let g = AssociationGraph::build(&records, &catalog, mode)?;
    let mode_tag = format!("{mode:?}");
    let input_hash = hash_bytes(&[
        &read_bytes(&catalog_path)?,
        &read_bytes(&records_path)?,
        mode_tag.as_bytes(),
    ]);
    g.save(&a.out, &input_hash)
        .with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "graph {}: {} nodes, {} edges, {} keywords -> {}",
        g.content_hash(),
        g.node_count(),
        g.edge_count(),
        g.keyword_index().len(),
        a.out.display()
    );
    Ok(())
}

fn compress_cmd(a: CompressArgs, cfg: &PipelineConfig) -> Result<()> {
    let g = load_graph(&required(a.graph, cfg.graph.clone(), "graph")?)?;
    let p = a.granularity.or(cfg.granularity).unwrap_or(DEFAULT_GRANULARITY);
    let sg = compress(&g, p)?;
    sg.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "supergraph {}: {} supernodes, {} superedges (p={p}) -> {}",
        sg.content_hash(),
        sg.len(),
        sg.superedges().len(),
        a.out.display()
    );
    Ok(())
}

fn embed(a: EmbedArgs, cfg: &PipelineConfig) -> Result<()> {
    let g = load_graph(&required(a.graph, cfg.graph.clone(), "graph")?)?;
    let d = EmbeddingParams::default();
    let params = EmbeddingParams {
        dimension: a.dim.or(cfg.dimension).unwrap_or(d.dimension),
        walks_per_node: a.walks.or(cfg.walks).unwrap_or(d.walks_per_node),
        walk_length: a.walk_length.or(cfg.walk_length).unwrap_or(d.walk_length),
        window: a.window.or(cfg.window).unwrap_or(d.window),
        return_param: a.return_param.or(cfg.return_param).unwrap_or(d.return_param),
        inout_param: a.inout_param.or(cfg.inout_param).unwrap_or(d.inout_param),
        negative_samples: a.negative.or(cfg.negative).unwrap_or(d.negative_samples),
        epochs: a.epochs.or(cfg.epochs).unwrap_or(d.epochs),
        learning_rate: a.learning_rate.or(cfg.learning_rate).unwrap_or(d.learning_rate),
        seed: resolve_seed(a.seed, cfg.seed),
        parallel: a.parallel,
    };
    let model = train_embeddings(&g, &params)?;
    let out = if a.out.is_dir() {
        a.out.join(format!("{}.emb", g.content_hash()))
    } else {
        a.out
    };
    model.save(&out).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "embeddings: {} nodes x {} dims, seed {} -> {}",
        model.len(),
        model.dimension(),
        params.seed,
        out.display()
    );
    Ok(())
}

fn budget(search: &SearchArgs, cfg: &PipelineConfig) -> Result<(usize, SearchBudget)> {
    let d = SearchBudget::default();
    let secs = search.timeout_secs.or(cfg.timeout_secs).unwrap_or(d.wall_time.as_secs_f64());
    if !(secs.is_finite() && secs > 0.0) {
        bail!("--timeout-secs must be positive");
    }
    let candidates = search.candidates.or(cfg.candidates).unwrap_or(DEFAULT_MAX_CANDIDATES);
    Ok((
        candidates,
        SearchBudget {
            max_pops: search.max_pops.or(cfg.max_pops).unwrap_or(d.max_pops),
            wall_time: Duration::from_secs_f64(secs),
        },
    ))
}

fn query(a: QueryArgs, cfg: &PipelineConfig) -> Result<()> {
    let g = load_graph(&required(a.graph, cfg.graph.clone(), "graph")?)?;
    let sg = load_supergraph(&g, &required(a.supergraph, cfg.supergraph.clone(), "supergraph")?)?;
    let keywords: Vec<String> = a
        .keywords
        .iter()
        .map(|k| k.trim().to_owned())
        .filter(|k| !k.is_empty())
        .collect();
    let (max_candidates, budget) = budget(&a.search, cfg)?;
    let candidates = discover(&sg, &keywords, max_candidates, budget)?;
    let file = CandidatesFile {
        graph_hash: g.content_hash().to_owned(),
        supergraph_hash: sg.content_hash(),
        keywords,
        candidates,
    };
    write(&a.out, &file.to_text(&g))?;
    let smallest = file.candidates.iter().map(|c| c.size()).min();
    println!(
        "{} candidates (smallest size {}) -> {}",
        file.candidates.len(),
        smallest.map_or_else(|| "n/a".to_owned(), |s| s.to_string()),
        a.out.display()
    );
    Ok(())
}

fn select_params(s: &SelectArgs, cfg: &PipelineConfig) -> Result<(RecommendParams, Option<usize>)> {
    let d = RecommendParams::default();
    let k = s.k.or(cfg.k).unwrap_or(d.select.k);
    let lambda = s.lambda.or(cfg.lambda).unwrap_or(d.select.mmr.lambda());
    let clusters = match s.clusters.clone().or_else(|| cfg.clusters.clone()).as_deref() {
        None | Some("auto") => None,
        Some(n) => Some(
            n.parse::<usize>()
                .with_context(|| format!("--clusters expects a count or `auto`, got `{n}`"))?,
        ),
    };
    Ok((
        RecommendParams {
            select: SelectParams {
                k,
                mmr: MmrParams::new(lambda)?,
                max_swap_passes: s.swap_passes.or(cfg.swap_passes).unwrap_or(d.select.max_swap_passes),
            },
            k_clusters: clusters,
            kmeans_iters: s.kmeans_iters.or(cfg.kmeans_iters).unwrap_or(d.kmeans_iters),
        },
        clusters,
    ))
}

fn recommend_cmd(a: RecommendArgs, cfg: &PipelineConfig) -> Result<()> {
    let g = load_graph(&required(a.graph, cfg.graph.clone(), "graph")?)?;
    let emb_path = required(a.embeddings, cfg.embeddings.clone(), "embeddings")?;
    let model = load_embeddings(&g, &emb_path)?;
    let cand_bytes = read_bytes(&a.candidates_file)?;
    let cand_text = String::from_utf8(cand_bytes.clone()).context("candidates file is not UTF-8")?;
    let file = CandidatesFile::parse(&cand_text, &g)
        .with_context(|| format!("loading candidates {}", a.candidates_file.display()))?;
    let (params, _) = select_params(&a.select, cfg)?;
    let rec = recommend(&g, &model, &file.candidates, &params)?;
    let clusters = rec.matroid.k_clusters();
    let text = format_recommendation(
        &g,
        &RecommendationHeader {
            graph_hash: g.content_hash(),
            candidates_hash: &hash_bytes(&[&cand_bytes]),
            embeddings_hash: &hash_bytes(&[&read_bytes(&emb_path)?]),
            k: params.select.k,
            lambda: params.select.mmr.lambda(),
            clusters,
            swap_passes: params.select.max_swap_passes,
        },
        &file.candidates,
        &rec.items,
    );
    write(&a.out, &text)?;
    println!(
        "{} of {} candidates selected ({} clusters, {} swaps) -> {}",
        rec.items.len(),
        file.candidates.len(),
        clusters,
        rec.selection.swaps.len(),
        a.out.display()
    );
    Ok(())
}

fn sweep_path(report: &Path) -> PathBuf {
    let mut name = report.as_os_str().to_owned();
    name.push(".sweep");
    PathBuf::from(name)
}

fn bench(a: BenchArgs, cfg: &PipelineConfig) -> Result<()> {
    let g = load_graph(&required(a.graph, cfg.graph.clone(), "graph")?)?;
    let queries_path = required(a.queries, cfg.queries.clone(), "queries")?;
    let queries = parse_queries(&queries_path).with_context(|| format!("loading {}", queries_path.display()))?;
    if queries.is_empty() {
        bail!("{} holds no queries", queries_path.display());
    }
    let truths = match a.records.or(cfg.records.clone()) {
        Some(p) => truth_sets(&g, &parse_records(&p).with_context(|| format!("loading {}", p.display()))?),
        None => Default::default(),
    };
    let (max_candidates, budget) = budget(&a.search, cfg)?;
    let (params, clusters) = select_params(&a.select, cfg)?;
    let mut config = BenchConfig {
        mode: BenchMode::Full,
        k: params.select.k,
        lambda: params.select.mmr.lambda(),
        granularity: DEFAULT_GRANULARITY,
        max_candidates,
        k_clusters: clusters,
        kmeans_iters: params.kmeans_iters,
        swap_passes: params.select.max_swap_passes,
        max_pops: budget.max_pops,
        wall_time_secs: budget.wall_time.as_secs_f64(),
        seeds: Default::default(),
        parallel: a.parallel,
    };

    if let Some(ps) = a.ablation {
        if ps.is_empty() {
            bail!("--ablation needs at least one granularity");
        }
        let rows = run_ablation(&g, &ps, &queries, &config)?;
        let mut lines = String::new();
        for r in &rows {
            lines.push_str(&serde_json::to_string(r)?);
            lines.push('\n');
        }
        write(&a.report, &lines)?;
        print!("{}", format_ablation(&rows));
        return Ok(());
    }

    let sg = load_supergraph(&g, &required(a.supergraph, cfg.supergraph.clone(), "supergraph")?)?;
    config.granularity = sg.granularity();
    let model = load_embeddings(&g, &required(a.embeddings, cfg.embeddings.clone(), "embeddings")?)?;
    config.seeds.insert("embedding".to_owned(), model.params.seed);
    let (report, _) = run_benchmark(&g, &sg, Some(&model), &queries, &truths, &config)?;
    write(&a.report, &report.to_lines())?;
    print!("{}", report.to_table());
    if let Some(lambdas) = a.sweep {
        let rows = lambda_sweep(&g, &sg, &model, &queries, &truths, &config, &lambdas)?;
        let mut lines = String::new();
        for r in &rows {
            lines.push_str(&serde_json::to_string(r)?);
            lines.push('\n');
        }
        write(&sweep_path(&a.report), &lines)?;
        print!("{}", format_sweep(&rows));
    }
    println!("report -> {}", a.report.display());
    Ok(())
}

fn synth(a: SynthArgs, cfg: &PipelineConfig) -> Result<()> {
    let seed = resolve_seed(a.seed, cfg.seed);
    let mut corpus_cfg = CorpusConfig::new(a.apis, a.edges, seed);
    if let Some(c) = a.communities {
        corpus_cfg.communities = c;
    }
    let corpus = generate_corpus(&corpus_cfg);
    let queries = generate_queries(&corpus.records, &corpus.catalog, 3, 6)?;
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    write(&a.out_dir.join("catalog.txt"), &format_catalog(&corpus.catalog))?;
    write(&a.out_dir.join("records.txt"), &format_records(&corpus.records))?;
    write(&a.out_dir.join("queries.txt"), &format_queries(&queries))?;
    println!(
        "synthetic corpus (seed {seed}): {} apis, {} records, {} queries -> {}",
        corpus.catalog.len(),
        corpus.records.len(),
        queries.len(),
        a.out_dir.display()
    );
    Ok(())
}
