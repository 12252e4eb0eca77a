use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use apicomp::corpus::{format_catalog, format_records};
use apicomp::eval::BenchmarkReport;
use apicomp::fixtures::{example_catalog, example_records};

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("catalog.txt"), format_catalog(&example_catalog())).unwrap();
        std::fs::write(dir.path().join("records.txt"), format_records(&example_records())).unwrap();
        Workspace { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_apicomp"))
            .args(args)
            .current_dir(self.dir.path())
            .env_clear()
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    fn read(&self, name: &str) -> String {
        std::fs::read_to_string(self.path(name)).unwrap()
    }

    /// build, compress and embed the worked example at granularity `p`
    fn prepare(&self, p: &str) {
        self.ok(&[
            "build", "--catalog", "catalog.txt", "--records", "records.txt",
            "--keyword-mode", "all-categories", "--out", "g.json",
        ]);
        self.ok(&["compress", "--graph", "g.json", "--granularity", p, "--out", "sg.json"]);
        self.ok(&[
            "embed", "--graph", "g.json", "--dim", "8", "--walks", "4", "--walk-length", "10",
            "--epochs", "2", "--seed", "9", "--out", "e.emb",
        ]);
    }
}

fn covered(catalog: &Path, apis: &str) -> BTreeSet<String> {
    let text = std::fs::read_to_string(catalog).unwrap();
    let wanted: BTreeSet<&str> = apis.split(',').collect();
    text.lines()
        .filter_map(|l| l.split_once('|'))
        .filter(|(id, _)| wanted.contains(id.trim()))
        .flat_map(|(_, kws)| kws.split(',').map(|k| k.trim().to_owned()))
        .collect()
}

#[test]
fn worked_example_pipeline_covers_the_query() {
    for p in ["1", "4"] {
        let ws = Workspace::new();
        ws.prepare(p);
        ws.ok(&["query", "--graph", "g.json", "--supergraph", "sg.json", "--keywords", "k1,k2,k9", "--out", "c.txt"]);
        ws.ok(&[
            "recommend", "--graph", "g.json", "--embeddings", "e.emb", "--candidates", "c.txt",
            "--k", "2", "--clusters", "2", "--out", "r.txt",
        ]);
        let rec = ws.read("r.txt");
        let rows: Vec<&str> = rec.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows.len(), 2, "{rec}");
        for row in rows {
            let apis = row.split('|').nth(1).unwrap().trim();
            let kws = covered(&ws.path("catalog.txt"), apis);
            for k in ["k1", "k2", "k9"] {
                assert!(kws.contains(k), "p={p}: {apis} misses {k}");
            }
        }
    }
}

#[test]
fn module_errors_exit_1_and_usage_errors_exit_2() {
    let ws = Workspace::new();
    ws.prepare("1");
    let out = ws.run(&["query", "--graph", "g.json", "--supergraph", "sg.json", "--keywords", "k1,nowhere", "--out", "c.txt"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere"));

    ws.ok(&["query", "--graph", "g.json", "--supergraph", "sg.json", "--keywords", "k1,k2,k9", "--out", "c.txt"]);
    let out = ws.run(&[
        "recommend", "--graph", "g.json", "--embeddings", "e.emb", "--candidates", "c.txt", "--k", "5", "--out", "r.txt",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));

    assert_eq!(ws.run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(ws.run(&["query", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(ws.run(&["--help"]).status.code(), Some(0));
}

#[test]
fn reruns_with_fixed_seeds_are_byte_identical() {
    let a = Workspace::new();
    let b = Workspace::new();
    for ws in [&a, &b] {
        ws.prepare("4");
        ws.ok(&["query", "--graph", "g.json", "--supergraph", "sg.json", "--keywords", "k1,k2,k9", "--out", "c.txt"]);
        ws.ok(&[
            "recommend", "--graph", "g.json", "--embeddings", "e.emb", "--candidates", "c.txt",
            "--k", "2", "--clusters", "2", "--out", "r.txt",
        ]);
    }
    for f in ["g.json", "sg.json", "e.emb", "c.txt", "r.txt"] {
        assert_eq!(a.read(f), b.read(f), "{f} differs");
    }
}

#[test]
fn mismatched_artifacts_are_refused() {
    let ws = Workspace::new();
    ws.prepare("1");
    // a graph from fewer records has a different hash
    std::fs::write(ws.path("records2.txt"), format_records(&example_records()[..7])).unwrap();
    ws.ok(&["build", "--catalog", "catalog.txt", "--records", "records2.txt", "--out", "g2.json"]);
    let sg = ws.run(&["query", "--graph", "g2.json", "--supergraph", "sg.json", "--keywords", "k1", "--out", "c.txt"]);
    assert_eq!(sg.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&sg.stderr).contains("graph"));

    ws.ok(&["query", "--graph", "g.json", "--supergraph", "sg.json", "--keywords", "k1,k2,k9", "--out", "c.txt"]);
    let emb = ws.run(&["recommend", "--graph", "g2.json", "--embeddings", "e.emb", "--candidates", "c.txt", "--out", "r.txt"]);
    assert_eq!(emb.status.code(), Some(1));

    let mut tampered = ws.read("g.json");
    tampered = tampered.replacen("\"times_used\":6", "\"times_used\":7", 1);
    std::fs::write(ws.path("g3.json"), tampered).unwrap();
    assert_eq!(ws.run(&["compress", "--graph", "g3.json", "--out", "x.json"]).status.code(), Some(1));
}

#[test]
fn embed_into_directory_uses_graph_hash_and_records_random_seed() {
    let ws = Workspace::new();
    ws.ok(&["build", "--catalog", "catalog.txt", "--records", "records.txt", "--out", "g.json"]);
    std::fs::create_dir(ws.path("emb")).unwrap();
    let out = ws.run(&["embed", "--graph", "g.json", "--dim", "4", "--walks", "2", "--walk-length", "5", "--epochs", "1", "--out", "emb"]);
    assert!(out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let seed: u64 = stderr
        .split_whitespace()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or_else(|| panic!("no seed reported: {stderr}"));
    let graph: serde_json::Value = serde_json::from_str(&ws.read("g.json")).unwrap();
    let hash = graph["content_hash"].as_str().unwrap();
    let emb = ws.read(&format!("emb/{hash}.emb"));
    assert!(emb.lines().any(|l| l == format!("seed {seed}")), "{emb}");
}

#[test]
fn flags_override_environment_and_config() {
    let ws = Workspace::new();
    ws.prepare("1");
    ws.ok(&["query", "--graph", "g.json", "--supergraph", "sg.json", "--keywords", "k1,k2,k9", "--out", "c.txt"]);
    std::fs::write(ws.path("cfg.toml"), "graph = \"g.json\"\nembeddings = \"e.emb\"\nk = 1\nlambda = 0.9\n").unwrap();
    ws.ok(&["--config", "cfg.toml", "recommend", "--candidates", "c.txt", "--out", "a.txt"]);
    assert!(ws.read("a.txt").contains("# k 1 lambda 0.9"));
    ws.ok(&["--config", "cfg.toml", "recommend", "--candidates", "c.txt", "--lambda", "0.2", "--out", "b.txt"]);
    assert!(ws.read("b.txt").contains("# k 1 lambda 0.2"));
    let out = Command::new(env!("CARGO_BIN_EXE_apicomp"))
        .args(["--config", "cfg.toml", "recommend", "--candidates", "c.txt", "--out", "e.txt"])
        .current_dir(ws.dir.path())
        .env_clear()
        .env("APICOMP_LAMBDA", "0.4")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(ws.read("e.txt").contains("# k 1 lambda 0.4"));
    std::fs::write(ws.path("bad.toml"), "lamda = 0.2\n").unwrap();
    assert_eq!(ws.run(&["--config", "bad.toml", "recommend", "--candidates", "c.txt", "--out", "f.txt"]).status.code(), Some(1));
}

#[test]
fn bench_report_round_trips() {
    let ws = Workspace::new();
    ws.ok(&["synth", "--apis", "120", "--edges", "400", "--seed", "5", "--out-dir", "s"]);
    ws.ok(&["build", "--catalog", "s/catalog.txt", "--records", "s/records.txt", "--out", "g.json"]);
    ws.ok(&["compress", "--graph", "g.json", "--out", "sg.json"]);
    ws.ok(&["embed", "--graph", "g.json", "--dim", "8", "--walks", "4", "--walk-length", "10", "--epochs", "1", "--seed", "3", "--out", "e.emb"]);
    let queries = ws.read("s/queries.txt");
    std::fs::write(ws.path("q.txt"), queries.lines().take(12).collect::<Vec<_>>().join("\n")).unwrap();
    let bench = [
        "bench", "--graph", "g.json", "--supergraph", "sg.json", "--embeddings", "e.emb",
        "--queries", "q.txt", "--records", "s/records.txt", "--k", "3", "--candidates", "40",
    ];
    let table = ws.ok(&[&bench[..], &["--report", "r1.jsonl", "--sweep", "0.3,0.7"]].concat());
    assert!(table.contains("MID") && table.contains("lambda"));
    ws.ok(&[&bench[..], &["--report", "r2.jsonl"]].concat());
    let a = BenchmarkReport::from_lines(&ws.read("r1.jsonl")).unwrap();
    let b = BenchmarkReport::from_lines(&ws.read("r2.jsonl")).unwrap();
    assert_eq!(BenchmarkReport::from_lines(&a.to_lines()).unwrap(), a);
    assert_eq!(a.without_timing(), b.without_timing());
    assert_eq!(a.config.seeds.get("embedding"), Some(&3));
    assert_eq!(ws.read("r1.jsonl.sweep").lines().count(), 2);

    ws.ok(&["bench", "--graph", "g.json", "--queries", "q.txt", "--candidates", "20", "--ablation", "1,4", "--report", "ab.jsonl"]);
    assert_eq!(ws.read("ab.jsonl").lines().count(), 2);
}
