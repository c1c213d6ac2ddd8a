// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use curveprobe_core::activation::{ActivationLog, AttentionRecord, MaReport};
use curveprobe_core::graph::parse_graphs;
use curveprobe_core::io::{parse_jsonl, write_jsonl};
use curveprobe_core::Graph;
use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_curveprobe"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn curveprobe")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "curveprobe {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn graphs_at(path: &Path) -> Vec<Graph> {
    parse_graphs(&fs::read(path).unwrap()[..]).unwrap()
}

/// Logs in the trainer's layout: every node attends to itself and its
/// neighbours in 3 layers with 2 heads; bridge directions get large weights.
fn write_logs(graphs: &[Graph], path: &Path) {
    let logs: Vec<ActivationLog> = graphs
        .iter()
        .map(|g| {
            let mut records = Vec::new();
            for layer in 0..3 {
                for head in 0..2 {
                    for v in 0..g.num_nodes() {
                        let mut targets = vec![v];
                        targets.extend_from_slice(g.neighbors(v));
                        for &u in &targets {
                            let bridge = (v, u) == (3, 4) || (v, u) == (4, 3);
                            let jitter = ((layer + head + v + u) % 5) as f64 * 0.01;
                            records.push(AttentionRecord {
                                layer,
                                head,
                                src: v,
                                dst: u,
                                weight: if bridge { 50.0 } else { 1.0 + jitter },
                            });
                        }
                    }
                }
            }
            ActivationLog {
                graph_id: g.id().to_owned(),
                model: "toy".into(),
                records,
            }
        })
        .collect();
    let mut f = fs::File::create(path).unwrap();
    write_jsonl(&mut f, &logs).unwrap();
}

struct Fixture {
    dir: TempDir,
    graphs: PathBuf,
    logs: PathBuf,
    out: PathBuf,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&[
        "gen-barbell",
        "--variant",
        "standard",
        "--n-train",
        "4",
        "--n-test",
        "2",
        "--seed",
        "7",
        "--out-dir",
        p(&data),
    ]);
    let graphs = data.join("train.jsonl");
    let logs = dir.path().join("acts.jsonl");
    write_logs(&graphs_at(&graphs), &logs);
    let out = dir.path().join("out");
    Fixture {
        graphs,
        logs,
        out,
        dir,
    }
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn gen_barbell_writes_splits_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "gen-barbell",
        "--variant",
        "standard",
        "--n-train",
        "3",
        "--n-test",
        "2",
        "--out-dir",
        p(dir.path()),
    ]);
    let train = graphs_at(&dir.path().join("train.jsonl"));
    let test = graphs_at(&dir.path().join("test.jsonl"));
    assert_eq!((train.len(), test.len()), (3, 2));
    assert_eq!((train[0].num_nodes(), train[0].num_edges()), (8, 13));
    let m = manifest(dir.path());
    let run = &m["runs"]["train.jsonl"];
    assert_eq!(run["command"], "gen-barbell");
    assert_eq!(run["config"]["n_train"], 3);
    assert_eq!(run["outputs"], json!(["train.jsonl", "test.jsonl"]));
    let names: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(names.len(), 3);
}

#[test]
fn curvature_output_shape() {
    let f = fixture();
    let bfc = f.out.join("bfc.jsonl");
    ok(&["curvature", "--graphs", p(&f.graphs), "--out", p(&bfc)]);
    let records: Vec<Value> = parse_jsonl(&fs::read(&bfc).unwrap()[..]).unwrap();
    assert_eq!(records.len(), 4);
    let r = &records[0];
    let keys: Vec<&str> = r.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(
        keys,
        [
            "bfc",
            "edges",
            "graph_id",
            "negative_fraction",
            "weighted_mean"
        ]
    );
    let edges = r["edges"].as_array().unwrap();
    let bridge = edges.iter().position(|e| e == &json!([3, 4])).unwrap();
    assert_eq!(r["bfc"][bridge], json!(-1.0));
    assert_eq!(r["negative_fraction"], json!(1.0 / 13.0));
    let csv = fs::read_to_string(f.out.join("bfc.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("graph_id,i,j,bfc"));
    assert_eq!(csv.lines().count(), 1 + 4 * 13);

    let digest = manifest(&f.out)["runs"]["bfc.jsonl"]["inputs"][p(&f.graphs)].clone();
    assert!(digest.as_str().unwrap().starts_with("sha256:"));
}

#[test]
fn full_pipeline() {
    let f = fixture();
    let bfc = f.out.join("bfc.jsonl");
    let ma = f.out.join("ma.jsonl");
    ok(&["curvature", "--graphs", p(&f.graphs), "--out", p(&bfc)]);
    ok(&[
        "ma",
        "--logs",
        p(&f.logs),
        "--graphs",
        p(&f.graphs),
        "--percentile",
        "95",
        "--median-scope",
        "layer_head",
        "--out",
        p(&ma),
    ]);

    let reports: Vec<MaReport> = parse_jsonl(&fs::read(&ma).unwrap()[..]).unwrap();
    assert_eq!(reports.len(), 4);
    for r in &reports {
        let flagged: Vec<(usize, usize)> = r.flagged().map(|e| (e.src, e.dst)).collect();
        assert_eq!(flagged, [(3, 4), (4, 3)]);
    }
    let hops: Value =
        serde_json::from_slice(&fs::read(f.out.join("ma_hops.json")).unwrap()).unwrap();
    assert_eq!(hops["by_hop"]["1"], 8);

    ok(&[
        "enrich",
        "--ma",
        p(&ma),
        "--bfc",
        p(&bfc),
        "--binning",
        "exact",
        "--logs",
        p(&f.logs),
        "--out",
        p(&f.out.join("enrich.json")),
    ]);
    let enrich: Value =
        serde_json::from_slice(&fs::read(f.out.join("enrich.json")).unwrap()).unwrap();
    assert_eq!(enrich["total_edges"], 52);
    assert_eq!(enrich["total_ma_edges"], 4);
    let negative = enrich["entries"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["curvature_value"] == json!(-1.0))
        .unwrap();
    assert_eq!(negative["enrichment"], json!(13.0));
    assert_eq!(
        enrich["layer_evolution"]["rows"].as_array().unwrap().len(),
        1
    );
    assert!(f.out.join("enrich_layers.csv").exists());

    ok(&[
        "collapse",
        "--graphs",
        p(&f.graphs),
        "--logs",
        p(&f.logs),
        "--theta",
        "1.0",
        "--agg",
        "mean",
        "--out",
        p(&f.out.join("collapse.jsonl")),
    ]);
    assert!(f.out.join("collapse_aggregate.json").exists());

    let pruned = f.dir.path().join("pruned").join("g_pruneA.jsonl");
    ok(&[
        "prune",
        "--graphs",
        p(&f.graphs),
        "--ma",
        p(&ma),
        "--bfc",
        p(&bfc),
        "--set",
        "A",
        "--out",
        p(&pruned),
    ]);
    for g in graphs_at(&pruned) {
        assert!(g.id().ends_with("__prune_A"));
        assert_eq!((g.num_nodes(), g.num_edges()), (8, 12));
        assert_eq!(g.hop_distance(0, 5).unwrap(), None);
    }
    let sets: Value =
        serde_json::from_slice(&fs::read(pruned.with_file_name("g_pruneA_sets.json")).unwrap())
            .unwrap();
    assert_eq!(sets["set_a"].as_array().unwrap().len(), 4);

    let report_out = ok(&["report", "--dir", p(&f.out)]);
    assert!(report_out.stderr.is_empty());
    let report: Value =
        serde_json::from_slice(&fs::read(f.out.join("report.json")).unwrap()).unwrap();
    let graphs = report["graphs"].as_array().unwrap();
    assert_eq!(graphs.len(), 4);
    for g in graphs {
        assert_eq!(g["curvature"]["num_edges"], 13);
        assert_eq!(g["ma"]["flagged_pairs"], 2);
        assert!(g["collapse"]["static_spectral_gap"].as_f64().unwrap() > 0.0);
    }
    assert_eq!(report["enrichment"]["total_ma_edges"], 4);
    assert!(report["collapse_aggregate"].is_object());

    // One manifest for the whole directory, one entry per primary output.
    let m = manifest(&f.out);
    let keys: Vec<&str> = m["runs"]
        .as_object()
        .unwrap()
        .keys()
        .map(String::as_str)
        .collect();
    assert_eq!(
        keys,
        [
            "bfc.jsonl",
            "collapse.jsonl",
            "enrich.json",
            "ma.jsonl",
            "report.json"
        ]
    );
}

#[test]
fn delta_loss_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, v: Value| {
        let path = dir.path().join(name);
        fs::write(&path, v.to_string()).unwrap();
        path
    };
    let base = write("base.json", json!({"variant": "baseline", "loss": 0.51}));
    let pa = write("pa.json", json!({"variant": "prune_A", "loss": 0.6224}));
    let pb = write(
        "pb.json",
        json!({"variant": "prune_B", "loss": 0.5253, "per_graph": [{"graph_id": "g", "loss": 0.5}]}),
    );
    let out = dir.path().join("t").join("table.json");
    ok(&[
        "delta-loss",
        "--baseline",
        p(&base),
        "--variants",
        p(&pa),
        p(&pb),
        "--out",
        p(&out),
    ]);
    let table: Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(table["rows"][0]["delta"], json!(0.1124));
    assert_eq!(table["rows"][1]["delta"], json!(0.0153));
    assert_eq!(table["rows"][0]["variant"], "prune_A");
    let csv = fs::read_to_string(out.with_extension("csv")).unwrap();
    assert!(csv.contains("prune_A,0.6224,0.1124,"));
}

#[test]
fn outputs_are_deterministic() {
    let f = fixture();
    for jobs in ["1", "3"] {
        let dir = f.dir.path().join(format!("run{jobs}"));
        ok(&[
            "--jobs",
            jobs,
            "curvature",
            "--graphs",
            p(&f.graphs),
            "--out",
            p(&dir.join("bfc.jsonl")),
        ]);
        ok(&[
            "ma",
            "--jobs",
            jobs,
            "--logs",
            p(&f.logs),
            "--graphs",
            p(&f.graphs),
            "--out",
            p(&dir.join("ma.jsonl")),
        ]);
        ok(&[
            "collapse",
            "--graphs",
            p(&f.graphs),
            "--logs",
            p(&f.logs),
            "--out",
            p(&dir.join("collapse.jsonl")),
        ]);
    }
    for name in [
        "bfc.jsonl",
        "bfc.csv",
        "ma.jsonl",
        "ma.csv",
        "collapse.jsonl",
        "collapse_aggregate.json",
    ] {
        let a = fs::read(f.dir.path().join("run1").join(name)).unwrap();
        let b = fs::read(f.dir.path().join("run3").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }

    let a = f.dir.path().join("a");
    let b = f.dir.path().join("b");
    for d in [&a, &b] {
        ok(&[
            "gen-barbell",
            "--variant",
            "extended",
            "--mode",
            "permuted",
            "--n-train",
            "5",
            "--n-test",
            "1",
            "--seed",
            "11",
            "--out-dir",
            p(d),
        ]);
    }
    assert_eq!(
        fs::read(a.join("train.jsonl")).unwrap(),
        fs::read(b.join("train.jsonl")).unwrap()
    );
}

#[test]
fn config_file_and_flag_precedence() {
    let f = fixture();
    let config = f.dir.path().join("config.json");
    fs::write(
        &config,
        json!({"seed": 5, "ma": {"percentile": 99.5, "median-scope": "layer"}}).to_string(),
    )
    .unwrap();
    let ma = f.out.join("ma.jsonl");
    ok(&[
        "--config",
        p(&config),
        "ma",
        "--logs",
        p(&f.logs),
        "--graphs",
        p(&f.graphs),
        "--out",
        p(&ma),
    ]);
    let reports: Vec<MaReport> = parse_jsonl(&fs::read(&ma).unwrap()[..]).unwrap();
    assert_eq!(reports[0].threshold_percentile, 99.5);
    let cfg = &manifest(&f.out)["runs"]["ma.jsonl"]["config"];
    assert_eq!(cfg["median_scope"], "layer");
    assert_eq!(cfg["seed"], 5);

    ok(&[
        "--config",
        p(&config),
        "ma",
        "--percentile",
        "90",
        "--logs",
        p(&f.logs),
        "--graphs",
        p(&f.graphs),
        "--out",
        p(&ma),
    ]);
    let reports: Vec<MaReport> = parse_jsonl(&fs::read(&ma).unwrap()[..]).unwrap();
    assert_eq!(reports[0].threshold_percentile, 90.0);

    // Paths can come from the config too.
    fs::write(
        &config,
        json!({"curvature": {"graphs": p(&f.graphs), "out": p(&f.out.join("c.jsonl"))}})
            .to_string(),
    )
    .unwrap();
    ok(&["curvature", "--config", p(&config)]);
    assert!(f.out.join("c.jsonl").exists());

    fs::write(&config, json!({"ma": {"percentel": 90}}).to_string()).unwrap();
    let out = run(&[
        "--config",
        p(&config),
        "ma",
        "--logs",
        p(&f.logs),
        "--graphs",
        p(&f.graphs),
        "--out",
        p(&ma),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("percentel"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.jsonl");

    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["curvature", "--frobnicate"]).status.code(), Some(64));
    assert_eq!(run(&["wat"]).status.code(), Some(64));
    assert_eq!(
        run(&["ma", "--median-scope", "global"]).status.code(),
        Some(64)
    );
    let missing_flag = run(&["curvature", "--out", p(&out)]);
    assert_eq!(missing_flag.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&missing_flag.stderr).contains("--graphs"));

    let missing = dir.path().join("absent.jsonl");
    let res = run(&["curvature", "--graphs", p(&missing), "--out", p(&out)]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains(p(&missing)));

    let bad = dir.path().join("bad.jsonl");
    fs::write(
        &bad,
        "{\"graph_id\":\"g\",\"num_nodes\":2,\"edges\":[[0,5]]}\n",
    )
    .unwrap();
    assert_eq!(
        run(&["curvature", "--graphs", p(&bad), "--out", p(&out)])
            .status
            .code(),
        Some(1)
    );
    assert!(!out.exists(), "no output after a validation error");
    assert!(!dir.path().join("manifest.json").exists());

    // Spectral gap beyond the dense solver's bound is a capability error.
    let star = dir.path().join("star.jsonl");
    let edges: Vec<[usize; 2]> = (1..=2048).map(|v| [0, v]).collect();
    fs::write(
        &star,
        json!({"graph_id": "star", "num_nodes": 2049, "edges": edges}).to_string(),
    )
    .unwrap();
    assert_eq!(
        run(&["spectral", "--graphs", p(&star), "--out", p(&out)])
            .status
            .code(),
        Some(2)
    );

    assert_eq!(
        run(&["report", "--dir", p(dir.path())]).status.code(),
        Some(1)
    );
}

#[test]
fn spectral_and_prune_variants() {
    let f = fixture();
    let spec = f.out.join("spectral.jsonl");
    ok(&[
        "spectral",
        "--graphs",
        p(&f.graphs),
        "--laplacian",
        "unnormalized",
        "--out",
        p(&spec),
    ]);
    let rows: Vec<Value> = parse_jsonl(&fs::read(&spec).unwrap()[..]).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows[0]["spectral_gap"].as_f64().unwrap() > 0.0);

    let bfc = f.out.join("bfc.jsonl");
    let ma = f.out.join("ma.jsonl");
    ok(&["curvature", "--graphs", p(&f.graphs), "--out", p(&bfc)]);
    ok(&[
        "ma",
        "--logs",
        p(&f.logs),
        "--graphs",
        p(&f.graphs),
        "--out",
        p(&ma),
    ]);
    // Nothing flagged has positive curvature, so set B leaves graphs intact.
    let pruned = f.out.join("pruneB.jsonl");
    ok(&[
        "prune",
        "--graphs",
        p(&f.graphs),
        "--ma",
        p(&ma),
        "--bfc",
        p(&bfc),
        "--set",
        "B",
        "--out",
        p(&pruned),
    ]);
    let original = graphs_at(&f.graphs);
    for (a, b) in original.iter().zip(graphs_at(&pruned)) {
        assert_eq!(a.edges(), b.edges());
        assert_eq!(b.id(), format!("{}__prune_B", a.id()));
    }
}
