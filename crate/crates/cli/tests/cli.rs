mod common;

use std::fs;
use std::path::Path;

use common::{lonscape, parse_dot};
use lonscape::encodings::{random_genotype, Encoding};
use lonscape::rng::RngStream;
use lonscape::sampler::{RunCounters, RunLog, TrajectoryEntry};
use lonscape::Fitness;
use lonscape_cli::{read_lon, ExperimentConfig};

fn ok(out: std::process::Output) -> std::process::Output {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn quick_config(dir: &Path, encoding: &str) -> std::path::PathBuf {
    let path = dir.join(format!("{encoding}.json"));
    let cfg = format!(
        r#"{{"schema":1,"encoding":"{encoding}","runs":3,"ls_stall_budget":20,"run_stall_limit":5,"run_iteration_limit":10}}"#
    );
    fs::write(&path, cfg).unwrap();
    path
}

/// Three optima in one run, fitness 1 -> 2 -> 3.
fn write_chain_fixture(dir: &Path) {
    let mut rng = RngStream::new(0);
    let entries = (0..3)
        .map(|i| TrajectoryEntry {
            node_index: i,
            fitness: Fitness {
                value: (i + 1) as f64,
                killed: false,
            },
            genotype_hash: 0x100 + i as u64,
            phenotype_hash: 0x200 + i as u64,
            design_hash: 0x300 + i as u64,
            genotype: random_genotype(Encoding::Direct, &mut rng),
        })
        .collect();
    let log = RunLog {
        run_id: 0,
        encoding: Encoding::Direct,
        seed: 0,
        entries,
        transitions: vec![(0, 1), (1, 2)],
        counters: RunCounters {
            attempted_mutations: 10,
            accepted_mutations: 4,
            accepted_design_changes: 1,
            evaluations: 12,
            unique_designs: [1, 2, 3].into_iter().collect(),
        },
    };
    fs::create_dir_all(dir).unwrap();
    let mut buf = Vec::new();
    log.write_jsonl(&mut buf).unwrap();
    fs::write(dir.join("run-000.jsonl"), buf).unwrap();
}

#[test]
fn dot_checker_rejects_broken_input() {
    assert!(parse_dot("digraph g { a -> b; }").is_ok());
    assert!(parse_dot("digraph g { a -> ; }").is_err());
    assert!(parse_dot("digraph g { a [x=1 }").is_err());
    assert!(parse_dot("digraph g { a -> b").is_err());
    assert_eq!(
        parse_dot("digraph { \"a\\\"b\" -> c -> d [w=2]; }")
            .unwrap()
            .edges
            .len(),
        2
    );
}

#[test]
fn sample_writes_logs_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path(), "lsystem");
    ok(lonscape(
        &[
            "sample",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "logs",
            "--jobs",
            "2",
        ],
        tmp.path(),
    ));
    let mut names: Vec<String> = fs::read_dir(tmp.path().join("logs"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        ["manifest.json", "run-000.jsonl", "run-001.jsonl", "run-002.jsonl"]
    );

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("logs/manifest.json")).unwrap()).unwrap();
    let cfg_back: ExperimentConfig = serde_json::from_value(manifest["config"].clone()).unwrap();
    assert_eq!(manifest["config_digest"], cfg_back.digest());
    assert_eq!(cfg_back.runs, 3);
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path(), "lsystem");
    let args = [
        "sample",
        "--config",
        cfg.to_str().unwrap(),
        "--runs",
        "1",
        "--encoding",
        "direct",
        "--seed",
        "9",
        "--out",
        "o",
    ];
    ok(lonscape(&args, tmp.path()));
    let text = fs::read_to_string(tmp.path().join("o/run-000.jsonl")).unwrap();
    let header: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(header["encoding"], "direct");
    assert_eq!(header["seed"], 9);
    assert!(!tmp.path().join("o/run-001.jsonl").exists());
}

#[test]
fn same_seed_gives_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path(), "cppn");
    for (dir, jobs) in [("a", "1"), ("b", "3")] {
        ok(lonscape(
            &[
                "sample",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                dir,
                "--jobs",
                jobs,
            ],
            tmp.path(),
        ));
        ok(lonscape(&["build", dir], tmp.path()));
        ok(lonscape(
            &["metrics", &format!("{dir}/lon.json"), "--out", &format!("{dir}/m")],
            tmp.path(),
        ));
    }
    for f in [
        "run-000.jsonl",
        "run-002.jsonl",
        "lon.json",
        "m/lon_stats.csv",
        "m/run_stats.csv",
    ] {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = fs::read(tmp.path().join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs between executions");
    }
    // manifests differ only in the recorded output directory
    let digest = |d: &str| {
        let m: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(tmp.path().join(d).join("manifest.json")).unwrap()).unwrap();
        m["config_digest"].clone()
    };
    assert_eq!(digest("a"), digest("b"));
}

#[test]
fn chain_fixture_metrics_row() {
    let tmp = tempfile::tempdir().unwrap();
    write_chain_fixture(&tmp.path().join("chain"));
    ok(lonscape(&["build", "chain"], tmp.path()));
    ok(lonscape(&["metrics", "chain/lon.json", "--out", "m"], tmp.path()));
    let lon_stats = fs::read_to_string(tmp.path().join("m/lon_stats.csv")).unwrap();
    assert_eq!(
        lon_stats,
        "metric,direct\nnodes,3\nedges,2\ncomponents,1\npath length,1.333333\ndegree,1.333333\ninfeasible,0.000000\n"
    );
    let run_stats = fs::read_to_string(tmp.path().join("m/run_stats.csv")).unwrap();
    assert_eq!(
        run_stats,
        "metric,direct\nmutation acceptance,40.000000\ndesign acceptance,25.000000\nunique designs,3\nattempted mutations,10\n"
    );
}

#[test]
fn build_keeps_one_component_per_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path(), "direct");
    ok(lonscape(
        &["sample", "--config", cfg.to_str().unwrap(), "--out", "d"],
        tmp.path(),
    ));
    ok(lonscape(&["build", "d", "--out", "lon"], tmp.path()));
    let lon = read_lon(&tmp.path().join("lon/lon.json")).unwrap();
    let s = lonscape::lon::lon_summary(&lon);
    assert!(s.components <= 3);
    assert!(lon.monotonicity_violations().is_empty());
    assert_eq!(lon.provenance.config_digest.len(), 16);
}

#[test]
fn exports_are_well_formed() {
    let tmp = tempfile::tempdir().unwrap();
    let mut lon_args = Vec::new();
    for enc in ["direct", "lsystem"] {
        let cfg = quick_config(tmp.path(), enc);
        ok(lonscape(
            &["sample", "--config", cfg.to_str().unwrap(), "--out", enc],
            tmp.path(),
        ));
        ok(lonscape(&["build", enc], tmp.path()));
        lon_args.push(format!("{enc}/lon.json"));
    }
    let lon_refs: Vec<&str> = lon_args.iter().map(String::as_str).collect();

    let mut args = vec!["export", "--format", "dot", "--out", "x"];
    args.extend(&lon_refs);
    ok(lonscape(&args, tmp.path()));
    args[2] = "graphml";
    ok(lonscape(&args, tmp.path()));
    args[2] = "csv";
    ok(lonscape(&args, tmp.path()));

    let mut classes = std::collections::BTreeSet::new();
    for enc in ["direct", "lsystem"] {
        let lon = read_lon(&tmp.path().join(enc).join("lon.json")).unwrap();
        let dot = parse_dot(&fs::read_to_string(tmp.path().join(format!("x/{enc}.dot"))).unwrap()).unwrap();
        assert!(dot.directed);
        assert_eq!(dot.nodes.len(), lon.nodes.len());
        assert_eq!(dot.edges.len(), lon.edges.len());

        let xml = fs::read_to_string(tmp.path().join(format!("x/{enc}.graphml"))).unwrap();
        let doc = roxmltree::Document::parse(&xml).unwrap();
        let count = |tag: &str| doc.descendants().filter(|n| n.has_tag_name(tag)).count();
        assert_eq!(count("node"), lon.nodes.len());
        assert_eq!(count("edge"), lon.edges.len());
        for n in doc
            .descendants()
            .filter(|n| n.has_tag_name("data") && n.attribute("key") == Some("quartile_class"))
        {
            classes.insert(n.text().unwrap().to_string());
        }

        let nodes_csv = fs::read_to_string(tmp.path().join(format!("x/{enc}_nodes.csv"))).unwrap();
        assert_eq!(nodes_csv.lines().count(), lon.nodes.len() + 1);
    }
    // pooled quartiles put every class somewhere across the two networks
    assert_eq!(classes.into_iter().collect::<Vec<_>>(), ["high", "low", "mid"]);
}

#[test]
fn compare_writes_all_pairs() {
    let tmp = tempfile::tempdir().unwrap();
    for enc in ["direct", "lsystem", "cppn"] {
        let cfg = quick_config(tmp.path(), enc);
        ok(lonscape(
            &["sample", "--config", cfg.to_str().unwrap(), "--out", enc],
            tmp.path(),
        ));
        ok(lonscape(&["build", enc], tmp.path()));
    }
    ok(lonscape(
        &[
            "compare",
            "direct/lon.json",
            "lsystem/lon.json",
            "cppn/lon.json",
            "--out",
            "c",
        ],
        tmp.path(),
    ));
    let csv = fs::read_to_string(tmp.path().join("c/comparison.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 5 * 3);
    assert!(rows.iter().any(|r| r.starts_with("chain_length,direct,lsystem,3,3,")));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| lonscape(args, tmp.path()).status.code();

    fs::write(tmp.path().join("bad.json"), r#"{"schema":1,"runs":0}"#).unwrap();
    assert_eq!(code(&["sample", "--config", "bad.json"]), Some(2));
    fs::write(tmp.path().join("typo.json"), r#"{"schema":1,"rnus":3}"#).unwrap();
    assert_eq!(code(&["sample", "--config", "typo.json"]), Some(2));
    assert_eq!(code(&["sample", "--evaluator", "external", "--runs", "1"]), Some(2));
    assert_eq!(code(&["sample", "--encoding", "voxels"]), Some(2));

    assert_eq!(
        code(&[
            "sample",
            "--evaluator",
            "external",
            "--external-cmd",
            "exit 1",
            "--runs",
            "1",
            "--out",
            "e"
        ]),
        Some(3)
    );

    fs::write(tmp.path().join("future.json"), r#"{"schema":2}"#).unwrap();
    assert_eq!(code(&["sample", "--config", "future.json"]), Some(4));

    write_chain_fixture(&tmp.path().join("chain"));
    ok(lonscape(&["build", "chain"], tmp.path()));
    let lon = fs::read_to_string(tmp.path().join("chain/lon.json")).unwrap();
    fs::write(
        tmp.path().join("old.json"),
        lon.replacen("\"schema\": 1", "\"schema\": 7", 1),
    )
    .unwrap();
    assert_eq!(code(&["metrics", "old.json"]), Some(4));
    let log = fs::read_to_string(tmp.path().join("chain/run-000.jsonl")).unwrap();
    fs::create_dir(tmp.path().join("oldlogs")).unwrap();
    fs::write(
        tmp.path().join("oldlogs/run-000.jsonl"),
        log.replacen("\"schema\":1", "\"schema\":3", 1),
    )
    .unwrap();
    assert_eq!(code(&["build", "oldlogs"]), Some(4));

    assert_eq!(code(&["metrics", "chain/lon.json", "--out", "m"]), Some(0));
}
