//! End-to-end checks of the `codiff` binary: exit codes, determinism, and
//! the full generate -> simulate -> learn -> eval pipeline.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_codiff"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn codiff")
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("codiff-cli-test").join(name);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn write_capacities(path: &Path, n: usize, capacity: u64) {
    let mut text = String::from("node_id,capacity\n");
    for i in 0..n {
        text.push_str(&format!("{i},{capacity}\n"));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn help_covers_every_subcommand() {
    let top = run(&["--help"]);
    assert!(top.status.success());
    for sub in [
        "generate",
        "layered",
        "simulate",
        "simulate-layered",
        "learn",
        "learn-layered",
        "eval",
        "flow-fit",
        "flow-em",
        "experiment",
        "ingest-regions",
    ] {
        let out = run(&[sub, "--help"]);
        assert!(out.status.success(), "{sub} --help failed");
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(
            String::from_utf8_lossy(&top.stdout).contains(sub),
            "{sub} missing from top-level help"
        );
        assert!(text.contains("--"), "{sub} help lists no flags");
    }
}

#[test]
fn usage_errors_exit_1() {
    let out = run(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(1));

    // parameter validation failures are usage errors too
    let dir = tmp_dir("usage");
    let out = run(&[
        "generate",
        "--nodes",
        "1",
        "--out",
        &path_str(&dir.join("net.json")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_input_file_exits_2_and_names_the_path() {
    let dir = tmp_dir("missing");
    let caps = dir.join("caps.csv");
    write_capacities(&caps, 3, 10);
    let out = run(&[
        "learn",
        "--traces",
        &path_str(&dir.join("nope.csv")),
        "--capacities",
        &path_str(&caps),
        "--out",
        &path_str(&dir.join("out.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("nope.csv"), "stderr: {stderr}");
}

#[test]
fn generate_is_byte_deterministic() {
    let dir = tmp_dir("determinism");
    let a = dir.join("a.json");
    let b = dir.join("b.json");
    for out in [&a, &b] {
        let res = run(&[
            "generate",
            "--nodes",
            "40",
            "--seed",
            "7",
            "--out",
            &path_str(out),
        ]);
        assert!(res.status.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn pipeline_generate_simulate_learn_eval() {
    let dir = tmp_dir("pipeline");
    let net = dir.join("net.json");
    let traces = dir.join("traces.csv");
    let caps = dir.join("caps.csv");
    let inferred = dir.join("inferred.json");
    let diagnostics = dir.join("diag.csv");
    let metrics = dir.join("metrics.csv");

    assert!(run(&[
        "generate",
        "--nodes",
        "30",
        "--capacity",
        "200",
        "--seed",
        "11",
        "--out",
        &path_str(&net)
    ])
    .status
    .success());
    assert!(run(&[
        "simulate",
        "--net",
        &path_str(&net),
        "--cascades",
        "150",
        "--seed-level-min",
        "3",
        "--seed-level-max",
        "10",
        "--seed",
        "5",
        "--out",
        &path_str(&traces)
    ])
    .status
    .success());
    write_capacities(&caps, 30, 200);
    assert!(run(&[
        "learn",
        "--traces",
        &path_str(&traces),
        "--capacities",
        &path_str(&caps),
        "--rho",
        "1.0",
        "--out",
        &path_str(&inferred),
        "--diagnostics",
        &path_str(&diagnostics)
    ])
    .status
    .success());
    let out = run(&[
        "eval",
        "--truth",
        &path_str(&net),
        "--inferred",
        &path_str(&inferred),
        "--run-id",
        "3",
        "--cascades",
        "150",
        "--out",
        &path_str(&metrics),
    ]);
    assert!(out.status.success());

    let metrics_text = fs::read_to_string(&metrics).unwrap();
    let mut lines = metrics_text.lines();
    assert_eq!(
        lines.next(),
        Some("run_id,cascades,precision,recall,f1,error_percent")
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "3");
    assert_eq!(row[1], "150");
    let precision: f64 = row[2].parse().unwrap();
    let recall: f64 = row[3].parse().unwrap();
    assert!((0.0..=1.0).contains(&precision));
    assert!((0.0..=1.0).contains(&recall));
    assert!(recall >= 0.5, "pipeline recovered too little: {row:?}");

    let diag_text = fs::read_to_string(&diagnostics).unwrap();
    assert!(diag_text.starts_with("node_id,objective,iterations,grad_norm,converged,"));
    assert_eq!(diag_text.lines().count(), 31);
}

#[test]
fn explicit_seed_file_pins_the_seed_set() {
    let dir = tmp_dir("seed-file");
    let net = dir.join("net.json");
    let seeds = dir.join("seeds.csv");
    let traces = dir.join("traces.csv");
    assert!(run(&[
        "generate",
        "--nodes",
        "12",
        "--capacity",
        "50",
        "--seed",
        "4",
        "--out",
        &path_str(&net)
    ])
    .status
    .success());
    // level 0 rows mean "not a seed"
    let mut text = String::from("node_id,level\n");
    for i in 0..12 {
        text.push_str(&format!("{i},{}\n", if i == 3 { 7 } else { 0 }));
    }
    fs::write(&seeds, text).unwrap();
    assert!(run(&[
        "simulate",
        "--net",
        &path_str(&net),
        "--cascades",
        "5",
        "--seeds-file",
        &path_str(&seeds),
        "--seed",
        "1",
        "--out",
        &path_str(&traces)
    ])
    .status
    .success());
    let trace_text = fs::read_to_string(&traces).unwrap();
    for id in 0..5 {
        assert!(
            trace_text.contains(&format!("{id},3,0,7")),
            "cascade {id} missing the pinned seed: {trace_text}"
        );
    }
}

#[test]
fn eval_writes_metrics_to_stdout_by_default() {
    let dir = tmp_dir("eval-stdout");
    let net = dir.join("net.json");
    assert!(run(&[
        "generate", "--nodes", "15", "--seed", "6", "--out", &path_str(&net)
    ])
    .status
    .success());
    let out = run(&[
        "eval",
        "--truth",
        &path_str(&net),
        "--inferred",
        &path_str(&net),
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    let mut lines = stdout.lines();
    assert_eq!(
        lines.next(),
        Some("run_id,cascades,precision,recall,f1,error_percent")
    );
    // a network compared against itself scores perfectly
    assert_eq!(lines.next(), Some("0,0,1.000000,1.000000,1.000000,0.000000"));
}

#[test]
fn layered_expansion_writes_a_network_file() {
    let dir = tmp_dir("layered");
    let base = dir.join("base.json");
    let expanded = dir.join("expanded.json");
    assert!(run(&[
        "generate",
        "--nodes",
        "10",
        "--seed",
        "2",
        "--out",
        &path_str(&base)
    ])
    .status
    .success());
    let out = run(&[
        "layered",
        "--net",
        &path_str(&base),
        "--horizon",
        "3",
        "--out",
        &path_str(&expanded),
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(&expanded).unwrap();
    assert!(text.contains("\"layered\": true"));
}

#[test]
fn layered_roundtrip_through_region_files() {
    let dir = tmp_dir("regions");
    let base = dir.join("base.json");
    let caps = dir.join("caps.csv");
    let initial = dir.join("initial.csv");
    let regions = dir.join("regions.csv");
    let layers = dir.join("layers.csv");
    let learned = dir.join("learned.json");

    // 2-region fully connected base with self-loops
    fs::write(
        &base,
        r#"{
  "layered": true,
  "nodes": [{"id": 0, "capacity": 500}, {"id": 1, "capacity": 500}],
  "edges": [
    {"src": 0, "dst": 0, "p": 0.002},
    {"src": 0, "dst": 1, "p": 0.0008},
    {"src": 1, "dst": 0, "p": 0.0005},
    {"src": 1, "dst": 1, "p": 0.0015}
  ]
}
"#,
    )
    .unwrap();
    write_capacities(&caps, 2, 500);
    fs::write(&initial, "node_id,level\n0,40\n1,5\n").unwrap();

    assert!(run(&[
        "simulate-layered",
        "--net",
        &path_str(&base),
        "--horizon",
        "20",
        "--initial",
        &path_str(&initial),
        "--seed",
        "9",
        "--out",
        &path_str(&regions)
    ])
    .status
    .success());

    let out = run(&[
        "ingest-regions",
        "--regions",
        &path_str(&regions),
        "--capacities",
        &path_str(&caps),
        "--out",
        &path_str(&layers),
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(&layers).unwrap();
    assert!(text.starts_with("layer,node_id,level\n"));
    assert_eq!(text.lines().count(), 1 + 21 * 2);

    assert!(run(&[
        "learn-layered",
        "--regions",
        &path_str(&regions),
        "--capacities",
        &path_str(&caps),
        "--out",
        &path_str(&learned)
    ])
    .status
    .success());
    assert!(learned.exists());
}

#[test]
fn region_gap_is_a_data_error() {
    let dir = tmp_dir("region-gap");
    let caps = dir.join("caps.csv");
    write_capacities(&caps, 1, 100);
    let regions = dir.join("regions.csv");
    fs::write(&regions, "region_id,week,count\n0,40,3\n0,42,4\n").unwrap();
    let out = run(&[
        "ingest-regions",
        "--regions",
        &path_str(&regions),
        "--capacities",
        &path_str(&caps),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flow_fit_and_em() {
    let dir = tmp_dir("flow");
    let complete = dir.join("complete.json");
    let margins = dir.join("margins.json");
    let turns = dir.join("turns.json");

    fs::write(
        &complete,
        r#"{
  "outflows": [{"id": 0, "count": 4}, {"id": 1, "count": 4}],
  "inflows": [{"id": 0, "count": 5}, {"id": 1, "count": 3}],
  "adjacency": [
    {"src": 0, "dsts": [0, 1]},
    {"src": 1, "dsts": [0, 1]}
  ],
  "table": [
    {"src": 0, "dst": 0, "count": 3},
    {"src": 0, "dst": 1, "count": 1},
    {"src": 1, "dst": 0, "count": 2},
    {"src": 1, "dst": 1, "count": 2}
  ]
}
"#,
    )
    .unwrap();
    let out = run(&[
        "flow-fit",
        "--instances",
        &path_str(&complete),
        "--out",
        &path_str(&turns),
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(&turns).unwrap();
    assert!(text.contains("\"p\": 0.75"), "{text}");

    // margins-only file: flow-fit refuses, flow-em works
    fs::write(
        &margins,
        r#"{
  "outflows": [{"id": 0, "count": 4}, {"id": 1, "count": 4}],
  "inflows": [{"id": 0, "count": 5}, {"id": 1, "count": 3}],
  "adjacency": [
    {"src": 0, "dsts": [0, 1]},
    {"src": 1, "dsts": [0, 1]}
  ]
}
"#,
    )
    .unwrap();
    let out = run(&[
        "flow-fit",
        "--instances",
        &path_str(&margins),
        "--out",
        &path_str(&turns),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let turns_em = dir.join("turns_em.json");
    let out = run(&[
        "flow-em",
        "--instances",
        &path_str(&margins),
        "--out",
        &path_str(&turns_em),
    ]);
    assert!(out.status.success());
    assert!(turns_em.exists());
}

#[test]
fn experiment_writes_report_files() {
    let dir = tmp_dir("experiment");
    let config = dir.join("bench.json");
    fs::write(
        &config,
        r#"{
  "network_sizes": [10],
  "cascade_counts": [5, 10],
  "runs": 2,
  "capacity": 20,
  "seed_level_range": [2, 5],
  "seed_fraction": 0.2,
  "master_seed": 3
}
"#,
    )
    .unwrap();
    let out_dir = dir.join("report");
    let out = run(&[
        "experiment",
        "--config",
        &path_str(&config),
        "--out-dir",
        &path_str(&out_dir),
    ]);
    assert!(out.status.success());
    for name in [
        "runs.csv",
        "aggregate.csv",
        "plotdata_precision.csv",
        "plotdata_recall.csv",
        "plotdata_f1.csv",
        "plotdata_error_percent.csv",
    ] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
    let runs = fs::read_to_string(out_dir.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 2 * 2); // header + counts x runs
}

#[test]
fn threads_flag_is_accepted() {
    let dir = tmp_dir("threads");
    let out = run(&[
        "generate",
        "--nodes",
        "12",
        "--threads",
        "1",
        "--seed",
        "1",
        "--out",
        &path_str(&dir.join("net.json")),
    ]);
    assert!(out.status.success());
}
