//! End-to-end tests driving the `mnasfpn` binary.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mnasfpn"))
}

fn run_ok(args: &[&str], dir: &Path) -> String {
    let out = bin().args(args).current_dir(dir).output().expect("spawn");
    assert!(
        out.status.success(),
        "`mnasfpn {}` failed:\nstdout: {}\nstderr: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf8 stdout")
}

fn run_raw(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().expect("spawn")
}

#[test]
fn cardinality_prints_exact_value_and_quoted_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_ok(&["cardinality", "--space", "mnasfpn"], dir.path());
    assert!(out.contains("186615424657489896730672496640000"), "{out}");
    assert!(out.contains("quoted estimate"), "{out}");

    let lite = run_ok(&["cardinality", "--space", "nas-fpnlite-s"], dir.path());
    assert!(lite.contains("39158192264970240000"), "{lite}");
}

#[test]
fn verify_sdo_passes_the_default_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_ok(&["verify-sdo", "--grid", "default"], dir.path());
    assert!(out.starts_with("PASS"), "{out}");
    assert!(out.contains("504"), "{out}");
}

#[test]
fn sample_is_deterministic_and_schema_sized() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_ok(&["sample", "--space", "conn-search", "--seed", "5", "--count", "4"], dir.path());
    let b = run_ok(&["sample", "--space", "conn-search", "--seed", "5", "--count", "4"], dir.path());
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 4);
    // conn-search genomes carry 42 tokens.
    assert!(a.lines().all(|l| l.split_whitespace().count() == 42), "{a}");
}

/// The full batch workflow: synth a table, search, recompute the frontier,
/// select at targets, sweep repeats, export, cost.
#[test]
fn batch_workflow_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();

    run_ok(
        &["lut", "synth", "--space", "mnasfpn", "--out", "lut.txt", "--noise", "0.1", "--lut-seed", "3"],
        p,
    );
    assert!(p.join("lut.txt").exists());
    assert!(p.join("lut.txt.manifest.json").exists(), "lut synth writes a manifest");

    let search_out = run_ok(
        &[
            "search", "--space", "mnasfpn", "--budget", "50", "--batch-size", "10",
            "--controller", "policy-gradient", "--seed", "42", "--w", "-0.3",
            "--lut", "lut.txt", "--history", "run.jsonl",
        ],
        p,
    );
    assert!(search_out.contains("evaluated 50 candidates"), "{search_out}");
    assert!(p.join("run.jsonl.manifest.json").exists(), "search writes a manifest");
    let history = std::fs::read_to_string(p.join("run.jsonl")).unwrap();
    assert_eq!(history.lines().count(), 50);

    let frontier = run_ok(&["frontier", "--history", "run.jsonl"], p);
    assert!(frontier.starts_with("latency_ms\tquality\treward\tstep\tgenome"), "{frontier}");
    assert!(frontier.lines().count() >= 2);

    let select = run_ok(&["select", "--history", "run.jsonl", "--targets", "1,150,100000"], p);
    let lines: Vec<&str> = select.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("1\t-"), "no candidate at 1 ms: {select}");
    assert!(!lines[3].starts_with("100000\t-"), "everything qualifies at 100 s: {select}");

    let sweep = run_ok(
        &[
            "sweep-repeats", "--space", "mnasfpn", "--history", "run.jsonl",
            "--targets", "100000", "--repeats", "3,4,5", "--lut", "lut.txt", "--seed", "42",
        ],
        p,
    );
    assert_eq!(sweep.lines().count(), 1 + 3, "one base x three repeat counts: {sweep}");

    run_ok(
        &["sample", "--space", "mnasfpn", "--seed", "0", "--count", "2", "--out", "g.txt"],
        p,
    );
    let text = run_ok(
        &["export", "--space", "mnasfpn", "--genome-file", "g.txt", "--format", "text"],
        p,
    );
    assert!(text.starts_with("format graph-v1"), "{text}");
    let dot = run_ok(
        &["export", "--space", "mnasfpn", "--genome-file", "g.txt", "--format", "dot"],
        p,
    );
    assert!(dot.starts_with("digraph"), "{dot}");

    let cost = run_ok(
        &["cost", "--space", "mnasfpn", "--genome-file", "g.txt", "--index", "1", "--lut", "lut.txt"],
        p,
    );
    assert!(cost.contains("total:"), "{cost}");
    let summary = run_ok(&["cost", "--space", "mnasfpn", "--genome-file", "g.txt"], p);
    assert!(summary.starts_with("genome\tmadds\tparams"), "{summary}");
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn search_is_deterministic_and_resumable_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    run_ok(&["lut", "synth", "--space", "no-expand", "--out", "lut.txt"], p);

    let args = |history: &str| {
        [
            "search", "--space", "no-expand", "--budget", "30", "--batch-size", "10",
            "--controller", "random", "--seed", "7", "--lut", "lut.txt", "--history", history,
        ]
        .map(String::from)
    };
    run_ok(&args("a.jsonl").iter().map(|s| s.as_str()).collect::<Vec<_>>(), p);
    run_ok(&args("b.jsonl").iter().map(|s| s.as_str()).collect::<Vec<_>>(), p);
    let a = std::fs::read(p.join("a.jsonl")).unwrap();
    assert_eq!(a, std::fs::read(p.join("b.jsonl")).unwrap(), "same seed, same bytes");

    // Reproduce run `a` from its manifest into a fresh history file.
    let manifest = std::fs::read_to_string(p.join("a.jsonl.manifest.json"))
        .unwrap()
        .replace("a.jsonl", "c.jsonl");
    std::fs::write(p.join("m.json"), manifest).unwrap();
    run_ok(&["search", "--from-manifest", "m.json"], p);
    assert_eq!(a, std::fs::read(p.join("c.jsonl")).unwrap(), "manifest must reproduce the run");
}

#[test]
fn exit_codes_distinguish_usage_and_domain_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();

    // Unknown flag: usage error, exit 2 with clap's diagnostic.
    let usage = run_raw(&["cardinality", "--no-such-flag"], p);
    assert_eq!(usage.status.code(), Some(2), "{usage:?}");

    // Unknown subcommand: usage error as well.
    let unknown = run_raw(&["transmogrify"], p);
    assert_eq!(unknown.status.code(), Some(2));

    // Domain error: exit 1 with a diagnostic on stderr.
    let domain = run_raw(&["cardinality", "--space", "bogus"], p);
    assert_eq!(domain.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&domain.stderr);
    assert!(stderr.contains("neither a preset"), "{stderr}");

    // Missing LUT entry class: searching with an empty table aborts.
    std::fs::write(p.join("empty.txt"), "overhead_ms 100\n").unwrap();
    let miss = run_raw(
        &[
            "search", "--space", "mnasfpn", "--budget", "10", "--batch-size", "5",
            "--seed", "1", "--lut", "empty.txt", "--history", "h.jsonl",
        ],
        p,
    );
    assert_eq!(miss.status.code(), Some(1));
    assert!(
        String::from_utf8_lossy(&miss.stderr).contains("latency table has no entry"),
        "{:?}",
        miss
    );
}

#[test]
fn custom_space_files_work_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    // Dump a preset, tweak it, and use the file as a custom space.
    let space_json = serde_json::json!({
        "name": "tiny-custom",
        "kernel_choices": [3, 5],
        "channel_choices": [32, 64],
        "expansion_choices": [64, 128],
        "sdo_enabled": true,
        "max_in_degree": 2,
        "internal_block_budget": 5,
        "merge_op_choices": ["sum"],
        "resolution_choice_count": 4,
        "flavor": "residual-pruning"
    });
    std::fs::write(p.join("tiny.json"), space_json.to_string()).unwrap();

    let card = run_ok(&["cardinality", "--space", "tiny.json"], p);
    assert!(card.contains("space: tiny-custom"), "{card}");

    run_ok(&["lut", "synth", "--space", "tiny.json", "--out", "lut.txt"], p);
    let out = run_ok(
        &[
            "search", "--space", "tiny.json", "--budget", "20", "--batch-size", "10",
            "--controller", "evolution", "--seed", "3", "--lut", "lut.txt",
            "--history", "h.jsonl",
        ],
        p,
    );
    assert!(out.contains("evaluated 20 candidates"), "{out}");
}
