//! End-to-end checks of the command-line driver.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_multirail"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("reading {name}: {e}"))
}

#[test]
fn sweep_produces_comparison_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "sweep",
        "--topology",
        "2d_sw_sw",
        "--topology",
        "3d_sw_sw_sw_homo",
        "--topology",
        "3d_sw_sw_sw_hetero",
        "--topology",
        "3d_fc_ring_sw",
        "--topology",
        "4d_ring_sw_sw_sw",
        "--topology",
        "4d_ring_fc_ring_sw",
        "--mode",
        "baseline,dynamic-fifo,dynamic-scf",
        "--size",
        "100MB",
        "--size",
        "250MB",
        "--size",
        "500MB",
        "--size",
        "1GB",
        "--cpc",
        "16",
        "--concurrency",
        "0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let summary = read(dir.path(), "sweep_summary.csv");
    let mut lines = summary.lines();
    assert!(lines.next().unwrap().starts_with("# config:"));
    assert!(lines.next().unwrap().starts_with("topology,mode,"));
    // Six topologies x four sizes x three modes.
    assert_eq!(lines.count(), 72);
    let per_dim = read(dir.path(), "sweep_per_dim.csv");
    assert!(per_dim.contains("4d_ring_fc_ring_sw,dynamic-scf"));
}

#[test]
fn sweep_is_deterministic_across_runs() {
    let run_once = || {
        let dir = tempfile::tempdir().unwrap();
        let out = run(&[
            "sweep",
            "--topology",
            "3d_sw_sw_sw_hetero",
            "--mode",
            "dynamic-scf",
            "--size",
            "100MB",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success());
        read(dir.path(), "sweep_summary.csv")
    };
    assert_eq!(run_once(), run_once());
}

#[test]
fn sensitivity_covers_cpc_list() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "sensitivity",
        "--topology",
        "3d_sw_sw_sw_hetero",
        "--mode",
        "dynamic-scf",
        "--size",
        "100MB",
        "--cpc-list",
        "1,4,8",
        "--concurrency",
        "0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let body = read(dir.path(), "sensitivity.csv");
    // One data row per cpc value, including the degenerate serial cpc=1.
    assert_eq!(
        body.lines()
            .filter(|l| l.starts_with("3d_sw_sw_sw_hetero,"))
            .count(),
        3
    );
    assert!(body.contains("3d_sw_sw_sw_hetero,dynamic-scf,1,"));
}

#[test]
fn oracle_reports_baseline_dynamic_and_optimal() {
    let dir = tempfile::tempdir().unwrap();
    // Tiny 2x2 fabric from a config file.
    let topo = dir.path().join("tiny.json");
    fs::write(
        &topo,
        r#"[{"size": 4, "kind": "ring", "bw_per_link_gbps": 16, "links_per_npu": 1, "step_latency_ns": 0},
           {"size": 4, "kind": "ring", "bw_per_link_gbps": 8, "links_per_npu": 1, "step_latency_ns": 0}]"#,
    )
    .unwrap();
    let out = run(&[
        "oracle",
        "--topology",
        topo.to_str().unwrap(),
        "--size",
        "256MB",
        "--cpc",
        "4",
        "--policy",
        "scf",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("baseline"), "{stdout}");
    assert!(stdout.contains("optimal"), "{stdout}");
    let report = read(dir.path(), "oracle_tiny.csv");
    // 2!^4 = 16 candidates plus header/comment/summary rows.
    assert_eq!(
        report
            .lines()
            .filter(|l| l.chars().next().is_some_and(char::is_numeric))
            .count(),
        16
    );
    assert!(report.contains("best,"));
    assert!(dir.path().join("oracle_tiny_best_schedules.csv").exists());
}

#[test]
fn provision_flags_over_provisioned_pair() {
    let dir = tempfile::tempdir().unwrap();
    let topo = dir.path().join("current.json");
    fs::write(
        &topo,
        r#"[{"size": 16, "kind": "switch", "bw_per_link_gbps": 1200, "links_per_npu": 1, "step_latency_ns": 700},
           {"size": 64, "kind": "switch", "bw_per_link_gbps": 100, "links_per_npu": 1, "step_latency_ns": 1700}]"#,
    )
    .unwrap();
    let out = run(&[
        "provision",
        "--topology",
        topo.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = read(dir.path(), "provision_current.csv");
    assert!(report.contains("1,2,0.75,over_provisioned"), "{report}");
}

#[test]
fn workload_decomposes_iteration_by_mode() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("tiny.csv");
    fs::write(
        &trace,
        "l0, 100, 100, 50, none, none, none, all_reduce, 50000000, all, blocking\n\
         l1, 100, 100, 50, none, none, none, all_reduce, 50000000, last:1, blocking\n",
    )
    .unwrap();
    let out = run(&[
        "workload",
        "--topology",
        "3d_sw_sw_sw_homo",
        "--mode",
        "all",
        "--trace",
        trace.to_str().unwrap(),
        "--concurrency",
        "0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = read(dir.path(), "workload_3d_sw_sw_sw_homo.csv");
    for mode in ["baseline", "dynamic-fifo", "dynamic-scf", "ideal"] {
        assert!(report.contains(&format!("\n{mode},")), "{report}");
    }
    let comms = read(dir.path(), "workload_3d_sw_sw_sw_homo_collectives.csv");
    assert!(
        comms.contains("l1,bwd,all_reduce,50000000,3-3,dp"),
        "{comms}"
    );
}

#[test]
fn errors_exit_nonzero_with_diagnostics() {
    let out = run(&["sweep", "--topology", "no_such_preset"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("neither a preset"), "{err}");

    let out = run(&["sweep", "--topology", "2d_sw_sw", "--mode", "bogus"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown mode"));

    let out = run(&["sweep", "--topology", "2d_sw_sw", "--size", "0MB"]);
    assert!(!out.status.success());

    let out = run(&["workload", "--trace", "/definitely/not/here.csv"]);
    assert!(!out.status.success());
}
