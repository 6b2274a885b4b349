use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdl-bench"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_then_fit() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("shards");
    let out = bench(&[
        "simulate",
        "--n",
        "2000",
        "--p",
        "3",
        "--shards",
        "4",
        "--seed",
        "7",
        "--out",
        path(&data),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let files = fs::read_dir(&data).unwrap().count();
    assert_eq!(files, 4);

    for method in ["mdl", "mdl-ce", "naive-dc", "oracle"] {
        let out = bench(&[
            "fit",
            "--data",
            path(&data),
            "--method",
            method,
            "--q",
            "3",
            "--c0",
            "2",
        ]);
        assert!(
            out.status.success(),
            "{method}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let text = stdout(&out);
        assert!(text.contains(&format!("method    {method}")), "{text}");
        let estimate = text.lines().find(|l| l.starts_with("estimate")).unwrap();
        assert_eq!(estimate.split_whitespace().count(), 1 + 4);
    }

    let out = bench(&[
        "fit",
        "--data",
        path(&data),
        "--method",
        "oracle",
        "--ci",
        "e1",
    ]);
    assert!(out.status.success());
    let out = bench(&["fit", "--data", path(&data), "--ci", "1,2"]);
    assert!(!out.status.success());
}

#[test]
fn simulate_with_random_features() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("rff");
    let out = bench(&[
        "simulate",
        "--n",
        "600",
        "--p",
        "2",
        "--shards",
        "3",
        "--rff",
        "16,1.5",
        "--out",
        path(&data),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).contains("p = 16"));
}

#[test]
fn fit_on_missing_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = bench(&["fit", "--data", path(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no shard files"));
}

#[test]
fn experiment_writes_rows_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.cfg");
    fs::write(
        &cfg,
        "# small grid\nn = 600\np = 2\nm = 200\nq = 1, 2\nreps = 3\n",
    )
    .unwrap();
    let csv = dir.path().join("rows.csv");
    let out = bench(&[
        "experiment",
        "l2-vs-q",
        "--config",
        path(&cfg),
        "--set",
        "methods=mdl,oracle",
        "--out",
        path(&csv),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let rows = fs::read_to_string(&csv).unwrap();
    let mut lines = rows.lines();
    assert_eq!(
        lines.next().unwrap(),
        "method,n,p,m,q,c0,rep,l2_error,v0_proj,ci_lo,ci_hi,covered,wall_ms,msgs,bytes,error"
    );
    assert_eq!(lines.count(), 2 * 2 * 3);
    let summary = fs::read_to_string(dir.path().join("rows.csv.summary.csv")).unwrap();
    assert!(summary.starts_with("method,"));
    assert_eq!(summary.lines().count(), 1 + 2 * 2);
}

#[test]
fn experiment_with_failed_runs_exits_2() {
    let out = bench(&[
        "experiment",
        "coverage",
        "--reps",
        "2",
        "--set",
        "n=600",
        "--set",
        "p=2",
        "--set",
        "m=200",
        "--set",
        "q=2",
        "--set",
        "c0=1e-9",
        "--set",
        "methods=mdl",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("2 of 2 runs failed"));
    assert!(stdout(&out).contains("singular"));
}

#[test]
fn experiment_rejects_unknown_keys_and_kinds() {
    let out = bench(&["experiment", "coverage", "--set", "bogus=1"]);
    assert_eq!(out.status.code(), Some(1));
    let out = bench(&["experiment", "nonsense"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn loss_curve_csv() {
    let out = bench(&[
        "loss-curve",
        "--h",
        "1",
        "--lo",
        "-2",
        "--hi",
        "2",
        "--points",
        "5",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "h,u,smoothed_hinge,hinge");
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[1], "1,-2,0,0");
    assert_eq!(lines[5], "1,2,2,2");
}
