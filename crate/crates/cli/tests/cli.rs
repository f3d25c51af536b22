use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &[&str] = &["--n-per", "120", "--k", "10", "--sigma-c", "0.5", "--kmeans-replicates", "10"];

fn rmmsl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmmsl")).args(args).output().unwrap()
}

fn error_record(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    serde_json::from_str(stderr.trim()).unwrap_or_else(|e| panic!("not a JSON record ({e}): {stderr}"))
}

fn ok(out: Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "status {:?}: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_then_cluster_the_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("spheres.csv");
    let summary = ok(rmmsl(&[
        "generate",
        "--generator",
        "nested_spheres",
        "--n-per",
        "120",
        "--seed",
        "3",
        "--out",
        s(&csv),
    ]));
    assert_eq!(summary["points"], 240);
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("x0,x1,x2,label"));
    assert_eq!(text.lines().count(), 241);

    let out = tmp.path().join("run");
    let summary = ok(rmmsl(&[
        "cluster",
        "--input",
        s(&csv),
        "--has-labels",
        "--header",
        "--k",
        "10",
        "--kmeans-replicates",
        "10",
        "--out",
        s(&out),
    ]));
    assert_eq!(summary["trials"], 1);
    assert!(summary["summary"]["rand_summary"]["mean"].as_f64().unwrap() > 0.95);
    assert_eq!(fs::read_to_string(out.join("labels_000.csv")).unwrap().lines().count(), 241);
}

#[test]
fn cluster_twice_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let dirs = [tmp.path().join("a"), tmp.path().join("b")];
    for d in &dirs {
        let mut args = vec!["cluster", "--generator", "intersecting_spheres", "--outlier", "ratio:0.05", "--out", s(d)];
        args.extend(SMALL);
        ok(rmmsl(&args));
    }
    for name in ["config.txt", "metrics.json", "labels_000.csv", "scores_000.csv", "points_000.csv"] {
        assert_eq!(fs::read(dirs[0].join(name)).unwrap(), fs::read(dirs[1].join(name)).unwrap(), "{name}");
    }
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.txt");
    fs::write(&cfg, "generator = nested_spheres\nn_per = 120\nk = 12\nsigma_c = 2\nkmeans_replicates = 5\n").unwrap();
    let out = tmp.path().join("run");
    ok(rmmsl(&["cluster", "--config", s(&cfg), "--k", "9", "--seed", "4", "--out", s(&out)]));
    let resolved = fs::read_to_string(out.join("config.txt")).unwrap();
    for line in ["generator = nested_spheres", "n_per = 120", "k = 9", "sigma_c = 2.0", "seed = 4"] {
        assert!(resolved.lines().any(|l| l == line), "{line} missing from\n{resolved}");
    }

    // The resolved config reproduces the run.
    let again = tmp.path().join("again");
    ok(rmmsl(&["cluster", "--config", s(&out.join("config.txt")), "--out", s(&again)]));
    assert_eq!(
        fs::read(out.join("labels_000.csv")).unwrap(),
        fs::read(again.join("labels_000.csv")).unwrap()
    );

    // Switching the generator drops the file's generator parameters.
    let planes = tmp.path().join("planes");
    ok(rmmsl(&["cluster", "--config", s(&cfg), "--generator", "intersecting_planes", "--n-per", "100", "--out", s(&planes)]));
    let resolved = fs::read_to_string(planes.join("config.txt")).unwrap();
    assert!(resolved.contains("generator = intersecting_planes") && !resolved.contains("r_small"));
}

#[test]
fn sweep_and_export() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep");
    let mut args = vec![
        "sweep",
        "--generator",
        "nested_spheres",
        "--n-per",
        "100",
        "--k",
        "8,12",
        "--sigma-c",
        "1",
        "--kmeans-replicates",
        "5",
        "--selection-trials",
        "2",
        "--evaluation-trials",
        "2",
        "--out",
    ];
    args.push(s(&out));
    let summary = ok(rmmsl(&args));
    assert!(summary["chosen"]["k"].is_u64());
    for name in ["sweep.json", "sweep.txt", "chosen.txt"] {
        assert!(out.join(name).exists(), "{name}");
    }

    let run = tmp.path().join("run");
    ok(rmmsl(&["cluster", "--config", s(&out.join("chosen.txt")), "--trials", "1", "--outlier", "auto", "--out", s(&run)]));
    let plots = tmp.path().join("plots");
    let summary = ok(rmmsl(&["export", "--run", s(&run), "--out", s(&plots)]));
    assert_eq!(summary["written"].as_array().unwrap().len(), 2);
    assert!(plots.join("plot_scores.csv").exists());
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.txt");
    fs::write(&cfg, "bogus = 1\n").unwrap();
    let out = rmmsl(&["cluster", "--config", s(&cfg), "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    let rec = error_record(&out);
    assert_eq!(rec["error"], "Config");
    assert_eq!(rec["class"], "config");
    assert!(rec["message"].as_str().unwrap().contains("bogus"));

    let out = rmmsl(&["cluster", "--alpha", "cubic", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    let out = rmmsl(&["cluster", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["error"], "Usage");
    let out = rmmsl(&["sweep", "--k", "5", "--out", s(tmp.path()), "--input", s(&cfg), "--trials", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numeric_failures_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("dup.csv");
    let mut rows: String = (0..20).map(|i| format!("{}.0,{}.5,0.0\n", i % 5, i / 5)).collect();
    rows.push_str("0.0,0.5,0.0\n");
    fs::write(&csv, rows).unwrap();
    let out = rmmsl(&["cluster", "--input", s(&csv), "--k", "4", "--kmeans-replicates", "2", "--out", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(3));
    let rec = error_record(&out);
    assert_eq!(rec["class"], "numeric");
    assert_eq!(rec["error"], "DuplicatePoints");
}

#[test]
fn io_failures_exit_4() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.csv");
    let out = rmmsl(&["cluster", "--input", s(&missing), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(4));
    let rec = error_record(&out);
    assert_eq!(rec["class"], "io");
    assert!(rec["message"].as_str().unwrap().contains("missing.csv"));

    let out = rmmsl(&["export", "--run", s(tmp.path()), "--out", s(&tmp.path().join("p"))]);
    assert_eq!(out.status.code(), Some(4));

    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "1,2\n3,oops\n").unwrap();
    let out = rmmsl(&["cluster", "--input", s(&bad), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(4));
}
