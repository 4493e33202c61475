//! End-to-end runs of the `semigen` binary on bundled fixtures.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn semigen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semigen"))
        .args(args)
        .env_remove("SEMIGEN_TEMPLATE_DIR")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn gt_errors(v: &Value) -> (f64, f64, f64) {
    let e = &v["ground_truth_error"];
    (
        e["rotation_deg"].as_f64().unwrap(),
        e["translation"].as_f64().unwrap(),
        e["focal_rel"].as_f64().unwrap(),
    )
}

fn best_solution_error(v: &Value) -> (f64, f64, f64) {
    v["solutions"]
        .as_array()
        .unwrap()
        .iter()
        .map(gt_errors)
        .min_by(|a, b| (a.0 + a.2).total_cmp(&(b.0 + b.2)))
        .expect("at least one solution")
}

#[test]
fn solve_recovers_the_noiseless_ground_truth() {
    let input = fixture("h51f5_minimal.json");
    let v = json(&semigen(&["solve", "--input", input.to_str().unwrap(), "--solver", "h51f5"]));
    assert_eq!(v["solver"], "h51f5");
    let sols = v["solutions"].as_array().unwrap();
    assert!(!sols.is_empty() && sols.len() <= 9);
    for s in sols {
        assert!(s["max_relative_residual"].as_f64().unwrap() <= 1e-6);
        assert_eq!(s["R"].as_array().unwrap().len(), 9);
    }
    let (r, t, f) = best_solution_error(&v);
    assert!(r < 1e-6 && t < 1e-6 && f < 1e-6, "{r} {t} {f}");
}

#[test]
fn solve_with_a_generated_template_matches_the_default_backend() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let gen = semigen(&["templategen", "--problem", "h51f5", "--out", d]);
    assert!(gen.status.success(), "{}", String::from_utf8_lossy(&gen.stderr));
    assert!(dir.path().join("h51f5.json").exists());
    let input = fixture("h51f5_minimal.json");
    let input = input.to_str().unwrap();
    let auto = json(&semigen(&["solve", "--input", input, "--solver", "h51f5"]));
    let tmpl = json(&semigen(&[
        "--template-dir",
        d,
        "solve",
        "--input",
        input,
        "--solver",
        "h51f5",
        "--backend",
        "template",
    ]));
    assert_eq!(tmpl["backend"], "template");
    assert_eq!(auto["solutions"].as_array().unwrap().len(), tmpl["solutions"].as_array().unwrap().len());
    let (r, _, f) = best_solution_error(&tmpl);
    assert!(r < 1e-6 && f < 1e-6);

    let missing = semigen(&["solve", "--input", input, "--solver", "h51f5", "--backend", "template"]);
    assert!(!missing.status.success());
}

#[test]
fn malformed_input_exits_with_status_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"rig\": [").unwrap();
    let out = semigen(&["solve", "--input", bad.to_str().unwrap(), "--solver", "h51f5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());

    let wrong_shape = semigen(&["solve", "--input", fixture("h51f5_minimal.json").to_str().unwrap(), "--solver", "h13f"]);
    assert_eq!(wrong_shape.status.code(), Some(1));

    let missing = semigen(&["solve", "--input", "/nonexistent/file.json", "--solver", "h51f5"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn degenerate_input_exits_with_status_two() {
    let out = semigen(&["solve", "--input", fixture("h13f_collinear.json").to_str().unwrap(), "--solver", "h13f"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("collinear"));
}

#[test]
fn invalid_arguments_exit_with_status_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    for args in [
        vec!["bench", "--out", d, "--sigma3d", "-1"],
        vec!["bench", "--out", d, "--sigma2d", "nan"],
        vec!["bench", "--out", d, "--solvers", "p3p"],
        vec!["bench", "--out", d, "--motions", "diagonal"],
        vec!["solve", "--solver", "h51f5"],
        vec!["frobnicate"],
    ] {
        let out = semigen(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn bench_is_byte_identical_across_runs() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path().to_str().unwrap();
        let out = semigen(&[
            "--jobs", "1", "bench", "--scenes", "100", "--seed", "7", "--solvers", "h51f5,dlt-ap", "--out", d,
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let csv = std::fs::read(dir.path().join("bench.csv")).unwrap();
        let meta = std::fs::read(dir.path().join("bench_meta.json")).unwrap();
        (csv, meta)
    };
    let (csv, meta) = run();
    assert_eq!((csv.clone(), meta.clone()), run());
    let text = String::from_utf8(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "solver,motion,sigma3d_pct,sigma2d_px,metric,q25,median,q75,fail_rate,n");
    // 3 motions x 4 noise levels x 2 solvers x 3 metrics.
    assert_eq!(lines.len(), 1 + 3 * 4 * 2 * 3);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 10 && l.ends_with(",100")));
    let meta: Value = serde_json::from_slice(&meta).unwrap();
    assert!(meta.is_object());
}

#[test]
fn ransac_recovers_the_pose_despite_outliers() {
    let input = fixture("ransac_outliers.json");
    let args = [
        "--jobs",
        "1",
        "ransac",
        "--input",
        input.to_str().unwrap(),
        "--seed",
        "1",
        "--max-iterations",
        "50",
    ];
    let first = semigen(&args);
    let v = json(&first);
    let (r, t, _) = gt_errors(&v);
    assert!(r <= 1.0 && t <= 0.5, "{r} {t}");
    assert_eq!(first.stdout, semigen(&args).stdout);
}

#[test]
fn ransac_without_a_feasible_solver_exits_with_status_two() {
    let out = semigen(&["ransac", "--input", fixture("sparse.json").to_str().unwrap(), "--solvers", "h51f5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_output_round_trips_through_solve() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scene.json");
    let p = path.to_str().unwrap();
    let out = semigen(&["gen", "--seed", "9", "--index", "2", "--minimal", "h32f", "--out", p]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&semigen(&["solve", "--input", p, "--solver", "h32f"]));
    let (r, _, f) = best_solution_error(&v);
    assert!(r < 1e-6 && f < 1e-6, "{r} {f}");
}
