use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jumpilc::experiment::TRIALS_HEADER;

fn jumpilc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jumpilc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn task_path(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../tasks")
        .join(name)
        .display()
        .to_string()
}

fn write_task(dir: &Path, body: &str) -> String {
    let p = dir.join("task.toml");
    fs::write(&p, body).unwrap();
    p.display().to_string()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn unknown_field_is_a_usage_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let t = write_task(dir.path(), "id = \"a\"\n[target]\nx = 0.4\nxx = 1.0\n");
    let o = jumpilc(&["learn", &t, "--out", &dir.path().join("run").display().to_string()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("xx"), "{}", stderr(&o));
    assert!(!dir.path().join("run").exists());
}

#[test]
fn bad_values_and_missing_files_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    for body in [
        "id = \"a\"\nground = \"lava\"\n[target]\nx = 0.4\n",
        "id = \"a\"\nmax_trials = -1\n[target]\nx = 0.4\n",
        "id = \"a\"\n[target]\nx = \"far\"\n",
        "id = \"a\"\n[payload]\nmass = -2.0\n[target]\nx = 0.4\n",
        "this is not toml",
    ] {
        let t = write_task(dir.path(), body);
        let o = jumpilc(&["learn", &t]);
        assert_eq!(o.status.code(), Some(2), "{body:?}: {}", stderr(&o));
        assert!(stderr(&o).starts_with("error:"), "{body:?}");
    }
    let missing = dir.path().join("nope.toml").display().to_string();
    assert_eq!(jumpilc(&["learn", &missing]).status.code(), Some(2));
    assert_eq!(jumpilc(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn learn_writes_a_repeatable_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let task = task_path("forward-40-hard.toml");
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = jumpilc(&["learn", &task, "--max-trials", "2", "--out", &out.display().to_string()]);
        // two updates do not reach the tolerances
        assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
        out
    };
    let a = run("a");
    let b = run("b");
    for f in [
        "trials.csv",
        "summary.json",
        "task.json",
        "reference.json",
        "control.json",
        "plotdata/terminal_error.csv",
        "plotdata/landing.csv",
        "plotdata/joint_error.csv",
        "plotdata/limits.csv",
    ] {
        assert!(a.join(f).is_file(), "{f}");
    }
    assert_eq!(fs::read(a.join("trials.csv")).unwrap(), fs::read(b.join("trials.csv")).unwrap());

    let mut r = csv::Reader::from_path(a.join("trials.csv")).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, TRIALS_HEADER);

    let summary: serde_json::Value = serde_json::from_slice(&fs::read(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["n_trials"], 3);
    assert_eq!(summary["converged"], false);
    for f in ["terminal_error.csv", "landing.csv", "joint_error.csv", "limits.csv"] {
        let rows = csv_rows(&a.join("plotdata").join(f));
        assert_eq!(rows.len(), 3, "{f}");
        assert!(rows.iter().flatten().all(|c| !c.eq_ignore_ascii_case("nan")), "{f}");
    }
}

#[test]
fn transfer_refuses_a_source_that_did_not_converge() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src");
    let o = jumpilc(&[
        "learn",
        &task_path("forward-40-hard.toml"),
        "--max-trials",
        "0",
        "--out",
        &src.display().to_string(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let out = dir.path().join("dst");
    let o = jumpilc(&[
        "transfer",
        &task_path("transfer-60-from-40.toml"),
        "--from",
        &src.display().to_string(),
        "--out",
        &out.display().to_string(),
    ]);
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("did not converge"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn compare_and_sweep_reject_bad_arguments_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let task = task_path("forward-40-hard.toml");
    let out = dir.path().join("x").display().to_string();
    for args in [
        vec!["compare", &task, "--learners", "", "--out", &out],
        vec!["compare", &task, "--learners", "proposed,gradient", "--out", &out],
        vec!["sweep", &task, "--param", "ground.k_p", "--values", "2e3,soft", "--out", &out],
        vec!["sweep", &task, "--param", "ground.stiffness", "--values", "2e3", "--out", &out],
        vec!["sweep", &task, "--param", "learner.max_trials", "--values", "1.5", "--out", &out],
    ] {
        let o = jumpilc(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
    assert!(!dir.path().join("x").exists());
}

#[test]
fn single_value_sweep_matches_learn() {
    let dir = tempfile::tempdir().unwrap();
    let task = task_path("forward-40-hard.toml");
    let learn = dir.path().join("learn");
    let sweep = dir.path().join("sweep");
    jumpilc(&["learn", &task, "--max-trials", "1", "--out", &learn.display().to_string()]);
    let o = jumpilc(&[
        "sweep",
        &task,
        "--max-trials",
        "1",
        "--param",
        "ground.mu",
        "--values",
        "0.6",
        "--out",
        &sweep.display().to_string(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let index: serde_json::Value = serde_json::from_slice(&fs::read(sweep.join("index.json")).unwrap()).unwrap();
    let point = PathBuf::from(index["0.6"].as_str().unwrap());
    assert_eq!(csv_rows(&learn.join("trials.csv")), csv_rows(&point.join("trials.csv")));
}

#[test]
fn compare_writes_one_run_per_learner() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp");
    let o = jumpilc(&[
        "compare",
        &task_path("forward-40-hard.toml"),
        "--learners",
        "proposed,pd-ilc",
        "--max-trials",
        "1",
        "--out",
        &out.display().to_string(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for learner in ["proposed", "pd-ilc"] {
        assert!(out.join(learner).join("trials.csv").is_file(), "{learner}");
    }
    assert!(out.join("compare.json").is_file());
    assert_eq!(csv_rows(&out.join("compare.csv")).len(), 10);
}
