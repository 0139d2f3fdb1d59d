use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use formation_core::synthesis::ControllerSet;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn formation(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_formation"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ex2 = data("example2.json");
    let o = formation(dir.path(), &["check", path_arg(&ex2)]);
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("criterion.json").exists());
    assert!(fs::read_to_string(dir.path().join("criterion.txt")).unwrap().starts_with("verdict: stable"));

    let ex1 = data("example1.json");
    assert_eq!(code(&formation(dir.path(), &["check", path_arg(&ex1)])), 2);

    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ \"n\": 2, ").unwrap();
    let o = formation(dir.path(), &["check", path_arg(&bad)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("malformed"));

    assert_eq!(code(&formation(dir.path(), &["check", "/nonexistent/spec.json"])), 1);
}

#[test]
fn usage_errors_and_help() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&formation(dir.path(), &["bogus"])), 1);
    assert_eq!(code(&formation(dir.path(), &["--help"])), 0);
    let ex2 = data("example2.json");
    assert_eq!(code(&formation(dir.path(), &["--dt", "-1", "check", path_arg(&ex2)])), 1);
}

#[test]
fn split_checks_each_component() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(data("example2.json")).unwrap();
    let mut spec: serde_json::Value = serde_json::from_str(&text).unwrap();
    // Append a second, disconnected copy of agent 1 as an isolated leader.
    let agent = spec["agents"][0].clone();
    spec["agents"].as_array_mut().unwrap().push(agent);
    let file = dir.path().join("split.json");
    fs::write(&file, spec.to_string()).unwrap();
    assert_eq!(code(&formation(dir.path(), &["check", path_arg(&file)])), 1);
    let o = formation(dir.path(), &["check", "--split", path_arg(&file)]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(dir.path().join("criterion-component-2.json").exists());
}

#[test]
fn synthesize_writes_verified_controllers() {
    let dir = tempfile::tempdir().unwrap();
    let ex2 = data("example2.json");
    let o = formation(dir.path(), &["synthesize", path_arg(&ex2), "--strategy", "parent-only"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("verify: PASS"));
    let ctrl = ControllerSet::load(&dir.path().join("controller.json")).unwrap();
    assert_eq!(ctrl.followers.len(), 2);

    let ex1 = data("example1.json");
    assert_eq!(code(&formation(dir.path(), &["synthesize", path_arg(&ex1)])), 2);

    let fam = tempfile::tempdir().unwrap();
    let o = formation(fam.path(), &["--seed", "3", "synthesize", path_arg(&ex2), "--family", "5"]);
    assert_eq!(code(&o), 0);
    let files: Vec<_> = (1..=5).map(|k| fam.path().join(format!("controller-{k:02}.json"))).collect();
    assert!(files.iter().all(|f| f.exists()));
    assert!(!fam.path().join("controller-06.json").exists());
}

fn z_columns(csv_text: &str) -> (Vec<usize>, Vec<Vec<f64>>) {
    let mut lines = csv_text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let cols: Vec<usize> = (0..header.len()).filter(|&k| header[k].starts_with("z_")).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (cols, rows)
}

#[test]
fn simulate_ideal_start_keeps_errors_zero() {
    let dir = tempfile::tempdir().unwrap();
    let ex2 = data("example2.json");
    let o = formation(dir.path(), &["--T", "5", "simulate", path_arg(&ex2), "--auto", "--ideal"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let text = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let (cols, rows) = z_columns(&text);
    assert_eq!(cols.len(), 4);
    let worst = rows.iter().flat_map(|r| cols.iter().map(move |&k| r[k].abs())).fold(0.0, f64::max);
    assert!(worst < 1e-9, "max |z| = {worst}");
}

#[test]
fn simulate_random_start_passes_envelope() {
    let dir = tempfile::tempdir().unwrap();
    let ex2 = data("example2.json");
    let o = formation(
        dir.path(),
        &["--T", "15", "simulate", path_arg(&ex2), "--random", "--signals", "sin:0.5:2", "--svg"],
    );
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("envelope: PASS"));
    for f in ["trace.csv", "simulation.json", "errors.svg"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
}

#[test]
fn destabilized_controller_fails_envelope() {
    let dir = tempfile::tempdir().unwrap();
    let ex2 = data("example2.json");
    assert_eq!(code(&formation(dir.path(), &["synthesize", path_arg(&ex2)])), 0);
    let file = dir.path().join("controller.json");
    let mut ctrl = ControllerSet::load(&file).unwrap();
    for f in &mut ctrl.followers {
        f.s = -&f.s;
    }
    let bad = dir.path().join("bad-controller.json");
    fs::write(&bad, ctrl.to_json()).unwrap();
    let o = formation(
        dir.path(),
        &["--T", "8", "--dt", "1e-3", "simulate", path_arg(&ex2), "--controller", path_arg(&bad)],
    );
    assert_eq!(code(&o), 3, "{}", stdout(&o));
}

#[test]
fn pairwise_reports_unstable_pair() {
    let dir = tempfile::tempdir().unwrap();
    let ex2 = data("example2.json");
    let o = formation(dir.path(), &["pairwise", path_arg(&ex2)]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("formation-stable-pair-unstable"));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("pairwise.json")).unwrap()).unwrap();
    assert_eq!(json["unstable_pairs"], serde_json::json!([[3, 2]]));
}

#[test]
fn demos() {
    let dir = tempfile::tempdir().unwrap();
    let o = formation(dir.path(), &["--T", "10", "demo", "example2"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("formation verdict: stable"));
    assert!(text.contains("pair (3,2): unstable"));

    let o = formation(dir.path(), &["demo", "remark5"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("condition d_31 = d_32 violated"));

    assert_eq!(code(&formation(dir.path(), &["demo", "nosuch"])), 1);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let ex2 = data("example2.json");
    let runs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for dir in &runs {
        let args = ["--seed", "9", "--T", "5", "simulate", path_arg(&ex2), "--random", "--signals", "const:0.3"];
        assert_eq!(code(&formation(dir.path(), &args)), 0);
        assert_eq!(code(&formation(dir.path(), &["--seed", "9", "synthesize", path_arg(&ex2), "--family", "3"])), 0);
    }
    let mut names: Vec<_> = fs::read_dir(runs[0].path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 8);
    for name in names {
        let a = fs::read(runs[0].path().join(&name)).unwrap();
        let b = fs::read(runs[1].path().join(&name)).unwrap();
        assert!(a == b, "{name:?} differs");
    }
}

#[test]
fn config_file_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    fs::write(&cfg, r#"{ "T": 2.0, "dt": 0.005, "seed": 4 }"#).unwrap();
    let ex2 = data("example2.json");
    let o = formation(dir.path(), &["--config", path_arg(&cfg), "simulate", path_arg(&ex2)]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("simulated 400 steps"));

    fs::write(&cfg, r#"{ "T": 2.0, "bogus": 1 }"#).unwrap();
    assert_eq!(code(&formation(dir.path(), &["--config", path_arg(&cfg), "check", path_arg(&ex2)])), 1);
}
