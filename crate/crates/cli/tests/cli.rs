use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_riskscout");
const SCHEMAS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data/schemas");

fn riskscout(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("RISKSCOUT_THREADS").output().expect("spawn riskscout")
}

fn ok(args: &[&str]) -> String {
    let out = riskscout(args);
    assert!(
        out.status.success(),
        "riskscout {args:?} exited {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    riskscout(args).status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn run_writes_one_line_per_oracle_call() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    ok(&["run", "--solver", "sa", "--budget", "1000", "--seed", "4", "--out", p(&out)]);
    let text = fs::read_to_string(out.join("seed_4.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 1000);
    for line in text.lines().take(5) {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.is_object());
    }
    assert!(out.join("manifest.json").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        ok(&["run", "--solver", "ga-explore", "--budget", "400", "--seed", "9", "--out", p(out)]);
    }
    assert_eq!(fs::read(a.join("seed_9.jsonl")).unwrap(), fs::read(b.join("seed_9.jsonl")).unwrap());
}

#[test]
fn parameter_overrides_are_checked() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out = p(&out);
    ok(&["run", "--solver", "sa", "--budget", "100", "--param", "t0=2.5", "--out", out]);
    assert_eq!(code(&["run", "--solver", "sa", "--budget", "100", "--param", "nonsense=1", "--out", out]), 2);
    assert_eq!(code(&["run", "--solver", "sa", "--budget", "100", "--param", "t0", "--out", out]), 2);
}

#[test]
fn unknown_solver_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&["run", "--solver", "simulated-cooling", "--out", p(dir.path())]), 2);
    assert_eq!(code(&["suite", "--solvers", "random,bogus", "--out", p(dir.path())]), 2);
    assert_eq!(code(&["run", "--solver", "random", "--schema", "no_such_schema", "--out", p(dir.path())]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
}

#[test]
fn suite_summary_has_one_row_per_solver() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("suite");
    ok(&["suite", "--solvers", "random,pso,ga-exploit", "--seeds", "0,1", "--budget", "200", "--out", p(&out)]);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
    for solver in ["random", "pso", "ga-exploit"] {
        assert!(out.join(solver).join("seed_0.jsonl").exists(), "{solver}");
        assert!(out.join(solver).join("seed_1.jsonl").exists(), "{solver}");
    }
    assert!(!out.join("suite_errors.txt").exists());

    let analysis = dir.path().join("analysis");
    ok(&["analyze", "--archives", p(&out), "--out", p(&analysis), "--fix", "random", "--against", "ga-exploit"]);
    for f in ["summary.csv", "exclusivity.csv", "overlap.csv", "modes.csv", "signatures.csv", "report.md"] {
        assert!(analysis.join(f).exists(), "{f}");
    }

    let pred = dir.path().join("pred");
    ok(&["predict", "--archives", p(&out), "--out", p(&pred), "--train-size", "100", "--trees", "30"]);
    let report = fs::read_to_string(pred.join("prediction_report.csv")).unwrap();
    assert_eq!(report.lines().count(), 1 + 3 + 3);
}

#[test]
fn mixed_schemas_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    ok(&["run", "--solver", "random", "--budget", "100", "--out", p(&root.join("wide"))]);
    ok(&["run", "--solver", "sa", "--budget", "100", "--schema", "mini_8", "--out", p(&root.join("mini"))]);
    assert_eq!(code(&["analyze", "--archives", p(root), "--out", p(&root.join("analysis"))]), 2);
    assert_eq!(code(&["predict", "--archives", p(root), "--out", p(&root.join("pred"))]), 2);
}

#[test]
fn enumerate_covers_the_mini_space() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("enum");
    let stdout = ok(&["enumerate", "--schema", "mini_8", "--out", p(&out)]);
    assert!(stdout.contains("global max risk"));
    let text = fs::read_to_string(out.join("seed_0.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 256);
}

#[test]
fn enumerate_refuses_twenty_bits() {
    let dir = tempfile::tempdir().unwrap();
    let wide = fs::read_to_string(Path::new(SCHEMAS).join("single_page_24.toml"))
        .unwrap()
        .replace("name = \"single_page_24\"", "name = \"wide_20\"")
        .replacen("bits = 2", "fixed = 0", 2);
    let path = dir.path().join("wide_20.toml");
    fs::write(&path, wide).unwrap();
    let stdout = ok(&["validate", "--schema", p(&path)]);
    assert!(stdout.contains("20 bits"), "{stdout}");
    assert_eq!(code(&["enumerate", "--schema", p(&path)]), 2);
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(threads);
        let status = Command::new(BIN)
            .args(["suite", "--solvers", "random,sa", "--seeds", "0,1", "--budget", "150", "--out", p(&out)])
            .env("RISKSCOUT_THREADS", threads)
            .output()
            .unwrap()
            .status;
        assert!(status.success());
        files.push(fs::read(out.join("sa").join("seed_1.jsonl")).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert_eq!(Command::new(BIN).args(["validate"]).env("RISKSCOUT_THREADS", "many").status().unwrap().code(), Some(2));
}
