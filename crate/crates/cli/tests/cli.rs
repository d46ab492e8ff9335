use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gkp-forge"));
    c.env_remove("GKP_FORGE_THREADS");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn target_writes_state_density_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["target", "--delta", "0.3", "--mu", "0", "--out", "zero.json"]);
    for f in ["zero.json", "zero.density.csv", "zero.manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let state: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("zero.json")).unwrap()).unwrap();
    assert_eq!(state["mu"], "0");

    // the central density peak sits at q = 0 and the next at 2 sqrt(pi)
    let density = rows(&dir.path().join("zero.density.csv"));
    let value = |q: f64| {
        density
            .iter()
            .min_by(|a, b| {
                let da = (a[0].parse::<f64>().unwrap() - q).abs();
                let db = (b[0].parse::<f64>().unwrap() - q).abs();
                da.total_cmp(&db)
            })
            .unwrap()[1]
            .parse::<f64>()
            .unwrap()
    };
    let s = std::f64::consts::PI.sqrt();
    assert!(value(0.0) > 10.0 * value(s));
    assert!(value(2.0 * s) > 10.0 * value(s));
}

#[test]
fn invalid_label_is_rejected_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["target", "--delta", "0.3", "--mu", "2", "--out", "x.json"]);
    assert!(!out.status.success());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn too_small_cutoff_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["target", "--delta", "0.12", "--cutoff", "20", "--out", "x.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("cutoff"));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn threshold_curve_passes_through_the_threshold() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["threshold", "--out", "curve.csv"]);
    let r = rows(&dir.path().join("curve.csv"));
    let at = r.iter().find(|r| r[0] == "0.32").expect("0.32 row");
    let p: f64 = at[2].parse().unwrap();
    assert!((p - 0.347).abs() < 0.002, "{p}");
    let ps: Vec<f64> = r.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(ps.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn cutoff_decreases_with_delta() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["cutoff", "--deltas", "0.08,0.12,0.2,0.3,0.4", "--out", "c.csv"]);
    let c: Vec<usize> = rows(&dir.path().join("c.csv")).iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(c.len(), 5);
    assert!(c.windows(2).all(|w| w[1] <= w[0]), "{c:?}");
}

#[test]
fn sweep_reports_threshold_row() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["sweep", "--deltas", "0.32", "--out", "s.csv"]);
    let r = rows(&dir.path().join("s.csv"));
    assert_eq!(r.len(), 2);
    assert_eq!(r[0][0], "point");
    let twirled: f64 = r[0][4].parse().unwrap();
    let target: f64 = r[0][3].parse().unwrap();
    assert!((twirled - 0.347).abs() < 0.002);
    assert!((target - twirled).abs() < 0.01);
    assert_eq!(r[1][0], "threshold");
    let out = run(dir.path(), &["sweep", "--deltas", "", "--out", "e.csv"]);
    assert!(!out.status.success());
}

#[test]
fn ec_demo_corrections_stay_in_the_interval() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["ec-demo", "--seeds", "1..30", "--out", "ec.csv"]);
    let r = rows(&dir.path().join("ec.csv"));
    assert_eq!(r.len(), 30);
    let h = std::f64::consts::PI.sqrt() / 2.0;
    for row in &r {
        let c: f64 = row[2].parse().unwrap();
        assert!(c > -h && c <= h, "{c}");
    }
}

#[test]
fn replay_reproduces_outputs_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["--threads", "1", "ec-demo", "--seeds", "3..8", "--out", "ec.csv"]);
    let first = fs::read(dir.path().join("ec.csv")).unwrap();
    fs::remove_file(dir.path().join("ec.csv")).unwrap();
    ok(dir.path(), &["--threads", "1", "replay", "ec.manifest.json"]);
    assert_eq!(fs::read(dir.path().join("ec.csv")).unwrap(), first);
}

#[test]
fn optimize_is_deterministic_single_threaded() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "--threads", "1", "optimize", "--delta", "0.4", "--blocks", "2", "--trials", "2", "--iters", "40",
        "--seed", "5",
    ];
    let mut a = args.to_vec();
    a.extend(["--out", "a.json"]);
    let mut b = args.to_vec();
    b.extend(["--out", "b.json"]);
    ok(dir.path(), &a);
    ok(dir.path(), &b);
    assert_eq!(
        fs::read(dir.path().join("a.json")).unwrap(),
        fs::read(dir.path().join("b.json")).unwrap()
    );
    for f in ["a.trace.csv", "a.report.json", "a.manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a.report.json")).unwrap()).unwrap();
    assert!(report["quality"]["fidelity"].as_f64().unwrap() > 0.0);
}

#[test]
fn thread_count_can_come_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .current_dir(dir.path())
        .env("GKP_FORGE_THREADS", "1")
        .args(["cutoff", "--deltas", "0.3", "--out", "c.csv"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("c.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["threads"], 1);
}
