use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use serde_json::Value;
use sl1_core::bundle::{write_bundle, BundleMeta, PHI_FILE};
use sl1_core::generators::{make_instance, Amplitude, NoiseSpec, SignalSpec, SparseInstance};
use sl1_core::rng::RngSpec;

fn sl1(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sl1"))
        .args(args)
        .env_remove("SL1_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = sl1(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_is_reproducible_and_creates_directories() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("deep/nested/a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        ok(&["gen", "--out", s(out), "-N", "20", "-M", "12", "-K", "2", "--seed", "4"]);
    }
    for f in ["phi.bin", "x.csv", "n.csv", "y.csv"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let meta = json(&a.join("meta.json"));
    assert_eq!(meta["config"]["N"], 20);
    assert_eq!(meta["config"]["seed"], 4);
}

#[test]
fn invalid_sparsity_names_the_precondition() {
    let dir = tempfile::tempdir().unwrap();
    let out = sl1(&["gen", "--out", s(dir.path()), "-N", "4", "-K", "5"]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("K = 5") && msg.contains("N = 4"), "{msg}");
    assert_eq!(sl1(&["gen"]).status.code(), Some(2));
    assert_eq!(sl1(&["grid", "--ks", "0"]).status.code(), Some(2));
}

#[test]
fn both_methods_agree_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let b = dir.path().join("b");
    ok(&["gen", "--out", s(&b), "-N", "30", "-M", "20", "-K", "3", "--seed", "11"]);
    let lp = dir.path().join("lp.json");
    let fo = dir.path().join("fo.json");
    ok(&["solve", "--bundle", s(&b), "--method", "lp-exact", "--out", s(&lp)]);
    ok(&["solve", "--bundle", s(&b), "--method", "first-order", "--out", s(&fo)]);
    let (lp, fo) = (json(&lp), json(&fo));
    let a = lp["result"]["objective"].as_f64().unwrap();
    let f = fo["result"]["objective"].as_f64().unwrap();
    assert!((a - f).abs() <= 1e-6 * (1.0 + a), "{a} vs {f}");
    assert_eq!(lp["config"]["solver"]["method"], "lp-exact");
    assert_eq!(fo["result"]["status"], "optimal");
}

fn write_instance(dir: &Path, epsilon: f64) {
    let signal = SignalSpec::Sparse {
        amplitude: Amplitude::Gaussian,
    };
    let base = RngSpec::new(3, 0);
    let i = make_instance::<f64>(10, 6, 2, &NoiseSpec::None, &signal, &base).unwrap();
    let inst = SparseInstance::from_parts(i.x, i.phi, i.n, i.y, epsilon, i.k).unwrap();
    let meta = BundleMeta::new(&inst, signal, NoiseSpec::None, base, Value::Null);
    write_bundle(dir, &inst, &meta).unwrap();
}

#[test]
fn large_budget_gives_zero_solution() {
    let dir = tempfile::tempdir().unwrap();
    write_instance(dir.path(), 1e6);
    ok(&["solve", "--bundle", s(dir.path())]);
    let r = json(&dir.path().join("result.json"));
    assert!(r["result"]["u_star"].as_array().unwrap().iter().all(|v| v == 0.0));
    assert_eq!(r["result"]["objective"], 0.0);
}

#[test]
fn corrupt_bundle_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    write_instance(dir.path(), 0.0);
    let phi = dir.path().join(PHI_FILE);
    let mut bytes = std::fs::read(&phi).unwrap();
    bytes[..4].copy_from_slice(b"JUNK");
    std::fs::write(&phi, bytes).unwrap();
    let out_path = dir.path().join("out.json");
    let out = sl1(&["solve", "--bundle", s(dir.path()), "--out", s(&out_path)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out_path.exists());
    let missing = sl1(&["solve", "--bundle", s(&dir.path().join("nope"))]);
    assert_eq!(missing.status.code(), Some(3));
    let no_config = sl1(&["solve", "--config", s(&dir.path().join("nope.json"))]);
    assert_eq!(no_config.status.code(), Some(3));
}

#[test]
fn iteration_limit_exits_with_nonconvergence() {
    let dir = tempfile::tempdir().unwrap();
    let b = dir.path().join("b");
    ok(&["gen", "--out", s(&b), "-N", "40", "-M", "20", "-K", "4", "--seed", "2"]);
    let out = sl1(&["solve", "--bundle", s(&b), "--max-iters", "1"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(json(&b.join("result.json"))["result"]["status"], "iteration-limit");
    let out = sl1(&["trace", "--bundle", s(&b), "--max-iters", "1"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(!b.join("trace.json").exists());
}

#[test]
fn noiseless_trace_holds_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    let b = dir.path().join("b");
    ok(&[
        "gen",
        "--out",
        s(&b),
        "-N",
        "8",
        "-M",
        "40",
        "-K",
        "1",
        "--noiseless",
        "--seed",
        "1",
    ]);
    ok(&["trace", "--bundle", s(&b), "--estimate", "--method", "lp-exact"]);
    let t = json(&b.join("trace.json"));
    assert_eq!(t["unconditional_hold"], true);
    assert_eq!(t["config"]["estimate"]["budget"]["samples"], 2000);
    let records = t["trace"]["records"].as_array().unwrap();
    assert!(records.len() > 9);
    for r in records {
        assert_eq!(r["holds"], true, "{r}");
        assert!(r["lhs"].as_f64().unwrap().abs() < 1e-9, "{r}");
    }
}

#[test]
fn zero_budget_conditions_report() {
    let dir = tempfile::tempdir().unwrap();
    let b = dir.path().join("b");
    ok(&["gen", "--out", s(&b), "-N", "12", "-M", "30", "-K", "2"]);
    let out = dir.path().join("c.json");
    ok(&[
        "conditions",
        "--matrix",
        s(&b.join("phi.bin")),
        "-K",
        "2",
        "--samples",
        "0",
        "--restarts",
        "0",
        "--exhaustive-cap",
        "0",
        "--out",
        s(&out),
    ]);
    let c = json(&out);
    assert_eq!(c["estimate"]["delta2k_lower"], 0.0);
    assert_eq!(c["estimate"]["delta3k_lower"], 0.0);
    assert_eq!(c["verdict"], "inconclusive");
    assert_eq!(c["config"]["nu"], (2.0 / std::f64::consts::PI).sqrt());
}

#[test]
fn conditions_reads_csv_and_reports_lemma_bound() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("phi.csv");
    std::fs::write(&m, "1,0\n0,1\n").unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"matrix": "MATRIX", "K": 1, "lemma": {"C": 1, "c": 1, "delta": 0.5, "K": 1, "N": 2}}"#
            .replace("MATRIX", s(&m)),
    )
    .unwrap();
    let out = dir.path().join("c.json");
    ok(&["conditions", "--config", s(&cfg), "--out", s(&out)]);
    let c = json(&out);
    assert_eq!(c["lemma"]["required_M"], 89);
    assert_eq!(c["lemma"]["M"], 2);
}

#[test]
fn smoke_grid_is_fast_and_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let start = Instant::now();
    let args = [
        "--n",
        "64",
        "--ms",
        "24,32",
        "--ks",
        "2,4",
        "--corrupt",
        "2",
        "--trials",
        "3",
    ];
    ok(&[&["grid", "--threads", "1", "--out-dir", s(&a)][..], &args].concat());
    assert!(start.elapsed().as_secs() < 60);
    let out = Command::new(env!("CARGO_BIN_EXE_sl1"))
        .args([&["grid", "--out-dir", s(&b)][..], &args].concat())
        .env("SL1_THREADS", "3")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(
        std::fs::read(a.join("trials.csv")).unwrap(),
        std::fs::read(b.join("trials.csv")).unwrap()
    );
    let summary = json(&a.join("summary.json"));
    assert_eq!(summary["cells"].as_array().unwrap().len(), 4);
    let csv = std::fs::read_to_string(a.join("trials.csv")).unwrap();
    assert_eq!(csv.lines().count(), 13);
    assert_eq!(sl1(&["grid", "--threads", "0"]).status.code(), Some(2));
}
