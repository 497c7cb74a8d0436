//! Command-line behaviour, driven through the built binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use ssdu3d::dataset::{decode_dataset, encode_dataset, load_dataset, Dataset};
use ssdu3d::report::{MetricsReport, METRICS_REPORT_SCHEMA};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ssdu3d"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "ssdu3d {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn validate_report(path: &Path) -> MetricsReport {
    let schema: serde_json::Value = serde_json::from_str(METRICS_REPORT_SCHEMA).unwrap();
    let value: serde_json::Value = serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap();
    let compiled = jsonschema::JSONSchema::compile(&schema).unwrap();
    let errors: Vec<String> = match compiled.validate(&value) {
        Ok(()) => Vec::new(),
        Err(errs) => errs.map(|e| e.to_string()).collect(),
    };
    assert!(errors.is_empty(), "report violates schema: {errors:?}");
    serde_json::from_value(value).unwrap()
}

#[test]
fn simulate_twice_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.ssdu3d"), dir.path().join("b.ssdu3d"));
    for p in [&a, &b] {
        run(&["simulate", "--subjects", "2", "--seed", "7", "--out", s(p)]);
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    let ds = load_dataset(&a).unwrap();
    assert_eq!(ds.meta.subjects, vec![0, 1]);
    assert_eq!(ds.samples.len(), 8);
}

#[test]
fn ground_truth_scores_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.ssdu3d");
    let report = dir.path().join("gt.json");
    run(&["simulate", "--config", s(&configs().join("simulate_smoke.json")), "--seed", "3", "--out", s(&data)]);
    let out = run(&["evaluate", "--data", s(&data), "--method", "ground-truth", "--out", s(&report)]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("ground-truth"));
    let r = validate_report(&report);
    assert_eq!(r.method, "ground-truth");
    assert!(r.volumes.iter().all(|v| v.nmse == 0.0 && v.ssim == 1.0));
    assert_eq!(r.mean.nmse, 0.0);
    assert_eq!(r.mean.ssim, 1.0);
}

#[test]
fn failures_are_machine_readable() {
    let dir = tempfile::tempdir().unwrap();
    let bad_flag = bin().args(["simulate", "--frobnicate"]).output().unwrap();
    assert_eq!(bad_flag.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&bad_flag.stderr).unwrap();
    assert_eq!(err["kind"], "usage");

    let missing = dir.path().join("missing.ssdu3d");
    let out = bin().args(["evaluate", "--data", s(&missing), "--method", "ground-truth", "--out", "x.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["kind"], "io");

    let junk = dir.path().join("junk.ssdu3d");
    std::fs::write(&junk, b"not a dataset").unwrap();
    let out = bin().args(["train", "--data", s(&junk), "--out", s(&dir.path().join("m.ckpt"))]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));

    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, br#"{"version": 99}"#).unwrap();
    let out = bin().args(["simulate", "--config", s(&cfg), "--out", s(&junk)]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

const FIXTURE: &str = "tests/data/fixture.ssdu3d";

/// The checked-in fixture was written by `simulate` with the arguments
/// below. Set `SSDU3D_BLESS=1` to regenerate it.
#[test]
fn checked_in_dataset_loads_identically() {
    let dir = tempfile::tempdir().unwrap();
    let fresh = dir.path().join("f.ssdu3d");
    run(&["simulate", "--config", s(&configs().join("simulate_fixture.json")), "--seed", "11", "--out", s(&fresh)]);
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join(FIXTURE);
    if std::env::var_os("SSDU3D_BLESS").is_some() {
        std::fs::copy(&fresh, &fixture).unwrap();
    }
    let stored = std::fs::read(&fixture).unwrap();
    let decoded: Dataset = decode_dataset(&stored).unwrap();
    // little-endian on every platform: the bytes must match a fresh run and
    // re-encode to themselves
    assert_eq!(stored, std::fs::read(&fresh).unwrap());
    assert_eq!(encode_dataset(&decoded).unwrap(), stored);
}

#[test]
fn end_to_end_smoke_run() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    run(&["simulate", "--config", s(&configs().join("simulate_smoke.json")), "--seed", "5", "--out", s(&p("d.ssdu3d"))]);
    run(&[
        "train",
        "--data",
        s(&p("d.ssdu3d")),
        "--config",
        s(&configs().join("train_desk.json")),
        "--epochs",
        "2",
        "--out",
        s(&p("m.ckpt")),
    ]);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(p("m.json")).unwrap()).unwrap();
    assert_eq!(report["epoch_losses"].as_array().unwrap().len(), 2);
    run(&["reconstruct", "--checkpoint", s(&p("m.ckpt")), "--data", s(&p("d.ssdu3d")), "--out", s(&p("recon"))]);
    run(&["baseline", "--method", "zero-filled", "--data", s(&p("d.ssdu3d")), "--out", s(&p("zf"))]);
    for (dir, label) in [("recon", "ssdu"), ("zf", "zero-filled")] {
        let out = p(&format!("{label}.json"));
        run(&["evaluate", "--data", s(&p("d.ssdu3d")), "--recon", s(&p(dir)), "--out", s(&out)]);
        let r = validate_report(&out);
        assert_eq!(r.method, label);
        assert!(r.mean.psnr.is_finite() && r.mean.nmse > 0.0);
    }
    assert!(p("recon/s0000_slab000.png").exists());
    let took = start.elapsed();
    eprintln!("smoke run took {took:?}");
    assert!(took < Duration::from_secs(600), "smoke run took {took:?}");
}
