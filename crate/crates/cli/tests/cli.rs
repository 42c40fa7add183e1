use std::path::Path;
use std::process::{Command, Output};

fn fvg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fvg"))
        .current_dir(dir)
        .env_remove("FVG_CACHE_DIR")
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("binary runs")
}

const SMALL: &[&str] = &[
    "--bandwidth",
    "12",
    "--grid",
    "48x96",
    "--masks",
    "20",
    "--ranges",
    "0.3,0.5",
    "--cutoffs",
    "6,12",
];

fn with(cmd: &[&str], extra: &[&str]) -> Vec<String> {
    cmd.iter().chain(SMALL).chain(extra).map(|s| s.to_string()).collect()
}

fn ok(dir: &Path, args: Vec<String>) -> serde_json::Value {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = fvg(dir, &refs);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json summary on stdout")
}

#[test]
fn full_workflow() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, with(&["precompute"], &["--cache", "c.fvgc"]));
    let gen = ok(d, with(&["gen-data", "--frames", "10"], &["--out", "data"]));
    assert_eq!(gen["frames"], 10);
    let est = ok(
        d,
        with(&["estimate"], &["--cache", "c.fvgc", "--data", "data", "--out", "est"]),
    );
    assert_eq!(est["pairs"], 9);
    assert!(d.join("est/delta_L6_r0.3.csv").exists());
    assert!(d.join("est/absolute_L12_r0.5.csv").exists());
    let header = std::fs::read_to_string(d.join("est/delta_L12_r0.5.csv")).unwrap();
    assert!(header.starts_with("frame_index,gt_ax,gt_ay,gt_az,est_ax,est_ay,est_az,geodesic_error_rad,residual"));
    ok(
        d,
        with(
            &["train", "--epochs", "3"],
            &[
                "--cache", "c.fvgc", "--data", "data", "--out", "tr", "--model", "m.json",
            ],
        ),
    );
    let model: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("m.json")).unwrap()).unwrap();
    assert_eq!(model["layers"].as_array().unwrap().len(), 4);
    ok(
        d,
        with(
            &["eval"],
            &[
                "--cache", "c.fvgc", "--data", "data", "--out", "ev", "--model", "m.json",
            ],
        ),
    );
    assert!(d.join("ev/eval_report.json").exists());
    let bench = ok(
        d,
        with(
            &["bench", "--frames", "3"],
            &["--cache", "c.fvgc", "--out", "b", "--model", "m.json"],
        ),
    );
    assert_eq!(bench["stages"].as_array().unwrap().len(), 4);
}

#[test]
fn cache_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fvg"))
        .current_dir(tmp.path())
        .env("FVG_CACHE_DIR", tmp.path().join("cachedir"))
        .env("RUST_LOG", "warn")
        .args(SMALL)
        .arg("precompute")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("cachedir/fvg-cache.fvgc").exists());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(fvg(d, &["precompute", "--grid", "abc"]).status.code(), Some(2));
    assert_eq!(fvg(d, &["precompute", "--ranges", "1.5"]).status.code(), Some(2));
    assert_eq!(fvg(d, &["estimate", "--estimator", "ransac"]).status.code(), Some(2));
    assert_eq!(fvg(d, &["bogus"]).status.code(), Some(2));
    let refs: Vec<String> = with(&["estimate"], &["--cache", "missing.fvgc"]);
    let refs: Vec<&str> = refs.iter().map(String::as_str).collect();
    assert_eq!(fvg(d, &refs).status.code(), Some(3));
    std::fs::write(d.join("bad.fvgc"), b"not a cache").unwrap();
    let refs: Vec<String> = with(&["estimate"], &["--cache", "bad.fvgc"]);
    let refs: Vec<&str> = refs.iter().map(String::as_str).collect();
    assert_eq!(fvg(d, &refs).status.code(), Some(3));
}

#[test]
fn blank_frames_are_a_numerical_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, with(&["precompute"], &["--cache", "c.fvgc"]));
    ok(d, with(&["gen-data", "--frames", "3"], &["--out", "data"]));
    for entry in std::fs::read_dir(d.join("data")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "pgm") {
            let mut bytes = std::fs::read(&path).unwrap();
            let n = bytes.len();
            bytes[n - 48 * 96 * 2..].fill(0);
            std::fs::write(&path, bytes).unwrap();
        }
    }
    let args = with(&["estimate"], &["--cache", "c.fvgc", "--data", "data", "--out", "e"]);
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    assert_eq!(fvg(d, &refs).status.code(), Some(4));
}

#[test]
fn outputs_are_deterministic_across_runs_and_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, with(&["precompute"], &["--cache", "c.fvgc"]));
    ok(d, with(&["gen-data", "--frames", "6"], &["--out", "a", "--seed", "9"]));
    ok(d, with(&["gen-data", "--frames", "6"], &["--out", "b", "--seed", "9"]));
    for f in ["manifest.json", "ground_truth.csv", "frame_00005.pgm"] {
        assert_eq!(
            std::fs::read(d.join("a").join(f)).unwrap(),
            std::fs::read(d.join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    for (out, threads) in [("e1", "1"), ("e4", "4")] {
        ok(
            d,
            with(
                &["estimate"],
                &["--cache", "c.fvgc", "--data", "a", "--out", out, "--threads", threads],
            ),
        );
    }
    for f in ["delta_L12_r0.3.csv", "absolute_L6_r0.5.csv"] {
        assert_eq!(
            std::fs::read(d.join("e1").join(f)).unwrap(),
            std::fs::read(d.join("e4").join(f)).unwrap(),
            "{f}"
        );
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("e1/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "estimate");
    assert_eq!(manifest["grid"], serde_json::json!([48, 96]));
    assert_eq!(manifest["threads"], 1);
}
