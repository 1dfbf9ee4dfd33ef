//! Behavior tests for the command-line interface: exit codes, output
//! schemas, and determinism of the file outputs.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_armafield")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_params(dir: &Path, body: &str) -> String {
    let path = dir.join("params.json");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const AR_PARAMS: &str = r#"{
    "order": {"p1": 1, "p2": 1, "q1": 0, "q2": 0},
    "a": {"0,1": -0.5, "1,0": -0.5, "1,1": 0.25},
    "sigma2": 1.0,
    "size": [96, 96],
    "seed": 11
}"#;

#[test]
fn synth_is_deterministic_and_writes_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let params = write_params(dir.path(), AR_PARAMS);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let o = run(&["synth", "--params", &params, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["field.pgm", "field.json"] {
        let a = fs::read(out_a.join(name)).unwrap();
        let b = fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    let sidecar: serde_json::Value =
        serde_json::from_slice(&fs::read(out_a.join("field.json")).unwrap()).unwrap();
    assert_eq!(sidecar["seed"], 11);
    assert_eq!(sidecar["rng"], "chacha8-normal-rowmajor-v1");
    assert!(sidecar["scale"].as_f64().unwrap() > 0.0);
    assert_eq!(sidecar["params"]["a"]["0,1"], -0.5);
}

#[test]
fn synth_rejects_unstable_parameters_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let params = write_params(
        dir.path(),
        r#"{"order": {"p1": 1, "p2": 0, "q1": 0, "q2": 0}, "a": {"1,0": -1.2}, "sigma2": 1.0}"#,
    );
    let o = run(&[
        "synth",
        "--params",
        &params,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("unstable"), "stderr: {stderr}");
}

#[test]
fn estimate_recovers_sidecar_truth_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let params = write_params(
        dir.path(),
        r#"{
            "order": {"p1": 1, "p2": 1, "q1": 0, "q2": 0},
            "a": {"0,1": -0.5, "1,0": -0.5, "1,1": 0.25},
            "sigma2": 1.0,
            "size": [256, 256],
            "seed": 4
        }"#,
    );
    let synth_out = dir.path().join("synth");
    let o = run(&[
        "synth",
        "--params",
        &params,
        "--out",
        synth_out.to_str().unwrap(),
    ]);
    assert!(o.status.success());

    let est_out = dir.path().join("est");
    let o = run(&[
        "estimate",
        "--input",
        synth_out.join("field.pgm").to_str().unwrap(),
        "--out",
        est_out.to_str().unwrap(),
        "--order",
        "1,1,0,0",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fit: serde_json::Value =
        serde_json::from_slice(&fs::read(est_out.join("fit.json")).unwrap()).unwrap();
    for (key, want) in [("0,1", -0.5), ("1,0", -0.5), ("1,1", 0.25)] {
        let got = fit["a"][key].as_f64().unwrap();
        assert!((got - want).abs() < 0.05, "a[{key}] = {got}, want {want}");
    }
}

#[test]
fn estimate_json_schema_is_stable_across_orders() {
    let dir = tempfile::tempdir().unwrap();
    let params = write_params(dir.path(), AR_PARAMS);
    let synth_out = dir.path().join("synth");
    assert!(run(&[
        "synth",
        "--params",
        &params,
        "--out",
        synth_out.to_str().unwrap()
    ])
    .status
    .success());
    let input = synth_out.join("field.pgm");

    let mut key_sets = Vec::new();
    for order in ["1,0,0,0", "1,1,1,1"] {
        let out = dir.path().join(format!("est-{}", order.replace(',', "-")));
        let o = run(&[
            "estimate",
            "--input",
            input.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--order",
            order,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let fit: serde_json::Value =
            serde_json::from_slice(&fs::read(out.join("fit.json")).unwrap()).unwrap();
        let keys: Vec<String> = fit.as_object().unwrap().keys().cloned().collect();
        key_sets.push(keys);
    }
    assert_eq!(key_sets[0], key_sets[1]);
    // Parsed maps iterate in sorted order.
    assert_eq!(
        key_sets[0],
        [
            "a",
            "b",
            "order",
            "regression_rows",
            "regularized",
            "sigma2",
            "theta"
        ]
        .map(String::from)
    );
}

#[test]
fn estimate_on_constant_image_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut pgm = b"P5\n64 64\n255\n".to_vec();
    pgm.extend(std::iter::repeat_n(128u8, 64 * 64));
    let input = dir.path().join("flat.pgm");
    fs::write(&input, &pgm).unwrap();
    let o = run(&[
        "estimate",
        "--input",
        input.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("degenerate"));
}

#[test]
fn missing_input_file_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "estimate",
        "--input",
        "/nonexistent/field.pgm",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn bad_order_flag_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "estimate",
        "--input",
        "x.pgm",
        "--out",
        dir.path().to_str().unwrap(),
        "--order",
        "1,2,3",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

fn make_composite_into(dir: &Path, seed: u64) -> (String, String) {
    let out = dir.join(format!("comp-{seed}"));
    let o = run(&[
        "make-composite",
        "--out",
        out.to_str().unwrap(),
        "--seed",
        &seed.to_string(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    (
        out.join("composite.pgm").to_str().unwrap().to_string(),
        out.join("truth.csv").to_str().unwrap().to_string(),
    )
}

#[test]
fn composite_truth_grid_has_three_balanced_bands() {
    let dir = tempfile::tempdir().unwrap();
    let (_, truth) = make_composite_into(dir.path(), 0);
    let text = fs::read_to_string(truth).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 16);
    let mut counts = [0usize; 3];
    for row in rows {
        let labels: Vec<usize> = row.split(',').map(|t| t.parse().unwrap()).collect();
        assert_eq!(labels.len(), 16);
        for l in labels {
            counts[l] += 1;
        }
    }
    assert_eq!(counts, [80, 96, 80]);
}

#[test]
fn segment_with_one_class_is_uniform() {
    let dir = tempfile::tempdir().unwrap();
    let (pgm, _) = make_composite_into(dir.path(), 1);
    let out = dir.path().join("seg");
    let o = run(&[
        "segment",
        "--input",
        &pgm,
        "--out",
        out.to_str().unwrap(),
        "--classes",
        "1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("blocks.csv")).unwrap();
    for line in csv.lines() {
        for token in line.split(',') {
            assert_eq!(token, "0");
        }
    }
}

#[test]
fn segment_outputs_are_thread_count_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let (pgm, _) = make_composite_into(dir.path(), 2);
    let mut outputs = Vec::new();
    for (tag, threads) in [("t1", "1"), ("t4", "4"), ("t1b", "1")] {
        let out = dir.path().join(tag);
        let o = run(&[
            "segment",
            "--input",
            &pgm,
            "--out",
            out.to_str().unwrap(),
            "--threads",
            threads,
            "--seed",
            "9",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let mut bundle = Vec::new();
        for name in [
            "labels.pgm",
            "blocks.csv",
            "summary.json",
            "reconstruction.pgm",
        ] {
            bundle.push(fs::read(out.join(name)).unwrap());
        }
        outputs.push(bundle);
    }
    assert_eq!(outputs[0], outputs[1], "1 thread vs 4 threads");
    assert_eq!(outputs[0], outputs[2], "repeated run");
}

#[test]
fn evaluate_reports_permutation_matched_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("truth.csv");
    fs::write(&truth, "0,0,1\n1,2,2\n").unwrap();

    // Identical prediction.
    let o = run(&[
        "evaluate",
        "--pred",
        truth.to_str().unwrap(),
        "--truth",
        truth.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["accuracy"], 1.0);
    assert_eq!(report["permutation"], serde_json::json!([0, 1, 2]));

    // Swapped labels still score 1.0 with the swap permutation.
    let swapped = dir.path().join("swapped.csv");
    fs::write(&swapped, "1,1,0\n0,2,2\n").unwrap();
    let o = run(&[
        "evaluate",
        "--pred",
        swapped.to_str().unwrap(),
        "--truth",
        truth.to_str().unwrap(),
    ]);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["accuracy"], 1.0);
    assert_eq!(report["permutation"], serde_json::json!([1, 0, 2]));

    // All-zero predictions against a balanced truth: best permutation
    // matches one class only.
    let zeros = dir.path().join("zeros.csv");
    fs::write(&zeros, "0,0,0\n0,0,0\n").unwrap();
    let o = run(&[
        "evaluate",
        "--pred",
        zeros.to_str().unwrap(),
        "--truth",
        truth.to_str().unwrap(),
    ]);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let acc = report["accuracy"].as_f64().unwrap();
    assert!((acc - 1.0 / 3.0).abs() < 1e-12, "accuracy {acc}");
}

#[test]
fn segment_then_evaluate_scores_the_bundled_truth() {
    let dir = tempfile::tempdir().unwrap();
    let (pgm, truth) = make_composite_into(dir.path(), 7);
    let out = dir.path().join("seg");
    let o = run(&[
        "segment",
        "--input",
        &pgm,
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "7",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&[
        "evaluate",
        "--pred",
        out.join("blocks.csv").to_str().unwrap(),
        "--truth",
        &truth,
    ]);
    assert!(o.status.success());
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let accuracy = report["accuracy"].as_f64().unwrap();
    assert!(accuracy >= 0.90, "accuracy {accuracy}");
}

#[test]
fn evaluate_shape_mismatch_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    fs::write(&a, "0,1\n").unwrap();
    fs::write(&b, "0,1,2\n").unwrap();
    let o = run(&[
        "evaluate",
        "--pred",
        a.to_str().unwrap(),
        "--truth",
        b.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_lists_normative_defaults() {
    let o = run(&["segment", "--help"]);
    assert!(o.status.success());
    let help = String::from_utf8_lossy(&o.stdout);
    for needle in ["2,2,0,0", "3,3", "default: 16", "default: 3", "default: 0"] {
        assert!(help.contains(needle), "help missing {needle}: {help}");
    }
}
