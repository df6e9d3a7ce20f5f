use std::path::Path;
use std::process::{Command, Output};
use std::time::Duration;

use serde_json::Value;
use xaikit_cli::npy::{read_npy_file, write_npy_file};
use xaikit_cli::predictor::SubprocessPredictor;
use xaikit_core::perturb::Predictor;
use xaikit_core::{SplitMix64, Tensor, XaiError};

fn xaikit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xaikit"))
        .args(args)
        .env("XAIKIT_THREADS", "1")
        .env_remove("XAIKIT_SEED")
        .output()
        .unwrap()
}

fn stub(mode: &str) -> String {
    format!("'{}' predictor-stub --mode {mode}", env!("CARGO_BIN_EXE_xaikit"))
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn report(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn image(dir: &Path) -> String {
    let p = path(dir, "image.npy");
    let mut rng = SplitMix64::new(1);
    write_npy_file(Path::new(&p), &Tensor::from_fn(vec![8, 8, 1], |_| rng.next_f64()).unwrap()).unwrap();
    p
}

#[test]
fn cam_writes_heatmap_and_boxes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // one hot corner in channel 0, weighted for class 1
    let features = Tensor::from_fn(vec![4, 4, 2], |k| if k == 0 { 5.0 } else { (k % 2) as f64 * 0.1 }).unwrap();
    write_npy_file(&d.join("f.npy"), &features).unwrap();
    write_npy_file(&d.join("w.npy"), &Tensor::matrix(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap()).unwrap();
    let out = xaikit(&[
        "cam", "--features", &path(d, "f.npy"), "--weights", &path(d, "w.npy"), "--class", "1",
        "--out", &path(d, "h.pgm"), "--boxes", &path(d, "b.json"), "--threshold", "0.6", "--report", &path(d, "r.json"),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let pgm = std::fs::read(d.join("h.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n4 4\n255\n"));
    assert_eq!(pgm.len(), 11 + 16);
    let boxes: Value = serde_json::from_str(&std::fs::read_to_string(d.join("b.json")).unwrap()).unwrap();
    assert_eq!(boxes.as_array().unwrap().len(), 1);
    assert_eq!(boxes[0]["row_min"], 0);
    assert_eq!(boxes[0]["pixel_count"], 1);
    let r = report(d, "r.json");
    assert_eq!(r["command"], "cam");
    assert_eq!(r["results"]["box_count"], 1);
}

#[test]
fn missing_input_is_a_usage_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = path(dir.path(), "nope.npy");
    let out = xaikit(&["mil", "--scores", &missing, "--label", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(msg.contains(&missing), "{msg}");
    assert_eq!(msg.trim().lines().count(), 1);
}

#[test]
fn unknown_flag_and_bad_values_exit_two() {
    assert_eq!(xaikit(&["metrics", "--bogus"]).status.code(), Some(2));
    assert_eq!(xaikit(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(xaikit(&["--help"]).status.code(), Some(0));
}

#[test]
fn computation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_npy_file(&d.join("s.npy"), &Tensor::filled(vec![5, 2], 0.1).unwrap()).unwrap();
    let out = xaikit(&["mil", "--scores", &path(d, "s.npy"), "--label", "3"]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));

    std::fs::write(d.join("one.csv"), "score,label\n0.1,1\n0.7,1\n").unwrap();
    let out = xaikit(&["metrics", "--input", &path(d, "one.csv")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("undefined AUC"));
}

#[test]
fn mil_reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut rng = SplitMix64::new(2);
    write_npy_file(&d.join("s.npy"), &Tensor::from_fn(vec![40, 2], |_| rng.normal()).unwrap()).unwrap();
    let run = |name: &str| {
        let out = xaikit(&[
            "mil", "--scores", &path(d, "s.npy"), "--label", "1", "--section-len", "16", "--k", "8",
            "--lambda", "1e-4", "--report", &path(d, name),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        std::fs::read_to_string(d.join(name)).unwrap()
    };
    let a = run("r.json");
    let b = run("r.json");
    assert_eq!(a, b);
    let r: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(r["results"]["sections"], 2);
    assert_eq!(r["config"]["k"], 8);
}

#[test]
fn constant_predictor_gives_zero_lime_weights() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let img = image(d);
    let out = xaikit(&[
        "lime", "--image", &img, "--predictor", &stub("constant"), "--superpixels", "4", "--samples", "64",
        "--report", &path(d, "r.json"),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = report(d, "r.json");
    for w in r["results"]["weights"].as_array().unwrap() {
        assert!(w.as_f64().unwrap().abs() < 1e-9);
    }
}

#[test]
fn invocation_count_is_batches_plus_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let img = image(d);
    // sampled Kernel SHAP needs at least M samples to be determined
    let cases = [
        ("lime", 100usize, 32usize),
        ("lime", 64, 32),
        ("lime", 5, 2),
        ("lime", 1, 7),
        ("shap", 100, 32),
        ("shap", 64, 32),
        ("shap", 40, 7),
    ];
    for (cmd, samples, limit) in cases {
        {
            let out = xaikit(&[
                cmd, "--image", &img, "--predictor", &stub("mean"), "--superpixels", "12",
                "--samples", &samples.to_string(), "--batch-limit", &limit.to_string(), "--report", &path(d, "r.json"),
            ]);
            assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
            let calls = report(d, "r.json")["results"]["predictor_calls"].as_u64().unwrap() as usize;
            assert_eq!(calls, samples.div_ceil(limit) + 2, "{cmd} n={samples} limit={limit}");
        }
    }
}

#[test]
fn wrong_row_count_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let img = image(d);
    let out = xaikit(&["lime", "--image", &img, "--predictor", &stub("wrong-rows"), "--samples", "8"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("shape mismatch from predictor"), "{}", stderr(&out));
}

#[test]
fn failing_child_names_the_batch() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let img = image(d);
    let out = xaikit(&[
        "shap", "--image", &img, "--predictor", &format!("{} --after 3", stub("fail-after")),
        "--samples", "200", "--batch-limit", "16",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("batch 3"), "{}", stderr(&out));
}

#[test]
fn identity_child_roundtrips_bits() {
    let mut child = SubprocessPredictor::spawn(&stub("identity"), 32, Duration::from_secs(30)).unwrap();
    let mut rng = SplitMix64::new(3);
    for _ in 0..3 {
        let batch = Tensor::from_fn(vec![4, 3, 5, 2], |_| rng.normal() * 1e9).unwrap();
        let back = child.predict(&batch).unwrap();
        assert_eq!(back.shape(), &[4, 30]);
        for (a, b) in back.data().iter().zip(batch.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
    child.finish().unwrap();
}

#[test]
fn hung_child_times_out() {
    let mut child = SubprocessPredictor::spawn(&stub("hang"), 32, Duration::from_millis(300)).unwrap();
    let err = child.predict(&Tensor::filled(vec![1, 2, 2, 1], 0.5).unwrap()).unwrap_err();
    assert!(err.to_string().contains("did not answer"), "{err}");
}

#[test]
fn unlaunchable_predictor_is_a_closed_channel() {
    let mut child = SubprocessPredictor::spawn("exit 4", 32, Duration::from_secs(5)).unwrap();
    let err = child.predict(&Tensor::filled(vec![1, 2, 2, 1], 0.5).unwrap()).unwrap_err();
    let wrapped = XaiError::Predictor { batch: 0, first_sample: 0, source: err };
    assert!(wrapped.to_string().contains("batch 0"));
}

#[test]
fn exact_and_kernel_shap_agree_through_subprocess() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let img = image(d);
    let run = |extra: &[&str], name: &str| {
        let mut args = vec!["shap", "--image", &img, "--predictor", "", "--superpixels", "6", "--report"];
        let p = stub("mean");
        args[4] = &p;
        let out_path = path(d, name);
        args.push(&out_path);
        args.extend_from_slice(extra);
        let out = xaikit(&args);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        report(d, name)["results"]["weights"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .collect::<Vec<f64>>()
    };
    let exact = run(&["--exact"], "exact.json");
    let kernel = run(&["--samples", "62"], "kernel.json");
    for (a, b) in exact.iter().zip(&kernel) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn tsne_and_landscape_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut rng = SplitMix64::new(4);
    write_npy_file(&d.join("x.npy"), &Tensor::from_fn(vec![20, 4], |_| rng.normal()).unwrap()).unwrap();
    let out = xaikit(&[
        "tsne", "--embeddings", &path(d, "x.npy"), "--perplexity", "5", "--iterations", "200",
        "--out", &path(d, "y.npy"), "--report", &path(d, "t.json"),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(read_npy_file(&d.join("y.npy")).unwrap().shape(), &[20, 2]);
    assert!(report(d, "t.json")["results"]["max_entropy_error"].as_f64().unwrap() <= 1e-5);

    let mut csv = String::from("dice\n");
    for i in 0..20 {
        csv.push_str(&format!("{}\n", 0.5 + 0.02 * i as f64));
    }
    std::fs::write(d.join("dice.csv"), csv).unwrap();
    let out = xaikit(&[
        "landscape", "--embeddings", &path(d, "x.npy"), "--dice", &path(d, "dice.csv"), "--resolution", "5",
        "--out", &path(d, "g.npy"), "--image", &path(d, "g.ppm"),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let stdout_report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(stdout_report["command"], "landscape");
    assert_eq!(read_npy_file(&d.join("g.npy")).unwrap().shape(), &[5, 5]);
    assert!(std::fs::read(d.join("g.ppm")).unwrap().starts_with(b"P6\n5 5\n255\n"));
}

#[test]
fn metrics_worked_example_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("s.csv"), "score,label\n0.1,0\n0.4,0\n0.35,1\n0.8,1\n").unwrap();
    std::fs::write(d.join("n.csv"), "0.1,0.2\n").unwrap();
    let out = xaikit(&[
        "metrics", "--input", &path(d, "s.csv"), "--roc", &path(d, "roc.csv"), "--report", &path(d, "m.json"),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = report(d, "m.json");
    assert_eq!(r["results"]["auc"], 0.75);
    let roc = std::fs::read_to_string(d.join("roc.csv")).unwrap();
    assert!(roc.starts_with("threshold,fpr,tpr\n"));
    assert_eq!(roc.lines().count(), 6);
}

#[test]
fn segloss_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = xaikit(&["segloss-check", "--report", &path(dir.path(), "s.json")]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = report(dir.path(), "s.json");
    assert_eq!(r["results"]["gradient_balance"]["passed"], true);
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let img = image(d);
    let run = |seed: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_xaikit"));
        cmd.args(["lime", "--image", &img, "--predictor", &stub("mean"), "--samples", "20"]);
        match seed {
            Some(s) => cmd.env("XAIKIT_SEED", s),
            None => cmd.env_remove("XAIKIT_SEED"),
        };
        let out = cmd.output().unwrap();
        let r: Value = serde_json::from_slice(&out.stdout).unwrap();
        r["config"]["seed"].as_u64().unwrap()
    };
    assert_eq!(run(None), 0);
    assert_eq!(run(Some("17")), 17);
}
