use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use freev_core::io::{load_tensor, read_wav, write_fvt1};
use serde_json::Value;

fn freev(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freev")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = freev(args);
    assert!(
        out.status.success(),
        "freev {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Runs a command that must fail and returns its diagnostic.
fn fails(args: &[&str]) -> String {
    let out = freev(args);
    assert!(!out.status.success(), "freev {args:?} unexpectedly succeeded");
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "diagnostic is not one line: {err}");
    assert!(err.starts_with("error: "), "{err}");
    err
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture(dir: &Path, kind: &str, duration: &str, seed: &str) -> PathBuf {
    ok(&["fixtures", "--kind", kind, "--duration", duration, "--seed", seed, "--out-dir", s(dir)]);
    dir.join(format!("fixture_{:04}.wav", seed.parse::<u64>().unwrap()))
}

#[test]
fn features_of_one_second_clip() {
    let tmp = tempfile::tempdir().unwrap();
    let wav = fixture(tmp.path(), "harmonic_voice", "1", "0");
    let out = tmp.path().join("feat");
    let stdout = ok(&["features", "--input", s(&wav), "--out-dir", s(&out)]);
    assert!(stdout.contains("[87, 80]"), "{stdout}");
    let mel = load_tensor(out.join("fixture_0000.mel.fvt")).unwrap();
    assert_eq!(mel.shape(), &[87, 80]);
    assert_eq!(load_tensor(out.join("fixture_0000.amp.fvt")).unwrap().shape(), &[87, 513]);

    // Re-encoding the tensor reproduces the file byte for byte.
    let bytes = std::fs::read(out.join("fixture_0000.mel.fvt")).unwrap();
    let mut again = Vec::new();
    write_fvt1(&mut again, &mel).unwrap();
    assert_eq!(bytes, again);
}

#[test]
fn features_of_silence_is_floor() {
    let tmp = tempfile::tempdir().unwrap();
    let wav = fixture(tmp.path(), "silence", "0.5", "0");
    ok(&["features", "--input", s(&wav), "--out-dir", s(tmp.path())]);
    let log_amp = load_tensor(tmp.path().join("fixture_0000.logamp.fvt")).unwrap();
    let floor = (1e-5f64.ln() as f32) as f64;
    assert!(log_amp.iter().all(|&v| v == floor));
}

#[test]
fn wrong_sample_rate_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "[spectral]\nsample_rate = 16000\n").unwrap();
    ok(&["--config", s(&cfg), "fixtures", "--duration", "0.5", "--out-dir", s(tmp.path())]);
    let wav = tmp.path().join("fixture_0000.wav");
    let err = fails(&["features", "--input", s(&wav), "--out-dir", s(tmp.path())]);
    assert!(err.contains("16000"), "{err}");
}

#[test]
fn config_change_propagates_to_shapes() {
    let tmp = tempfile::tempdir().unwrap();
    let wav = fixture(tmp.path(), "noise", "0.5", "1");
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "[spectral]\nn_fft = 2048\nwin_length = 2048\n[mel]\nn_mels = 64\n").unwrap();
    ok(&["--config", s(&cfg), "features", "--input", s(&wav), "--out-dir", s(tmp.path())]);
    assert_eq!(load_tensor(tmp.path().join("fixture_0001.amp.fvt")).unwrap().shape()[1], 1025);
    assert_eq!(load_tensor(tmp.path().join("fixture_0001.mel.fvt")).unwrap().shape()[1], 64);

    std::fs::write(&cfg, "[spectral]\nn_fft = 64\nwin_length = 64\nhop = 16\n").unwrap();
    let err = fails(&["--config", s(&cfg), "features", "--input", s(&wav), "--out-dir", s(tmp.path())]);
    assert!(err.contains("mel filter"), "{err}");
    std::fs::write(&cfg, "[spectral]\nbogus = 1\n").unwrap();
    fails(&["--config", s(&cfg), "features", "--input", s(&wav), "--out-dir", s(tmp.path())]);
}

#[test]
fn bench_prior_reports_selected_methods() {
    let tmp = tempfile::tempdir().unwrap();
    let json = tmp.path().join("pi.json");
    let table = ok(&[
        "bench-prior", "--fixtures", "2", "--duration", "0.5", "--methods", "pi", "--reps", "2", "--out", s(&json),
    ]);
    assert!(table.contains("PI"));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["methods"].as_array().unwrap().len(), 1);
    assert!(tmp.path().join("pi.txt").exists());

    let all = tmp.path().join("all.json");
    ok(&["bench-prior", "--fixtures", "2", "--duration", "0.5", "--reps", "2", "--out", s(&all)]);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&all).unwrap()).unwrap();
    let methods = report["methods"].as_array().unwrap();
    assert_eq!(methods.len(), 4);
    let las = |k: &str| methods.iter().find(|m| m["method"] == k).unwrap()["las_rmse"].as_f64().unwrap();
    assert!(las("pi-abs") < las("pi"));

    let svg = tmp.path().join("fig.svg");
    ok(&["plot", "--report", s(&all), "--out", s(&svg)]);
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches(r#"class="bar""#).count(), 4);
    ok(&["plot", "--report", s(&all), "--report", s(&json), "--out", s(&svg)]);
    assert_eq!(std::fs::read_to_string(&svg).unwrap().matches(r#"class="series""#).count(), 2);
}

#[test]
fn bench_prior_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r.json");
    let empty = tmp.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    fails(&["bench-prior", "--clips", s(&empty), "--out", s(&out)]);
    fails(&["bench-prior", "--fixtures", "0", "--out", s(&out)]);
    fails(&["bench-prior", "--fixtures", "1", "--methods", "svd", "--out", s(&out)]);
}

#[test]
fn plot_rejects_empty_and_malformed_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let report = tmp.path().join("r.json");
    std::fs::write(
        &report,
        r#"{"methods": [], "clip_count": 0, "clip_duration_s": 2.0, "threads": 1, "hardware": "", "timing": ""}"#,
    )
    .unwrap();
    let svg = tmp.path().join("f.svg");
    let err = fails(&["plot", "--report", s(&report), "--out", s(&svg)]);
    assert!(err.contains("empty"), "{err}");
    std::fs::write(&report, "{").unwrap();
    fails(&["plot", "--report", s(&report), "--out", s(&svg)]);
}

#[test]
fn gen_weights_then_vocode() {
    let tmp = tempfile::tempdir().unwrap();
    let weights = tmp.path().join("w.fvw");
    let counts: Value = serde_json::from_str(&ok(&["gen-weights", "--seed", "7", "--out", s(&weights)])).unwrap();
    assert_eq!(counts["asp_convs"], 0);

    let wav = fixture(tmp.path(), "harmonic_voice", "1", "3");
    ok(&["features", "--input", s(&wav), "--out-dir", s(tmp.path())]);
    let mel = tmp.path().join("fixture_0003.mel.fvt");
    let out = tmp.path().join("y.wav");
    let args = ["vocode", "--weights", s(&weights), "--mel", s(&mel), "--out", s(&out)];
    let first: Value = serde_json::from_str(&ok(&args)).unwrap();
    let second: Value = serde_json::from_str(&ok(&args)).unwrap();
    assert_eq!(first["checksum"], second["checksum"]);

    let input = read_wav(&wav).unwrap();
    let output = read_wav(&out).unwrap();
    assert_eq!(output.sample_rate, 22050);
    assert!(input.len().abs_diff(output.len()) <= 256);
    assert!(output.samples.iter().all(|v| v.is_finite()));

    let err = fails(&["vocode", "--weights", s(&mel), "--mel", s(&mel), "--out", s(&out)]);
    assert!(err.contains("FVW1"), "{err}");
}

#[test]
fn eval_on_identical_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("clips");
    ok(&["fixtures", "--count", "2", "--duration", "1", "--out-dir", s(&dir)]);
    let report = tmp.path().join("eval.json");
    let out = Command::new(env!("CARGO_BIN_EXE_freev"))
        .args(["eval", "--ref", s(&dir), "--deg", s(&dir), "--out", s(&report)])
        .env("FREEV_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["pairs"].as_array().unwrap().len(), 2);
    assert!(v["mean"]["mcd"].as_f64().unwrap().abs() < 1e-9);
    assert!((v["mean"]["stoi"].as_f64().unwrap() - 1.0).abs() < 1e-6);

    let bad = Command::new(env!("CARGO_BIN_EXE_freev"))
        .args(["eval", "--ref", s(&dir), "--deg", s(&dir), "--out", s(&report)])
        .env("FREEV_THREADS", "0")
        .output()
        .unwrap();
    assert!(!bad.status.success());
}

#[test]
fn losses_of_self_pair_are_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let wav = fixture(tmp.path(), "chirp", "1", "0");
    let v: Value = serde_json::from_str(&ok(&["losses", "--pred", s(&wav), "--ref", s(&wav)])).unwrap();
    assert!(v["total"].as_f64().unwrap().abs() < 1e-9);
    let noise = fixture(tmp.path(), "noise", "1", "1");
    let v: Value = serde_json::from_str(&ok(&["losses", "--pred", s(&noise), "--ref", s(&wav)])).unwrap();
    assert!(v["total"].as_f64().unwrap() > 0.0);
}

#[test]
fn missing_file_is_a_one_line_error() {
    let err = fails(&["losses", "--pred", "/nonexistent/a.wav", "--ref", "/nonexistent/b.wav"]);
    assert!(err.contains("/nonexistent/a.wav"), "{err}");
}
