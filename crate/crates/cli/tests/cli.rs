use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use snn_dlbp::checkpoint::load_weights;
use snn_dlbp::network::NetworkWeights;
use snn_dlbp::tuning::init_weights;
use snn_dlbp_cli::Report;

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snn-dlbp"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Report {
    let out = run_in(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    Report::parse(&String::from_utf8(out.stdout).unwrap()).unwrap()
}

fn f(r: &Report, key: &str) -> f64 {
    r.results[key].as_f64().unwrap_or_else(|| panic!("{key} missing in {}", r.results))
}

/// Bars train/test sets, a 256x64 network file and its initial weights.
fn bars_setup(dir: &Path) {
    ok(dir, &["--seed", "1", "events", "synth", "--kind", "bars", "--count", "25", "--out", "train"]);
    ok(dir, &["--seed", "2", "events", "synth", "--kind", "bars", "--count", "25", "--out", "test"]);
    fs::write(dir.join("net.toml"), "n = 256\nm = 64\nmu = 0.25\n").unwrap();
    ok(dir, &["--config", "net.toml", "train", "--events", "train", "--epochs", "0", "--checkpoint", "w.snnw"]);
    fs::write(
        dir.join("exp.toml"),
        "network = \"net.toml\"\nweights = \"w.snnw\"\ntrain = \"train\"\ntest = \"test\"\nout_dir = \"run\"\n",
    )
    .unwrap();
}

#[test]
fn toy_pipeline_classifies_and_reproduces() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    bars_setup(dir);
    let a = ok(dir, &["pipeline", "exp.toml"]);
    assert!(f(&a, "accuracy") >= 0.9, "{}", a.results);
    assert!(a.results["inference_power"]["watts"].as_f64().unwrap() >= 146e-6);
    let saved = Report::parse(&fs::read_to_string(dir.join("run/report.json")).unwrap()).unwrap();
    assert_eq!(saved, a);
    let feats = fs::read(dir.join("run/test_features.csv")).unwrap();

    let b = ok(dir, &["pipeline", "exp.toml"]);
    assert_eq!(Report { timing: Value::Null, ..a }, Report { timing: Value::Null, ..b });
    assert_eq!(fs::read(dir.join("run/test_features.csv")).unwrap(), feats);
}

#[test]
fn dry_run_touches_no_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    bars_setup(dir);
    let r = ok(dir, &["pipeline", "exp.toml", "--dry-run"]);
    assert_eq!(r.results["dry_run"], Value::Bool(true));
    assert!(r.outputs.is_empty());
    assert!(!dir.join("run").exists());
}

#[test]
fn pipeline_without_checkpoint_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    bars_setup(dir);
    fs::remove_file(dir.join("w.snnw")).unwrap();
    let out = run_in(dir, &["pipeline", "exp.toml", "--dry-run"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("weights checkpoint"));
}

#[test]
fn zero_epochs_writes_initial_weights() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["events", "synth", "--kind", "sparse", "--count", "10", "--out", "data"]);
    fs::write(dir.join("net.toml"), "n = 32\nm = 64\n").unwrap();
    let r = ok(dir, &["--seed", "7", "--config", "net.toml", "train", "--events", "data", "--epochs", "0"]);
    assert_eq!(r.results["epochs"], 0);
    let w = load_weights(dir.join("weights.snnw")).unwrap();
    assert_eq!(w, NetworkWeights::from_phi(init_weights(32, 64, 1.0, 0.5, 7).unwrap()));
}

#[test]
fn training_stops_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["events", "synth", "--kind", "sparse", "--count", "50", "--duration", "4", "--out", "data"]);
    fs::write(dir.join("net.toml"), "n = 32\nm = 64\nmu = 0.25\n").unwrap();
    let args = ["--seed", "1", "--config", "net.toml", "train", "--events", "data", "--duration", "4"];
    let a = ok(dir, &[&args[..], &["--out-dir", "a"]].concat());
    let b = ok(dir, &[&args[..], &["--out-dir", "b"]].concat());
    assert_eq!(a.results, b.results);
    assert_eq!(a.results["stopped"], Value::Bool(true), "{}", a.results);
    assert!(f(&a, "final_validation_loss") <= 0.5 * f(&a, "initial_validation_loss"), "{}", a.results);
    assert_eq!(fs::read(dir.join("a/weights.snnw")).unwrap(), fs::read(dir.join("b/weights.snnw")).unwrap());
    let curve = fs::read_to_string(dir.join("a/loss.csv")).unwrap();
    assert_eq!(curve, fs::read_to_string(dir.join("b/loss.csv")).unwrap());
    assert_eq!(curve.lines().count(), 2 + a.results["epochs"].as_u64().unwrap() as usize);
}

#[test]
fn simulate_then_power() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["events", "synth", "--kind", "sparse", "--count", "2", "--out", "data"]);
    fs::write(dir.join("net.toml"), "n = 32\nm = 64\n").unwrap();
    let sim = ok(
        dir,
        &["--config", "net.toml", "simulate", "--events", "data/sample_0000.evs", "--trace", "trace.csv"],
    );
    assert!(f(&sim, "inner_loss") > 0.0);
    let trace = fs::read_to_string(dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with("t_end,inner_loss,c0,"));
    assert_eq!(trace.lines().count(), 1 + 4);

    let p = ok(dir, &["power", "--trace", "activity.csv"]);
    assert_eq!(p.results["counts"]["n_write"], 0);
    assert!(f(&p, "watts") > 146e-6);
    fs::write(dir.join("hw.toml"), "e_read = 1e-12\n").unwrap();
    let with_mem = ok(dir, &["power", "--trace", "activity.csv", "--hw", "hw.toml"]);
    assert!(f(&with_mem, "watts") > f(&p, "watts"));
    assert!(f(&with_mem, "memory_watts") > 0.0);

    let learn = ok(
        dir,
        &["--config", "net.toml", "simulate", "--events", "data/sample_0000.evs", "--learn", "--activity", "learn.csv", "--save-weights", "after.snnw"],
    );
    assert!(learn.results["weight_writes"].as_u64().unwrap() > 0);
    let lp = ok(dir, &["power", "--trace", "learn.csv", "--hw", "hw.toml"]);
    assert!(lp.results["counts"]["n_write"].as_u64().unwrap() > 0);
    assert!(load_weights(dir.join("after.snnw")).is_ok());
}

#[test]
fn kernel_and_spectrum_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let k = ok(dir, &["tune", "kernel", "--tau-minus", "0.008", "--alpha", "0.8"]);
    assert!((k.results["params"]["tau_plus"].as_f64().unwrap() - 0.0208).abs() < 1e-15);
    assert!((f(&k, "zero") - 1.0 / 0.0208).abs() < 1e-9);
    let s = ok(dir, &["tune", "spectrum", "--tau-plus", "0.008", "--points", "11"]);
    assert!(f(&s, "flatness_0_2") > 0.05);
    assert_eq!(fs::read_to_string(dir.join("spectrum.csv")).unwrap().lines().count(), 12);
}

#[test]
fn analysis_commands_write_their_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let prox = ok(dir, &["neuron", "prox-curve", "--steps", "21", "--duration", "20"]);
    assert!((0.85..=1.35).contains(&f(&prox, "slope")));
    assert_eq!(fs::read_to_string(dir.join("curve.csv")).unwrap().lines().count(), 22);

    let stdp = ok(dir, &["stdp", "compare", "--synapses", "400"]);
    assert!(f(&stdp, "pearson") > 0.9);
    assert!(!run_in(dir, &["stdp", "compare", "--synapses", "399"]).status.success());

    let oracle = ok(dir, &["oracle", "check", "--seeds", "4"]);
    assert!(f(&oracle, "max_gap") <= 1e-8);
    assert_eq!(fs::read_to_string(dir.join("oracle.csv")).unwrap().lines().count(), 5);

    ok(dir, &["--seed", "3", "events", "synth", "--kind", "bars", "--count", "1", "--out", "bars"]);
    let info = ok(dir, &["events", "info", "bars/sample_0000.evs"]);
    assert_eq!((info.results["width"].as_u64(), info.results["height"].as_u64()), (Some(16), Some(16)));
    let spec = ok(dir, &["events", "spectrum", "bars/sample_0000.evs", "--pixel", "8,8"]);
    // 200 samples of one second give the one-sided 101 bins.
    assert_eq!(spec.results["bins"], 101);
    assert!(!run_in(dir, &["events", "spectrum", "bars/sample_0000.evs", "--pixel", "16,0"]).status.success());
}

#[test]
fn threshold_sweep_and_encode_modes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["events", "synth", "--kind", "sparse", "--count", "4", "--duration", "2", "--out", "data"]);
    fs::write(dir.join("net.toml"), "n = 32\nm = 64\n").unwrap();
    let t = ok(
        dir,
        &["--config", "net.toml", "tune", "threshold", "--events", "data", "--grid", "1:100:5", "--error-mu", "0.25"],
    );
    let mu_hat = f(&t, "mu_hat");
    assert!((1.0..=100.0).contains(&mu_hat));
    assert_eq!(fs::read_to_string(dir.join("aicc.csv")).unwrap().lines().count(), 6);

    for mode in ["global", "action"] {
        let e = ok(dir, &["--config", "net.toml", "encode", "--mode", mode, "--events", "data", "--out", "f.csv"]);
        assert_eq!(e.results["samples"], 4);
        assert_eq!(e.results["labelled"], Value::Bool(false));
    }

    ok(dir, &["--seed", "4", "events", "synth", "--kind", "bars", "--count", "2", "--out", "bars"]);
    fs::write(dir.join("patch.toml"), "n = 64\nm = 8\n").unwrap();
    let c = ok(dir, &["--config", "patch.toml", "encode", "--mode", "conv", "--events", "bars", "--scales", "1,3", "--out", "c.csv"]);
    // 3x3 patches pooled at scales 1 and 3: (1 + 9) cells of 8 channels.
    assert_eq!(c.results["features"], 10 * 8);
    assert_eq!(c.results["labelled"], Value::Bool(true));
}

#[test]
fn bad_inputs_fail_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let no_cfg = run_in(dir, &["simulate", "--events", "nothing.evs"]);
    assert!(!no_cfg.status.success());
    assert!(String::from_utf8_lossy(&no_cfg.stderr).contains("--config"));
    fs::write(dir.join("empty.csv"), "").unwrap();
    assert!(!run_in(dir, &["power", "--trace", "empty.csv"]).status.success());
    fs::write(dir.join("bad.toml"), "n = 2\nm = 3\nbogus = 1\n").unwrap();
    assert!(!run_in(dir, &["--config", "bad.toml", "simulate", "--events", "x.evs"]).status.success());
}
