use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["spinsim"];
    full.extend_from_slice(args);
    let code = spinsim_cli::run(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn dir_arg(d: &Path) -> String {
    format!("--output-dir={}", d.display())
}

#[test]
fn noise_reports_proton_numbers() {
    let d = tempfile::tempdir().unwrap();
    let (code, out, _) = run(&["noise", &dir_arg(d.path())]);
    assert_eq!(code, 0);
    assert!(out.contains("negative"));
    let r = json(&d.path().join("noise_report.json"));
    let p = r["probability"].as_f64().unwrap();
    assert!(p < 0.0 && (1.9e-16..=2.3e-16).contains(&p.abs()));
    assert_eq!(r["amplitude_ratio"].as_f64().unwrap(), p.abs().sqrt());
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);

    let (code, _, _) = run(&["noise", &dir_arg(d.path()), "--kprime_J=0"]);
    assert_eq!(code, 0);
    let r = json(&d.path().join("noise_report.json"));
    assert_eq!(r["probability"].as_f64().unwrap(), 0.0);
    assert_eq!(r["sign"], "zero");
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn spin_static_norm_column() {
    let d = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&["spin", &dir_arg(d.path())]);
    assert_eq!(code, 0, "{err}");
    let text = fs::read_to_string(d.path().join("trajectory_oracle.csv")).unwrap();
    assert!(text.starts_with("# config_hash="));
    for row in csv_rows(&d.path().join("trajectory_oracle.csv")) {
        assert!((row[5] - 1.0).abs() <= 1e-12);
    }
    let r = json(&d.path().join("deviation_report.json"));
    assert!(r["max_deviation"].as_f64().unwrap() < 1e-8);
}

#[test]
fn spin_rf_pi_pulse_transfers_population() {
    let d = tempfile::tempdir().unwrap();
    let gamma = 2.675_221_874_4e8;
    let t_pi = std::f64::consts::PI / (gamma * 1e-7);
    let t_arg = format!("--t_end_s={t_pi}");
    let (code, _, err) = run(&["spin", "--case=rf", "--initial=[0,0,1,0]", &t_arg, &dir_arg(d.path())]);
    assert_eq!(code, 0, "{err}");
    let r = json(&d.path().join("deviation_report.json"));
    assert!(r["final_oracle"]["p_ground"].as_f64().unwrap() > 1.0 - 1e-8);
    assert!(r["final_closed_form"]["p_ground"].as_f64().unwrap() > 1.0 - 1e-12);
}

#[test]
fn spin_general_random_fields() {
    for seed in [1, 2, 3] {
        let d = tempfile::tempdir().unwrap();
        let s = format!("--seed={seed}");
        let (code, _, err) = run(&["spin", "--case=general", "--randomize_fields=true", &s, &dir_arg(d.path())]);
        assert_eq!(code, 0, "{err}");
        let r = json(&d.path().join("deviation_report.json"));
        assert!(r["max_deviation"].as_f64().unwrap() < 1e-8);
    }
}

#[test]
fn spin_tolerance_breach_exits_3() {
    let d = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&["spin", "--steps_per_period=80", &dir_arg(d.path())]);
    assert_eq!(code, 3, "{err}");
    assert!(d.path().join("deviation_report.json").exists());
}

#[test]
fn config_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run(&["spin", "--nonsense=1", &dir_arg(d.path())]).0, 2);
    assert_eq!(run(&["spin", "--case=quantum", &dir_arg(d.path())]).0, 2);
    assert_eq!(run(&["sequence", "--te_s=0.01", &dir_arg(d.path())]).0, 2);
    assert_eq!(run(&["sequence", "--matrix=[100,100]", &dir_arg(d.path())]).0, 2);
    assert_eq!(run(&["image", "--config=/nonexistent.json", &dir_arg(d.path())]).0, 2);
    assert_eq!(run(&["frobnicate"]).0, 2);
    let cfg = d.path().join("bad.json");
    fs::write(&cfg, "[1, 2]").unwrap();
    assert_eq!(run(&["noise", &format!("--config={}", cfg.display()), &dir_arg(d.path())]).0, 2);
}

#[test]
fn config_file_and_override_precedence() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("seq.json");
    fs::write(&cfg, r#"{"matrix": [64, 32], "tr_s": 0.01}"#).unwrap();
    let c = format!("--config={}", cfg.display());
    let (code, _, err) = run(&["sequence", &c, "--tr_s=0.02", &dir_arg(d.path())]);
    assert_eq!(code, 0, "{err}");
    let r = json(&d.path().join("sequence.json"));
    assert_eq!(r["steps"], 32);
    assert!((r["total_acquisition_time_s"].as_f64().unwrap() - 0.64).abs() < 1e-12);
}

#[test]
fn sequence_reference_protocol() {
    let d = tempfile::tempdir().unwrap();
    let (code, out, _) = run(&["sequence", &dir_arg(d.path())]);
    assert_eq!(code, 0);
    assert!(out.contains("1.024000 s"));
    let r = json(&d.path().join("sequence.json"));
    assert_eq!(r["violations"].as_array().unwrap().len(), 0);
    assert!(r["max_echo_read_moment"].as_f64().unwrap() < 1e-12);
    let events = fs::read_to_string(d.path().join("events.csv")).unwrap();
    assert!(events.lines().any(|l| l == "event_type,axis,start_s,duration_s,amplitude"));
}

#[test]
fn image_default_orders_snr() {
    let d = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&["image", &dir_arg(d.path())]);
    assert_eq!(code, 0, "{err}");
    for f in ["phantom.pgm", "image_with_rf.pgm", "image_without_rf.pgm", "kspace_with_rf.csv", "kspace_without_rf.csv"] {
        let bytes = fs::read(d.path().join(f)).unwrap();
        let head = String::from_utf8_lossy(&bytes[..200.min(bytes.len())]).to_string();
        assert!(head.contains("# config_hash="), "{f}");
    }
    let r = json(&d.path().join("image_report.json"));
    assert_eq!(r["snr_with_exceeds_without"], true);
    let models: Vec<&str> = r["without_rf"].as_array().unwrap().iter().map(|m| m["amp_model"].as_str().unwrap()).collect();
    assert_eq!(models, ["sqrt", "linear"]);
}

#[test]
fn image_uniform_with_rf_only() {
    let d = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&["image", "--phantom=uniform", "--mode=with_rf", &dir_arg(d.path())]);
    assert_eq!(code, 0, "{err}");
    let r = json(&d.path().join("image_report.json"));
    assert!(r["with_rf"]["correlation"].as_f64().unwrap() >= 0.95);
    assert!(r["without_rf"].as_array().unwrap().is_empty());
    assert!(!d.path().join("image_without_rf.pgm").exists());
}

#[test]
fn image_zero_phantom() {
    let d = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&["image", "--phantom=zero", "--noise_sigma=0", "--pgm_format=p2", &dir_arg(d.path())]);
    assert_eq!(code, 0, "{err}");
    let r = json(&d.path().join("image_report.json"));
    assert_eq!(r["with_rf"]["snr"]["status"], "NoNoise");
    let pgm = fs::read_to_string(d.path().join("image_with_rf.pgm")).unwrap();
    let pixels: Vec<&str> = pgm.lines().filter(|l| !l.starts_with('#')).skip(3).flat_map(|l| l.split(' ')).collect();
    assert_eq!(pixels.len(), 64 * 64);
    assert!(pixels.iter().all(|p| *p == "0"));
}

#[test]
fn verify_passes_and_fault_is_named() {
    let (code, out, _) = run(&["verify"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("oracle_general"));
    let (code, _, err) = run(&["verify", "--inject-fault=kronecker_evolution"]);
    assert_eq!(code, 3);
    assert!(err.contains("kronecker_evolution"));
}

fn read_dir_bytes(d: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(d)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().to_string(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn binary_output_independent_of_thread_count() {
    let exe = env!("CARGO_BIN_EXE_spinsim");
    let mut outputs = Vec::new();
    for threads in ["1", "4", "4"] {
        let d = tempfile::tempdir().unwrap();
        let status = Command::new(exe)
            .args(["image", "--seed=7"])
            .arg(dir_arg(d.path()))
            .env("SPINSIM_THREADS", threads)
            .output()
            .unwrap();
        assert!(status.status.success());
        outputs.push(read_dir_bytes(d.path()));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);

    let bad = Command::new(exe).args(["noise", "--output-dir=/tmp"]).env("SPINSIM_THREADS", "zero").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
