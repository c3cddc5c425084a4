use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn rydabs(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rydabs"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn only_run(dir: &Path, command: &str, n: usize) -> PathBuf {
    dir.join(format!("{command}-{n:03}"))
}

#[test]
fn fixed_seed_reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for _ in 0..2 {
        let out = rydabs(tmp.path(), &["sweep", "--shots", "2000", "--seed", "7"]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for file in ["sweep.csv", "summary.json", "config.json"] {
        let a = fs::read(only_run(tmp.path(), "sweep", 1).join(file)).unwrap();
        let b = fs::read(only_run(tmp.path(), "sweep", 2).join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
}

#[test]
fn zero_input_row_is_emitted_with_missing_ion_ratio() {
    let tmp = tempfile::tempdir().unwrap();
    let out = rydabs(
        tmp.path(),
        &["sweep", "--shots", "500", "--set", "sweep.n_in=[0, 2]"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(only_run(tmp.path(), "sweep", 1).join("sweep.csv")).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let headers = rows.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let first = rows.records().next().unwrap().unwrap();
    assert_eq!(&first[col("n_in_photons")], "0");
    assert_eq!(&first[col("n_out_photons")], "0");
    assert_eq!(&first[col("ion_q_over_mean")], "");
    assert_eq!(&first[col("p_no_absorption")], "1");
}

#[test]
fn invalid_input_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        &["sweep", "--shots", "0"][..],
        &["pulse", "--set", "absorber.p_ryd=1.5"],
        &["pulse", "--set", "no_such.key=1"],
        &["frobnicate"],
    ] {
        let out = rydabs(tmp.path(), args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn validate_passes_and_catches_a_wrong_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = rydabs(tmp.path(), &["validate", "--shots", "20000"]);
    assert_eq!(
        ok.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&ok.stdout)
    );
    let bad = rydabs(
        tmp.path(),
        &["validate", "--shots", "20000", "--oracle-p-ryd", "0.2"],
    );
    assert_eq!(bad.status.code(), Some(2));
    let summary: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(only_run(tmp.path(), "validate", 2).join("summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["passed"], false);
}

#[test]
fn spectrum_feeds_back_into_the_fit() {
    let tmp = tempfile::tempdir().unwrap();
    let out = rydabs(tmp.path(), &["spectrum", "--set", "physics.gamma_deph=0.3"]);
    assert!(out.status.success());
    let data = only_run(tmp.path(), "spectrum", 1).join("spectrum.csv");
    let out = rydabs(tmp.path(), &["fit-gamma", "--data", data.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(only_run(tmp.path(), "fit-gamma", 1).join("summary.json")).unwrap(),
    )
    .unwrap();
    let gamma = summary["gamma_mhz"].as_f64().unwrap();
    assert!((gamma / 0.3 - 1.0).abs() < 1e-6, "{gamma}");
}

#[test]
fn cascade_resolves_a_fock_state() {
    let tmp = tempfile::tempdir().unwrap();
    let out = rydabs(
        tmp.path(),
        &[
            "cascade",
            "--shots",
            "2000",
            "--fock",
            "3",
            "--set",
            "absorber.p_ryd=1",
            "--set",
            "absorber.p_ryd2=0",
            "--set",
            "absorber.t=1",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(only_run(tmp.path(), "cascade", 1).join("summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["exact_count_fraction"], 1.0);
}

#[test]
fn json_config_is_accepted() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    fs::write(
        &cfg,
        r#"{ "run": { "shots": 300 }, "g2": { "cell_ns": 200 } }"#,
    )
    .unwrap();
    let out = rydabs(tmp.path(), &["g2", "--config", cfg.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let g2 = fs::read_to_string(only_run(tmp.path(), "g2", 1).join("g2.csv")).unwrap();
    // 2 µs pulse in 200 ns cells: a 10 x 10 map plus header
    assert_eq!(g2.lines().count(), 101);
}
