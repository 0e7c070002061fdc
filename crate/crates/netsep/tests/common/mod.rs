#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_netsep"))
}

pub fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

pub fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn karate() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/karate.txt")
}

/// Small experiment: 12 nodes, 6 observed, lags -5..5 and a tiny network.
pub fn tiny_config(extra: &str) -> String {
    format!(
        r#"{{
  "graph": {{"model": "er", "nodes": 12, "p": 0.5, "seed": 3}},
  "observed": 6,
  "n_grid": [300, 600],
  "runs": 2,
  "burn_in": 200,
  "lags": {{"min": -5, "max": 5}},
  "methods": ["granger", "one_lag", "residual", "r1_minus_r3"],
  "noise": {{"sigma2_grid": [0.25, 1.0], "n": 600}},
  "workers": 2,
  "training": {{
    "n_values": [300, 600],
    "sims_per_n": 1,
    "seed": 4,
    "svm": {{"reg": 1e-3, "epochs": 20}},
    "cnn": {{"conv1_filters": 2, "conv1_kernel": 3, "conv2_filters": 2, "conv2_kernel": 3,
             "hidden": 4, "epochs": 4, "patience": 2, "batch_size": 8}}
  }}{extra}
}}
"#
    )
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

pub fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}
