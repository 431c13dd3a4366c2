#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const SCIENCE_POLICY: &str = r#"
[problem]
preset = "science-policy"

[sampling]
strategy = "LHS"
n_s = 40
seed = 0

[surrogate]
kernel = "linear-spline"
"#;

pub fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

pub fn podrbf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_podrbf"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

/// Runs the full pipeline on the science-policy preset into `out`.
pub fn pipeline(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["pipeline", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    podrbf(&args)
}

pub fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}
