#![allow(dead_code)]

use std::path::{Path, PathBuf};

use raggednn::data::{write_jsonl, GraphRecord};
use raggednn::models::ModelSpec;
use serde_json::{json, Value};

pub fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("raggednn").chain(args.iter().copied());
    let code = raggednn_cli::run_args(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

pub fn write_dataset(dir: &Path, name: &str, records: &[GraphRecord]) -> PathBuf {
    let path = dir.join(name);
    write_jsonl(&path, records).unwrap();
    path
}

pub fn write_spec(dir: &Path, name: &str, spec: &ModelSpec) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(spec).unwrap()).unwrap();
    path
}

/// Writes a run config naming `model` and a JSONL `dataset`, with `extra`
/// fields merged in.
pub fn write_config(dir: &Path, name: &str, model: &Path, dataset: &Path, extra: Value) -> PathBuf {
    let mut cfg = json!({
        "model": model,
        "dataset": {"jsonl": dataset},
        "output_dir": dir.join("out"),
    });
    for (k, v) in extra.as_object().unwrap() {
        cfg[k] = v.clone();
    }
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
