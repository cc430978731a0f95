//! Helpers for driving the binary from integration tests.
#![allow(dead_code)]

#[path = "../../../core/tests/common/mod.rs"]
pub mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub fn matteval(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_matteval"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

pub fn read_report(out_dir: &Path) -> Value {
    let text = fs::read_to_string(out_dir.join("report.json")).expect("report written");
    serde_json::from_str(&text).expect("report is JSON")
}

/// Structural check of a run report against its documented layout.
pub fn validate_report(v: &Value, command: &str) -> Result<(), String> {
    let obj = v.as_object().ok_or("report is not an object")?;
    let known = [
        "tool",
        "version",
        "command",
        "generated_at_unix",
        "config",
        "frames",
        "aggregates",
        "sequence",
        "warnings",
        "skipped",
    ];
    if let Some(k) = obj.keys().find(|k| !known.contains(&k.as_str())) {
        return Err(format!("unexpected key `{k}`"));
    }
    if v["tool"] != "matteval" {
        return Err(format!("tool is {}", v["tool"]));
    }
    if !v["version"].is_string() {
        return Err("version missing".into());
    }
    if v["command"] != command {
        return Err(format!("command is {}, expected {command}", v["command"]));
    }
    if let Some(t) = obj.get("generated_at_unix") {
        if !t.is_u64() {
            return Err("generated_at_unix is not an integer".into());
        }
    }
    for key in ["defaults", "effective"] {
        if !v["config"][key].is_object() {
            return Err(format!("config.{key} missing"));
        }
    }
    let frames = v["frames"].as_array().ok_or("frames is not an array")?;
    let mut sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for (i, f) in frames.iter().enumerate() {
        if !f["frame_id"].is_string() {
            return Err(format!("frames[{i}].frame_id missing"));
        }
        let metrics = f["metrics"].as_object().ok_or(format!("frames[{i}].metrics missing"))?;
        for (k, m) in metrics {
            let x = m.as_f64().ok_or(format!("frames[{i}].metrics.{k} is not a number"))?;
            let e = sums.entry(k).or_insert((0.0, 0));
            e.0 += x;
            e.1 += 1;
        }
    }
    let aggregates = v["aggregates"].as_object().ok_or("aggregates is not an object")?;
    if aggregates.len() != sums.len() {
        return Err(format!("{} aggregates for {} metrics", aggregates.len(), sums.len()));
    }
    for (k, (s, n)) in sums {
        let want = s / n as f64;
        let got = aggregates.get(k).and_then(Value::as_f64).ok_or(format!("aggregate {k} missing"))?;
        if (got - want).abs() > 1e-9 * want.abs().max(1.0) {
            return Err(format!("aggregate {k} is {got}, frames give {want}"));
        }
    }
    if let Some(seq) = obj.get("sequence") {
        if !seq.is_object() {
            return Err("sequence is not an object".into());
        }
    }
    let warnings = v["warnings"].as_array().ok_or("warnings is not an array")?;
    if !warnings.iter().all(Value::is_string) {
        return Err("non-string warning".into());
    }
    let skipped = v["skipped"].as_array().ok_or("skipped is not an array")?;
    for s in skipped {
        if !s["frame_id"].is_string() || !s["reason"].is_string() {
            return Err("malformed skipped entry".into());
        }
    }
    Ok(())
}

/// Manifest for the fused outputs of `fuse_dir`, ready for `nonref` and
/// `evaluate`.
pub fn fused_manifest(seq: &common::Sequence, fuse_dir: &Path, path: &Path) -> PathBuf {
    let frames: Vec<Value> = seq
        .frame_ids
        .iter()
        .map(|id| {
            serde_json::json!({
                "frame_id": id,
                "rgb_path": seq.dir.join(format!("{id}.rgb.png")),
                "gt_path": seq.dir.join(format!("{id}.gt.pfm")),
                "seg_path": seq.dir.join(format!("{id}.seg.png")),
                "pred_path": fuse_dir.join(format!("{id}.alpha.pfm")),
                "eval_path": fuse_dir.join(format!("{id}.eval.png")),
            })
        })
        .collect();
    let body = serde_json::json!({"version": 1, "frames": frames});
    fs::write(path, serde_json::to_string_pretty(&body).unwrap()).unwrap();
    path.to_path_buf()
}

/// Every file under `dir`, relative path to bytes.
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}
