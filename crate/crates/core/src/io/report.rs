//! Run reports: per-frame scalars, their means, and everything needed to
//! reproduce the run.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const TOOL_NAME: &str = "matteval";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub frame_id: String,
    /// Scalar results; these feed the aggregates.
    pub metrics: BTreeMap<String, f64>,
    /// Structured extras (statistics, file names, patch logs).
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub details: Value,
}

impl FrameEntry {
    pub fn new(frame_id: impl Into<String>) -> Self {
        FrameEntry {
            frame_id: frame_id.into(),
            metrics: BTreeMap::new(),
            details: Value::Null,
        }
    }

    pub fn metric(mut self, name: &str, value: f64) -> Self {
        self.metrics.insert(name.to_string(), value);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedFrame {
    pub frame_id: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at_unix: Option<u64>,
    pub config: Value,
    pub frames: Vec<FrameEntry>,
    /// Mean of each metric over the frames that report it, in frame order.
    pub aggregates: BTreeMap<String, f64>,
    /// Whole-sequence results that are not per-frame means.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sequence: BTreeMap<String, Value>,
    pub warnings: Vec<String>,
    pub skipped: Vec<SkippedFrame>,
}

impl RunReport {
    pub fn new(command: &str, config: Value) -> Self {
        RunReport {
            tool: TOOL_NAME.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            generated_at_unix: None,
            config,
            frames: Vec::new(),
            aggregates: BTreeMap::new(),
            sequence: BTreeMap::new(),
            warnings: Vec::new(),
            skipped: Vec::new(),
        }
    }

    pub fn stamp_now(&mut self) {
        self.generated_at_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
    }

    /// Rebuilds `aggregates` from `frames`.
    pub fn recompute_aggregates(&mut self) {
        self.aggregates = aggregate(&self.frames);
    }

    pub fn is_partial(&self) -> bool {
        !self.skipped.is_empty()
    }

    /// Pretty JSON with a trailing newline. Map keys are sorted.
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

/// Per-metric mean over the frames that carry it, summed in frame order.
pub fn aggregate(frames: &[FrameEntry]) -> BTreeMap<String, f64> {
    let mut sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for f in frames {
        for (k, &v) in &f.metrics {
            let e = sums.entry(k.as_str()).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    sums.into_iter()
        .map(|(k, (s, n))| (k.to_string(), s / n as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregates_skip_missing_metrics() {
        let mut r = RunReport::new("evaluate", Value::Null);
        r.frames.push(FrameEntry::new("a").metric("mad", 1.0).metric("mse", 4.0));
        r.frames.push(FrameEntry::new("b").metric("mad", 2.0));
        r.recompute_aggregates();
        assert_eq!(r.aggregates["mad"], 1.5);
        assert_eq!(r.aggregates["mse"], 4.0);
    }

    #[test]
    fn json_round_trip_and_no_timestamp() {
        let mut r = RunReport::new("fuse", serde_json::json!({"b": 1, "a": 2}));
        r.frames.push(FrameEntry::new("a").metric("x", 0.1));
        r.recompute_aggregates();
        let s = r.to_json().unwrap();
        assert!(!s.contains("generated_at_unix"));
        assert!(s.find("\"a\": 2").unwrap() < s.find("\"b\": 1").unwrap());
        let back: RunReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }
}
