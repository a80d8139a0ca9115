// SPDX-License-Identifier: MPL-2.0

//! Run reports: JSON (stable field order, maps sorted) plus a flat CSV
//! rendering. Timing lives in its own subtree so deterministic comparisons
//! can strip it.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Debug, Serialize, Deserialize, Default)]
pub struct ReportConfig {
    pub mode: String,
    pub clients: u64,
    pub bits: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    pub threshold: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dp_epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dp_delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zipf_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zipf_support: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, Default)]
pub struct OutcomeReport {
    /// Heavy hitters (or per-candidate counts for histogram runs) as hex.
    pub heavy_hitters: Vec<String>,
    /// Weight per output string.
    pub weights: BTreeMap<String, i64>,
    /// Heavy prefixes observed across levels (the protocol's leakage), count
    /// only.
    pub heavy_prefix_count: u64,
    pub disqualified: u64,
    pub upload_disqualified: u64,
    pub unmatched: u64,
    pub queries: u64,
    pub exact_match: Option<bool>,
}

#[derive(Clone, Debug, Serialize, Deserialize, Default)]
pub struct LevelComm {
    pub level: u16,
    pub candidates: u64,
    pub active: u64,
    pub field_bytes: u64,
    pub bytes_r1: u64,
    pub bytes_r2: u64,
    pub bytes_weights: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize, Default)]
pub struct CommReport {
    pub sketch_r1_bytes: u64,
    pub sketch_r2_bytes: u64,
    pub weight_bytes: u64,
    pub control_bytes: u64,
    pub total_sent_bytes: u64,
    pub messages: u64,
    pub upload_bytes_per_client: u64,
    /// Measured per-level bytes equal the closed-form schema budget
    /// (4 field elements per client per level for sketching plus one weight
    /// share per queried parent).
    pub accounting_ok: bool,
    pub per_level: Vec<LevelComm>,
}

#[derive(Clone, Debug, Serialize, Deserialize, Default)]
pub struct TimingReport {
    pub ingest_seconds: f64,
    pub aggregate_seconds: f64,
    pub total_seconds: f64,
    pub clients_per_second: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, Default)]
pub struct Report {
    pub config: ReportConfig,
    pub outcome: OutcomeReport,
    pub communication: CommReport,
    pub prg_calls: u64,
    pub timing: TimingReport,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// JSON with the timing subtree removed, for byte-identical comparisons
    /// across runs with the same master seed.
    pub fn deterministic_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v.as_object_mut().unwrap().remove("timing");
        serde_json::to_string_pretty(&v).unwrap()
    }

    /// Flat `key,value` CSV, one row per scalar (lists flattened by index).
    pub fn to_csv(&self) -> String {
        let v = serde_json::to_value(self).expect("report serializes");
        let mut rows = vec![("key".to_string(), "value".to_string())];
        flatten("", &v, &mut rows);
        rows.into_iter()
            .map(|(k, val)| format!("{k},{val}\n"))
            .collect()
    }
}

fn flatten(prefix: &str, v: &serde_json::Value, out: &mut Vec<(String, String)>) {
    match v {
        serde_json::Value::Object(map) => {
            for (k, val) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, val, out);
            }
        }
        serde_json::Value::Array(items) => {
            for (i, val) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), val, out);
            }
        }
        other => out.push((prefix.to_string(), other.to_string())),
    }
}
