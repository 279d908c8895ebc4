//! Run artifacts: `results.csv`, `summary.json` and `manifest.json`.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use hypokit_core::EstimateReport;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::ResolvedConfig;
use crate::experiments::Outcome;

pub const RESULTS: &str = "results.csv";
pub const SUMMARY: &str = "summary.json";
pub const MANIFEST: &str = "manifest.json";

/// Shortest round-trip decimal; empty for absent values.
fn fmt_f64(x: Option<f64>) -> String {
    x.map(|v| format!("{v}")).unwrap_or_default()
}

/// RFC-4180 table with one row per report: `row`, `name`, context columns, `lhs`, `rhs`,
/// `ratio`, metric columns and tag columns, each group in sorted key order.
pub fn write_results<W: Write>(rows: &[EstimateReport], w: W) -> csv::Result<()> {
    let ctx: BTreeSet<&String> = rows.iter().flat_map(|r| r.context.keys()).collect();
    let met: BTreeSet<&String> = rows.iter().flat_map(|r| r.metrics.keys()).collect();
    let tag: BTreeSet<&String> = rows.iter().flat_map(|r| r.tags.keys()).collect();
    let col = |k: &String, taken: &BTreeSet<&String>, prefix: &str| {
        if taken.contains(k) {
            format!("{prefix}{k}")
        } else {
            k.clone()
        }
    };
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["row".to_string(), "name".to_string()];
    header.extend(ctx.iter().map(|k| k.to_string()));
    header.extend(["lhs", "rhs", "ratio"].map(String::from));
    header.extend(met.iter().map(|k| col(k, &ctx, "metric_")));
    let ctx_met: BTreeSet<&String> = ctx.union(&met).copied().collect();
    header.extend(tag.iter().map(|k| col(k, &ctx_met, "tag_")));
    out.write_record(&header)?;
    for (i, r) in rows.iter().enumerate() {
        let mut rec = vec![i.to_string(), r.name.clone()];
        rec.extend(ctx.iter().map(|k| fmt_f64(r.context.get(*k).copied())));
        rec.extend([r.lhs, r.rhs, r.ratio].map(|v| fmt_f64(Some(v))));
        rec.extend(met.iter().map(|k| fmt_f64(r.metrics.get(*k).copied())));
        rec.extend(tag.iter().map(|k| r.tags.get(*k).cloned().unwrap_or_default()));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

/// Summary object: experiment, status, headline numbers, every summary metric as a
/// top-level key, the context, tags and the checks.
pub fn summary_json(cfg: &ResolvedConfig, outcome: &Outcome) -> Value {
    let s = &outcome.summary;
    let mut m = Map::new();
    m.insert("experiment".into(), json!(cfg.experiment.name()));
    m.insert("status".into(), json!(if outcome.passed() { "pass" } else { "fail" }));
    m.insert("rows".into(), json!(outcome.rows.len()));
    m.insert("lhs".into(), num(s.lhs));
    m.insert("rhs".into(), num(s.rhs));
    m.insert("ratio".into(), num(s.ratio));
    if let Some(v) = s.fitted_exponent {
        m.insert("fitted_exponent".into(), num(v));
    }
    if let Some(v) = s.fitted_constant {
        m.insert("fitted_constant".into(), num(v));
    }
    for (k, v) in &s.metrics {
        m.entry(k.clone()).or_insert_with(|| num(*v));
    }
    m.insert("context".into(), Value::Object(s.context.iter().map(|(k, v)| (k.clone(), num(*v))).collect()));
    m.insert("tags".into(), json!(s.tags));
    let checks: Vec<Value> = outcome
        .checks
        .iter()
        .map(|c| {
            json!({
                "tolerance": c.tolerance, "metric": c.metric, "value": num(c.value),
                "kind": c.kind, "bound": num(c.bound), "pass": c.pass,
            })
        })
        .collect();
    m.insert("checks".into(), Value::Array(checks));
    Value::Object(m)
}

/// Everything needed to reproduce and audit a run.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub config_path: String,
    pub config: &'a ResolvedConfig,
    pub rng: &'static str,
    pub seed: u64,
    pub threads: usize,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
    pub exit_code: i32,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn write_json(path: &Path, value: &impl Serialize) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}
