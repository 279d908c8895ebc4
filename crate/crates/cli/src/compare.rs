//! Comparison of two run directories: parameter deltas from the manifests and
//! metric deltas from the summaries.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::output::{MANIFEST, SUMMARY};

/// Relative change above which a metric is flagged.
pub const FLAG_THRESHOLD: f64 = 0.10;

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("missing manifest {0}")]
    MissingManifest(PathBuf),
    #[error("missing summary {0}")]
    MissingSummary(PathBuf),
    #[error("cannot parse {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamDelta {
    pub key: String,
    pub a: Value,
    pub b: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricDelta {
    pub metric: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub relative_change: Option<f64>,
    pub flagged: bool,
    /// `improved` or `regressed` for error-like metrics, `changed` otherwise.
    pub verdict: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub params: Vec<ParamDelta>,
    pub metrics: Vec<MetricDelta>,
}

impl CompareReport {
    pub fn is_empty(&self) -> bool {
        self.params.is_empty() && self.metrics.is_empty()
    }

    pub fn render(&self) -> String {
        if self.is_empty() {
            return "no differences\n".into();
        }
        let mut out = String::new();
        if !self.params.is_empty() {
            out.push_str("parameters:\n");
            for p in &self.params {
                out.push_str(&format!("  {:<32} {} -> {}\n", p.key, p.a, p.b));
            }
        }
        if !self.metrics.is_empty() {
            out.push_str("metrics:\n");
            for m in &self.metrics {
                let show = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_else(|| "-".into());
                let rel = m.relative_change.map(|r| format!("{:+.1}%", 100.0 * r)).unwrap_or_else(|| "-".into());
                let flag = if m.flagged { format!("  [{}]", m.verdict) } else { String::new() };
                out.push_str(&format!("  {:<32} {:>14} {:>14} {:>9}{flag}\n", m.metric, show(m.a), show(m.b), rel));
            }
        }
        out
    }
}

fn read_json(path: &Path, missing: fn(PathBuf) -> CompareError) -> Result<Value, CompareError> {
    let text = std::fs::read_to_string(path).map_err(|_| missing(path.to_path_buf()))?;
    serde_json::from_str(&text).map_err(|e| CompareError::Parse { path: path.to_path_buf(), reason: e.to_string() })
}

/// Dotted-path leaves of a JSON value.
fn flatten(prefix: &str, v: &Value, out: &mut BTreeMap<String, Value>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        _ => {
            out.insert(prefix.to_string(), v.clone());
        }
    }
}

/// Numeric top-level summary entries.
fn metrics(summary: &Value) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    if let Value::Object(m) = summary {
        for (k, v) in m {
            if k == "rows" {
                continue;
            }
            if let Some(x) = v.as_f64() {
                out.insert(k.clone(), x);
            }
        }
    }
    out
}

fn lower_is_better(name: &str) -> bool {
    ["defect", "residual", "error", "deviation"].iter().any(|s| name.contains(s))
}

pub fn compare_runs(a: &Path, b: &Path) -> Result<CompareReport, CompareError> {
    let ma = read_json(&a.join(MANIFEST), CompareError::MissingManifest)?;
    let mb = read_json(&b.join(MANIFEST), CompareError::MissingManifest)?;
    let sa = read_json(&a.join(SUMMARY), CompareError::MissingSummary)?;
    let sb = read_json(&b.join(SUMMARY), CompareError::MissingSummary)?;

    let (mut pa, mut pb) = (BTreeMap::new(), BTreeMap::new());
    flatten("", &ma["config"], &mut pa);
    flatten("", &mb["config"], &mut pb);
    let keys: std::collections::BTreeSet<&String> = pa.keys().chain(pb.keys()).collect();
    let params = keys
        .into_iter()
        .filter(|k| k.as_str() != "output_dir")
        .filter_map(|k| {
            let (x, y) = (pa.get(k).cloned().unwrap_or(Value::Null), pb.get(k).cloned().unwrap_or(Value::Null));
            (x != y).then(|| ParamDelta { key: k.clone(), a: x, b: y })
        })
        .collect();

    let (xa, xb) = (metrics(&sa), metrics(&sb));
    let keys: std::collections::BTreeSet<&String> = xa.keys().chain(xb.keys()).collect();
    let mut out = Vec::new();
    for k in keys {
        let (x, y) = (xa.get(k).copied(), xb.get(k).copied());
        if x == y {
            continue;
        }
        let rel = match (x, y) {
            (Some(x), Some(y)) => Some((y - x) / x.abs().max(f64::MIN_POSITIVE)),
            _ => None,
        };
        let flagged = rel.is_none_or(|r| r.abs() > FLAG_THRESHOLD);
        let verdict = match rel {
            Some(r) if lower_is_better(k) => {
                if r < 0.0 {
                    "improved"
                } else {
                    "regressed"
                }
            }
            _ => "changed",
        };
        out.push(MetricDelta { metric: k.clone(), a: x, b: y, relative_change: rel, flagged, verdict });
    }
    Ok(CompareReport { params, metrics: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn write_run(dir: &Path, sigma: f64, defect: f64) {
        std::fs::create_dir_all(dir).unwrap();
        let manifest = json!({"config": {"sigma": sigma, "grid": {"x": {"points": 32}}, "output_dir": dir}});
        std::fs::write(dir.join(MANIFEST), manifest.to_string()).unwrap();
        let summary = json!({"experiment": "verify-wick", "isometry_defect": defect, "rows": 3, "checks": []});
        std::fs::write(dir.join(SUMMARY), summary.to_string()).unwrap();
    }

    #[test]
    fn identical_runs_have_empty_diff() {
        let tmp = tempfile::tempdir().unwrap();
        write_run(&tmp.path().join("a"), 0.5, 1e-9);
        write_run(&tmp.path().join("b"), 0.5, 1e-9);
        let r = compare_runs(&tmp.path().join("a"), &tmp.path().join("b")).unwrap();
        assert!(r.is_empty());
        assert_eq!(r.render(), "no differences\n");
    }

    #[test]
    fn deltas_are_flagged() {
        let tmp = tempfile::tempdir().unwrap();
        write_run(&tmp.path().join("a"), 0.5, 1e-9);
        write_run(&tmp.path().join("b"), 0.75, 1e-12);
        let r = compare_runs(&tmp.path().join("a"), &tmp.path().join("b")).unwrap();
        assert_eq!(r.params, vec![ParamDelta { key: "sigma".into(), a: json!(0.5), b: json!(0.75) }]);
        assert_eq!(r.metrics.len(), 1);
        assert!(r.metrics[0].flagged);
        assert_eq!(r.metrics[0].verdict, "improved");
        assert!(r.render().contains("isometry_defect"));
    }

    #[test]
    fn missing_manifest_is_an_error() {
        let tmp = tempfile::tempdir().unwrap();
        write_run(&tmp.path().join("a"), 0.5, 1e-9);
        let err = compare_runs(&tmp.path().join("a"), &tmp.path().join("nope")).unwrap_err();
        assert!(matches!(err, CompareError::MissingManifest(_)));
    }
}
