//! Experiment configuration: TOML parsing, per-experiment defaults and validation.
//!
//! [`ExperimentConfig`] is what a user writes; [`ExperimentConfig::resolve`] fills every
//! default for the chosen experiment and validates ranges, producing the
//! [`ResolvedConfig`] that is executed and recorded in the manifest.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use hypokit_core::{gain_exponent, AxisLabel, CoefficientFamily, FamilyKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Experiment;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl fmt::Display) -> ConfigError {
    ConfigError::Invalid { field: field.to_string(), reason: reason.to_string() }
}

/// Points and box length of one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub points: usize,
    pub length: f64,
}

/// Test-family selection; every field is optional in the file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub name: Option<FamilyKind>,
    pub count: Option<usize>,
    pub support_t: Option<f64>,
}

/// Wave-packet frame selection.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameConfig {
    pub lambdas: Option<Vec<f64>>,
    pub stride: Option<usize>,
}

/// Experiment-specific knobs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub lambdas: Option<Vec<f64>>,
    pub delta_trial: Option<f64>,
    pub s: Option<f64>,
    pub lemma_points: Option<usize>,
    pub lemma_profiles: Option<usize>,
    pub x1_max: Option<f64>,
    pub positivity_trials: Option<usize>,
    pub probe_radius: Option<f64>,
}

/// A configuration file as written by the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub sigma: Option<f64>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub kernel_budget_mb: Option<usize>,
    pub memory_budget_mb: Option<usize>,
    #[serde(default)]
    pub grid: BTreeMap<String, AxisConfig>,
    #[serde(default)]
    pub family: FamilyConfig,
    pub coefficient: Option<CoefficientFamily>,
    #[serde(default)]
    pub frame: FrameConfig,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

/// Every knob of one run with defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub experiment: Experiment,
    pub sigma: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub kernel_budget_mb: usize,
    pub memory_budget_mb: usize,
    pub grid: BTreeMap<String, AxisConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<ResolvedFamily>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficient: Option<CoefficientFamily>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame: Option<ResolvedFrame>,
    pub params: BTreeMap<String, ParamValue>,
    pub tolerances: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedFamily {
    pub name: FamilyKind,
    pub count: usize,
    pub support_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedFrame {
    pub lambdas: Vec<f64>,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Count(usize),
    List(Vec<f64>),
}

impl ParamValue {
    pub fn number(&self) -> f64 {
        match self {
            ParamValue::Number(x) => *x,
            ParamValue::Count(n) => *n as f64,
            ParamValue::List(_) => f64::NAN,
        }
    }

    pub fn count(&self) -> usize {
        match self {
            ParamValue::Count(n) => *n,
            _ => 0,
        }
    }

    pub fn list(&self) -> &[f64] {
        match self {
            ParamValue::List(v) => v,
            _ => &[],
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    /// Minimal config: just the experiment name.
    pub fn for_experiment(experiment: Experiment) -> Self {
        ExperimentConfig {
            experiment,
            sigma: None,
            seed: None,
            output_dir: None,
            kernel_budget_mb: None,
            memory_budget_mb: None,
            grid: BTreeMap::new(),
            family: FamilyConfig::default(),
            coefficient: None,
            frame: FrameConfig::default(),
            params: ParamsConfig::default(),
            tolerances: BTreeMap::new(),
        }
    }

    /// Fill defaults for the experiment and validate every value.
    pub fn resolve(&self) -> Result<ResolvedConfig, ConfigError> {
        let e = self.experiment;
        let uses = e.uses();
        let sigma = self.sigma.unwrap_or(0.5);
        if e.allows_unit_sigma() {
            if !(sigma > 0.0 && sigma <= 1.0) {
                return Err(invalid(
                    "sigma",
                    format!("sigma must lie in (0, 1) for F_sigma, or equal 1 for the Vlasov-Fokker-Planck mode, got {sigma}"),
                ));
            }
        } else if !(sigma > 0.0 && sigma < 1.0) {
            return Err(invalid("sigma", format!("sigma must lie in (0, 1) for F_sigma, got {sigma}")));
        }
        reject_unused("family", !uses.family && self.family != FamilyConfig::default(), e)?;
        reject_unused("coefficient", !uses.coefficient && self.coefficient.is_some(), e)?;
        reject_unused("frame", !uses.frame && self.frame != FrameConfig::default(), e)?;

        let mut grid = e.default_grid();
        if !self.grid.is_empty() && grid.is_empty() {
            return Err(invalid("grid", format!("{e} builds its own probe grid")));
        }
        for (name, ax) in &self.grid {
            if !grid.contains_key(name) {
                let known: Vec<&String> = grid.keys().collect();
                return Err(invalid("grid", format!("unknown axis `{name}` for {e}; expected one of {known:?}")));
            }
            if !(ax.points >= 8 && ax.points.is_power_of_two()) {
                return Err(invalid(&format!("grid.{name}.points"), format!("must be a power of two >= 8, got {}", ax.points)));
            }
            if !(ax.length > 0.0 && ax.length.is_finite()) {
                return Err(invalid(&format!("grid.{name}.length"), format!("must be positive, got {}", ax.length)));
            }
            grid.insert(name.clone(), *ax);
        }

        let family = if uses.family {
            let f = ResolvedFamily {
                name: self.family.name.unwrap_or(FamilyKind::GaussianPack),
                count: self.family.count.unwrap_or(e.default_count()),
                support_t: self.family.support_t.unwrap_or(1.0),
            };
            if f.count == 0 {
                return Err(invalid("family.count", "must be positive"));
            }
            if !(f.support_t > 0.0 && f.support_t.is_finite()) {
                return Err(invalid("family.support_t", format!("must be positive, got {}", f.support_t)));
            }
            if let Some(t) = grid.get("t") {
                if 0.5 * t.length <= f.support_t {
                    return Err(invalid(
                        "family.support_t",
                        format!("the t box [-{}, {}) must contain [-T, T], got T = {}", 0.5 * t.length, 0.5 * t.length, f.support_t),
                    ));
                }
            }
            Some(f)
        } else {
            None
        };

        let coefficient = if uses.coefficient {
            let c = self.coefficient.unwrap_or_default();
            hypokit_core::CoefficientField::from_family(c).map_err(|err| invalid("coefficient", err))?;
            Some(c)
        } else {
            None
        };

        let frame = if uses.frame {
            let f = ResolvedFrame {
                lambdas: self.frame.lambdas.clone().unwrap_or_else(|| e.default_frame_lambdas()),
                stride: self.frame.stride.unwrap_or(e.default_stride()),
            };
            if f.lambdas.is_empty() || f.lambdas.iter().any(|&l| !(l > 0.0 && l <= 1.0)) {
                return Err(invalid("frame.lambdas", format!("each lambda must lie in (0, 1], got {:?}", f.lambdas)));
            }
            if !(f.stride >= 1 && f.stride.is_power_of_two()) {
                return Err(invalid("frame.stride", format!("must be a power of two, got {}", f.stride)));
            }
            Some(f)
        } else {
            None
        };

        let params = self.resolve_params(sigma)?;

        let mut tolerances = e.default_tolerances();
        for (k, v) in &self.tolerances {
            if !tolerances.contains_key(k) {
                let known: Vec<&String> = tolerances.keys().collect();
                return Err(invalid("tolerances", format!("unknown tolerance `{k}` for {e}; expected one of {known:?}")));
            }
            if !v.is_finite() {
                return Err(invalid(&format!("tolerances.{k}"), "must be finite"));
            }
            tolerances.insert(k.clone(), *v);
        }

        let kernel_budget_mb = self.kernel_budget_mb.unwrap_or(512);
        let memory_budget_mb = self.memory_budget_mb.unwrap_or(2048);
        if kernel_budget_mb == 0 || memory_budget_mb == 0 {
            return Err(invalid("budget", "memory budgets must be positive"));
        }
        Ok(ResolvedConfig {
            experiment: e,
            sigma,
            seed: self.seed.unwrap_or(1),
            output_dir: self.output_dir.clone().unwrap_or_else(|| PathBuf::from(format!("runs/{e}"))),
            kernel_budget_mb,
            memory_budget_mb,
            grid,
            family,
            coefficient,
            frame,
            params,
            tolerances,
        })
    }

    fn resolve_params(&self, sigma: f64) -> Result<BTreeMap<String, ParamValue>, ConfigError> {
        use ParamValue::*;
        let e = self.experiment;
        let p = &self.params;
        let mut out = BTreeMap::new();
        let mut given: Vec<&str> = Vec::new();
        let mut mark = |name: &'static str, set: bool| {
            if set {
                given.push(name);
            }
        };
        mark("lambdas", p.lambdas.is_some());
        mark("delta_trial", p.delta_trial.is_some());
        mark("s", p.s.is_some());
        mark("lemma_points", p.lemma_points.is_some());
        mark("lemma_profiles", p.lemma_profiles.is_some());
        mark("x1_max", p.x1_max.is_some());
        mark("positivity_trials", p.positivity_trials.is_some());
        mark("probe_radius", p.probe_radius.is_some());
        match e {
            Experiment::VerifyWick => {
                out.insert("positivity_trials".into(), Count(p.positivity_trials.unwrap_or(50)));
            }
            Experiment::VerifyDilation => {
                let l = p.lambdas.clone().unwrap_or_else(|| vec![2.0, 4.0]);
                if l.is_empty() || l.iter().any(|&x| !(x >= 1.0 && x.is_finite())) {
                    return Err(invalid("params.lambdas", format!("each lambda must be >= 1, got {l:?}")));
                }
                let r = p.probe_radius.unwrap_or(5.8);
                if !(r > 0.0 && r.is_finite()) {
                    return Err(invalid("params.probe_radius", "must be positive"));
                }
                out.insert("lambdas".into(), List(l));
                out.insert("probe_radius".into(), Number(r));
            }
            Experiment::ScalingSweep => {
                let l = p.lambdas.clone().unwrap_or_else(|| vec![1.0, 2.0, 4.0, 8.0]);
                if l.len() < 2 || l.iter().any(|&x| !(x >= 1.0 && x.is_finite())) {
                    return Err(invalid("params.lambdas", format!("need at least two lambdas, each >= 1, got {l:?}")));
                }
                let d = p.delta_trial.unwrap_or(gain_exponent(sigma));
                if !(d > 0.0 && d.is_finite()) {
                    return Err(invalid("params.delta_trial", format!("must be positive, got {d}")));
                }
                out.insert("lambdas".into(), List(l));
                out.insert("delta_trial".into(), Number(d));
            }
            Experiment::LemmaOneD => {
                let n = p.lemma_points.unwrap_or(200);
                let m = p.lemma_profiles.unwrap_or(20);
                let x = p.x1_max.unwrap_or(1e3);
                if n < 2 || m == 0 {
                    return Err(invalid("params", "lemma_points must be >= 2 and lemma_profiles >= 1"));
                }
                if !(x >= 1.0 && x.is_finite()) {
                    return Err(invalid("params.x1_max", format!("must be >= 1, got {x}")));
                }
                out.insert("lemma_points".into(), Count(n));
                out.insert("lemma_profiles".into(), Count(m));
                out.insert("x1_max".into(), Number(x));
            }
            Experiment::FullTheorem => {
                let s = p.s.unwrap_or(0.0);
                if !(s >= 0.0 && s.is_finite()) {
                    return Err(invalid("params.s", format!("must be >= 0, got {s}")));
                }
                out.insert("s".into(), Number(s));
            }
            _ => {}
        }
        if let Some(extra) = given.iter().find(|k| !out.contains_key(**k)) {
            return Err(invalid(&format!("params.{extra}"), format!("not used by {e}")));
        }
        Ok(out)
    }
}

fn reject_unused(section: &str, unused: bool, e: Experiment) -> Result<(), ConfigError> {
    if unused {
        Err(invalid(section, format!("not used by {e}")))
    } else {
        Ok(())
    }
}

impl ResolvedConfig {
    pub fn param(&self, name: &str) -> &ParamValue {
        self.params.get(name).expect("resolved parameter")
    }

    pub fn axis(&self, name: &str) -> AxisConfig {
        self.grid[name]
    }

    pub fn kernel_budget(&self) -> usize {
        self.kernel_budget_mb << 20
    }

    /// Axis label for a grid key.
    pub fn label(name: &str) -> AxisLabel {
        AxisLabel::parse(name).expect("grid keys are axis labels")
    }
}
