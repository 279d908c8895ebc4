//! The experiment catalog: names, anchors, defaults and asserted tolerances.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::AxisConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    VerifyWick,
    VerifyWeyl,
    VerifyShear,
    VerifyDilation,
    #[serde(rename = "lemma-1d")]
    LemmaOneD,
    KeyEstimate,
    FullTheorem,
    ScalingSweep,
    WickPath,
}

/// Which optional config sections an experiment consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Uses {
    pub family: bool,
    pub coefficient: bool,
    pub frame: bool,
}

fn axes(list: &[(&str, usize, f64)]) -> BTreeMap<String, AxisConfig> {
    list.iter().map(|&(k, points, length)| (k.to_string(), AxisConfig { points, length })).collect()
}

fn tols(list: &[(&str, f64)]) -> BTreeMap<String, f64> {
    list.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::VerifyWick,
        Experiment::VerifyWeyl,
        Experiment::VerifyShear,
        Experiment::VerifyDilation,
        Experiment::LemmaOneD,
        Experiment::KeyEstimate,
        Experiment::FullTheorem,
        Experiment::ScalingSweep,
        Experiment::WickPath,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::VerifyWick => "verify-wick",
            Experiment::VerifyWeyl => "verify-weyl",
            Experiment::VerifyShear => "verify-shear",
            Experiment::VerifyDilation => "verify-dilation",
            Experiment::LemmaOneD => "lemma-1d",
            Experiment::KeyEstimate => "key-estimate",
            Experiment::FullTheorem => "full-theorem",
            Experiment::ScalingSweep => "scaling-sweep",
            Experiment::WickPath => "wick-path",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Experiment::ALL.into_iter().find(|e| e.name() == s)
    }

    /// The part of the theory the experiment exercises.
    pub fn anchor(self) -> &'static str {
        match self {
            Experiment::VerifyWick => "wave-packet frame and Wick quantization",
            Experiment::VerifyWeyl => "Weyl quantization and the Wick-to-Weyl smoothing",
            Experiment::VerifyShear => "normal form by the time-space shear",
            Experiment::VerifyDilation => "anisotropic dilation conjugation",
            Experiment::LemmaOneD => "one-dimensional parametric lemma",
            Experiment::KeyEstimate => "key hypoelliptic estimate",
            Experiment::FullTheorem => "main theorem with time-regularity recovery",
            Experiment::ScalingSweep => "optimality argument",
            Experiment::WickPath => "Wick-quantized proof of the key estimate",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Experiment::VerifyWick => "isometry, identity, positivity and projection-kernel checks of the Wick frame",
            Experiment::VerifyWeyl => "Weyl quantization of xi, Gaussian smoothing of quadratics, Wick = Weyl on affine symbols",
            Experiment::VerifyShear => "shear unitarity, D_t conjugation and the two-path normal form comparison",
            Experiment::VerifyDilation => "per-term residuals of the dilation conjugation identities",
            Experiment::LemmaOneD => "uniformity of the 1D estimate over sampled (x1, x2, xi1, xi2)",
            Experiment::KeyEstimate => "empirical constant of the key estimate over a seeded family",
            Experiment::FullTheorem => "empirical constant of the full weighted estimate in H^s",
            Experiment::ScalingSweep => "log-log slope of the dilated estimate against lambda",
            Experiment::WickPath => "Wick-quantized estimate and its distance to the Weyl path",
        }
    }

    pub fn uses(self) -> Uses {
        use Experiment::*;
        Uses {
            family: matches!(self, KeyEstimate | FullTheorem | WickPath),
            coefficient: matches!(self, VerifyShear | LemmaOneD | KeyEstimate | FullTheorem | WickPath),
            frame: matches!(self, VerifyWick | VerifyWeyl | WickPath),
        }
    }

    /// `σ = 1` selects the Vlasov-Fokker-Planck dissipation `|η|²`.
    pub fn allows_unit_sigma(self) -> bool {
        matches!(self, Experiment::KeyEstimate | Experiment::FullTheorem)
    }

    /// Configurable axes; empty when the experiment builds its own probe grids.
    pub fn default_grid(self) -> BTreeMap<String, AxisConfig> {
        use Experiment::*;
        match self {
            VerifyWick => axes(&[("x", 32, 8.0)]),
            VerifyWeyl => axes(&[("x", 128, 16.0)]),
            LemmaOneD => axes(&[("t", 4096, 4.0)]),
            KeyEstimate | FullTheorem => axes(&[("t", 32, 4.0), ("x", 32, 8.0), ("v", 32, 8.0)]),
            WickPath => axes(&[("t", 16, 3.0), ("x1", 16, 8.0), ("x2", 16, 8.0)]),
            VerifyShear | VerifyDilation | ScalingSweep => BTreeMap::new(),
        }
    }

    pub fn default_count(self) -> usize {
        if self == Experiment::WickPath {
            4
        } else {
            20
        }
    }

    pub fn default_frame_lambdas(self) -> Vec<f64> {
        if self == Experiment::WickPath {
            vec![0.25]
        } else {
            vec![0.25, 0.5, 1.0]
        }
    }

    pub fn default_stride(self) -> usize {
        if self == Experiment::VerifyWeyl {
            2
        } else {
            1
        }
    }

    /// Asserted tolerances; a run exits 1 when one is violated.
    pub fn default_tolerances(self) -> BTreeMap<String, f64> {
        use Experiment::*;
        match self {
            VerifyWick => tols(&[
                ("isometry_defect", 1e-6),
                ("identity_defect", 1e-6),
                ("positivity_floor", 1e-6),
                ("idempotence_defect", 1e-5),
                ("self_adjoint_defect", 1e-5),
                ("kernel_max_error", 1e-6),
            ]),
            VerifyWeyl => tols(&[("xi_derivative_error", 1e-8), ("smoothed_moment_error", 1e-8), ("affine_wick_weyl", 1e-6)]),
            VerifyShear => tols(&[
                ("unitarity_defect", 1e-8),
                ("inverse_defect", 1e-8),
                ("dt_conjugation_residual", 1e-6),
                ("two_path_residual", 1e-5),
                ("weight_identity_residual", 1e-6),
            ]),
            VerifyDilation => tols(&[("unitarity_defect", 1e-8), ("weight_residual", 1e-6), ("p0_residual", 1e-6)]),
            LemmaOneD => tols(&[("uniformity_ratio", 3.0)]),
            ScalingSweep => tols(&[("slope_deviation", 0.05)]),
            KeyEstimate | FullTheorem | WickPath => BTreeMap::new(),
        }
    }

    /// The default config as TOML.
    pub fn default_toml(self) -> String {
        let r = crate::config::ExperimentConfig::for_experiment(self).resolve().expect("defaults are valid");
        toml::to_string(&r).expect("resolved config serializes")
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub anchor: &'static str,
    pub description: &'static str,
    pub default_config: serde_json::Value,
}

pub fn catalog() -> Vec<CatalogEntry> {
    Experiment::ALL
        .into_iter()
        .map(|e| CatalogEntry {
            name: e.name(),
            anchor: e.anchor(),
            description: e.description(),
            default_config: serde_json::to_value(
                crate::config::ExperimentConfig::for_experiment(e).resolve().expect("defaults are valid"),
            )
            .expect("resolved config serializes"),
        })
        .collect()
}

/// Human-readable catalog: one block per experiment with its default config.
pub fn render_text() -> String {
    let mut out = String::new();
    for e in Experiment::ALL {
        out.push_str(&format!("{} - {}\n  {}\n", e.name(), e.anchor(), e.description()));
        for line in e.default_toml().lines() {
            out.push_str("    ");
            out.push_str(line);
            out.push('\n');
        }
        out.push('\n');
    }
    out
}
