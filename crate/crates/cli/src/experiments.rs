//! Execution of a resolved configuration: one harness call per experiment, the
//! aggregated summary, and the asserted tolerance checks.

use std::collections::BTreeMap;

use hypokit_core::estimates::{
    check_full_theorem, check_key_estimate, check_lemma_1d, lemma_profiles, sample_lemma_params, scaling_probe,
    scaling_sweep, wick_estimate_path, EstimatesError, HarnessRun, TestFamily,
};
use hypokit_core::kinetic::{dilation_probe, normal_form_probe, verify_dilation_conjugation, verify_normal_form};
use hypokit_core::quantization::{verify_weyl_suite, verify_wick_suite};
use hypokit_core::{
    gain_exponent, Axis, CoefficientField, DilationParams, EstimateReport, GridError, KineticError, MultiplierError,
    MultiplierSpec, QuantizationError, SampledField, WavePacketFrame,
};
use serde::Serialize;
use thiserror::Error;

use crate::catalog::Experiment;
use crate::config::ResolvedConfig;

/// Failure of a run, mapped onto the process exit codes.
#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Config(String),
    #[error("memory guard: {0}")]
    Memory(String),
    #[error("computation failed: {0}")]
    Compute(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Memory(_) => 3,
            RunError::Compute(_) => 1,
        }
    }
}

impl From<QuantizationError> for RunError {
    fn from(e: QuantizationError) -> Self {
        match e {
            QuantizationError::MemoryBudget { .. } => RunError::Memory(e.to_string()),
            QuantizationError::Frame(_) | QuantizationError::Dimension(_) => RunError::Config(e.to_string()),
            QuantizationError::Grid(g) => g.into(),
        }
    }
}

impl From<GridError> for RunError {
    fn from(e: GridError) -> Self {
        RunError::Config(e.to_string())
    }
}

impl From<MultiplierError> for RunError {
    fn from(e: MultiplierError) -> Self {
        RunError::Config(e.to_string())
    }
}

impl From<KineticError> for RunError {
    fn from(e: KineticError) -> Self {
        match e {
            KineticError::Quantization(q) => q.into(),
            KineticError::Grid(g) => g.into(),
            KineticError::Multiplier(m) => m.into(),
            KineticError::Coefficient { .. } | KineticError::Bounds { .. } | KineticError::Dilation { .. } => {
                RunError::Config(e.to_string())
            }
            KineticError::SupportOverflow { .. } | KineticError::BandOverflow { .. } | KineticError::Shape(_) => {
                RunError::Compute(e.to_string())
            }
        }
    }
}

impl From<EstimatesError> for RunError {
    fn from(e: EstimatesError) -> Self {
        match e {
            EstimatesError::Quantization(q) => q.into(),
            EstimatesError::Kinetic(k) => k.into(),
            EstimatesError::Grid(g) => g.into(),
            EstimatesError::Multiplier(m) => m.into(),
            EstimatesError::Family(_) | EstimatesError::Support { .. } | EstimatesError::Input(_) => {
                RunError::Config(e.to_string())
            }
        }
    }
}

/// One asserted tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub tolerance: String,
    pub metric: String,
    pub value: f64,
    /// `"max"`: `value <= bound`; `"min"`: `value >= bound`; `"finite"`: `value` is finite.
    pub kind: &'static str,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    fn max(tolerance: &str, metric: &str, value: f64, bound: f64) -> Self {
        Check { tolerance: tolerance.into(), metric: metric.into(), value, kind: "max", bound, pass: value <= bound }
    }

    fn min(tolerance: &str, metric: &str, value: f64, bound: f64) -> Self {
        Check { tolerance: tolerance.into(), metric: metric.into(), value, kind: "min", bound, pass: value >= bound }
    }

    fn finite(metric: &str, value: f64) -> Self {
        Check {
            tolerance: "finite".into(),
            metric: metric.into(),
            value,
            kind: "finite",
            bound: f64::INFINITY,
            pass: value.is_finite(),
        }
    }
}

/// Rows, summary and checks of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub rows: Vec<EstimateReport>,
    pub summary: EstimateReport,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Bytes of working memory assumed per grid value (complex values and temporaries).
const BYTES_PER_VALUE: usize = 16 * 12;

fn guard_memory(cfg: &ResolvedConfig, values: usize, what: &str) -> Result<(), RunError> {
    let need = values.saturating_mul(BYTES_PER_VALUE);
    let budget = cfg.memory_budget_mb << 20;
    if need > budget {
        Err(RunError::Memory(format!(
            "{what} needs about {} MiB, memory_budget_mb is {}",
            need >> 20,
            cfg.memory_budget_mb
        )))
    } else {
        Ok(())
    }
}

fn axes_of(cfg: &ResolvedConfig, names: &[&str]) -> Result<Vec<Axis>, RunError> {
    let mut out = Vec::with_capacity(names.len());
    for &n in names {
        let a = cfg.axis(n);
        out.push(Axis::new(a.points, a.length, ResolvedConfig::label(n))?);
    }
    let total: usize = out.iter().map(|a| a.points()).product();
    guard_memory(cfg, total, "the grid")?;
    Ok(out)
}

fn coefficient(cfg: &ResolvedConfig) -> Result<CoefficientField, RunError> {
    Ok(CoefficientField::from_family(cfg.coefficient.unwrap_or_default())?)
}

fn family(cfg: &ResolvedConfig) -> Result<TestFamily, RunError> {
    let f = cfg.family.as_ref().expect("family resolved");
    Ok(TestFamily::new(f.name, cfg.seed, f.count, f.support_t)?)
}

/// Summary over per-row metrics: maxima, or minima for `min_*` keys.
fn aggregate(name: &str, rows: &[EstimateReport]) -> EstimateReport {
    let mut agg: BTreeMap<String, f64> = BTreeMap::new();
    for r in rows {
        for (k, &v) in &r.metrics {
            let slot = agg.entry(k.clone()).or_insert(v);
            *slot = if k.starts_with("min_") { slot.min(v) } else { slot.max(v) };
        }
    }
    let worst = rows.iter().max_by(|a, b| a.ratio.total_cmp(&b.ratio)).expect("at least one row");
    let mut s = EstimateReport::new(name, worst.lhs, worst.rhs);
    s.metrics = agg;
    s
}

/// `one(λ, stride)` for every configured frame `λ`.
fn per_lambda<T, F>(cfg: &ResolvedConfig, mut one: F) -> Result<Vec<T>, RunError>
where
    F: FnMut(f64, usize) -> Result<T, RunError>,
{
    let frame = cfg.frame.as_ref().expect("frame resolved");
    frame.lambdas.iter().map(|&l| one(l, frame.stride)).collect()
}

/// Run the experiment described by `cfg`.
pub fn execute(cfg: &ResolvedConfig) -> Result<Outcome, RunError> {
    let tol = |k: &str| cfg.tolerances[k];
    let sigma = cfg.sigma;
    let budget = cfg.kernel_budget();
    let (rows, mut summary, checks) = match cfg.experiment {
        Experiment::VerifyWick => {
            let axes = axes_of(cfg, &["x"])?;
            let trials = cfg.param("positivity_trials").count();
            let rows = per_lambda(cfg, |lambda, stride| {
                let frame = WavePacketFrame::new(lambda, &axes, stride)?;
                guard_memory(cfg, frame.phase_points(), "the phase-space lattice")?;
                Ok(verify_wick_suite(&frame, trials, cfg.seed, budget)?)
            })?;
            let s = aggregate("verify-wick", &rows);
            let m = |k: &str| s.metric(k).unwrap_or(f64::NAN);
            let mut checks = Vec::new();
            for k in ["isometry_defect", "identity_defect", "idempotence_defect", "self_adjoint_defect", "kernel_max_error"] {
                checks.push(Check::max(k, k, m(k), tol(k)));
            }
            checks.push(Check::min("positivity_floor", "min_positivity", m("min_positivity"), -tol("positivity_floor")));
            (rows, s, checks)
        }
        Experiment::VerifyWeyl => {
            let axes = axes_of(cfg, &["x"])?;
            let rows = per_lambda(cfg, |lambda, stride| {
                let mut r = verify_weyl_suite(&axes[0], lambda, stride, budget)?;
                let sm = r.metric("smoothed_y2_error").unwrap_or(0.0).max(r.metric("smoothed_eta2_error").unwrap_or(0.0));
                r = r.with_metric("smoothed_moment_error", sm);
                Ok(r)
            })?;
            let s = aggregate("verify-weyl", &rows);
            let m = |k: &str| s.metric(k).unwrap_or(f64::NAN);
            let checks = ["xi_derivative_error", "smoothed_moment_error", "affine_wick_weyl"]
                .iter()
                .map(|k| Check::max(k, k, m(k), tol(k)))
                .collect();
            (rows, s, checks)
        }
        Experiment::VerifyShear => {
            let u = normal_form_probe()?;
            guard_memory(cfg, u.len(), "the probe grid")?;
            let a = coefficient(cfg)?;
            let spec = MultiplierSpec::f_sigma(sigma)?;
            let r = verify_normal_form(&u, &a, &spec, sigma, budget)?.with_tag("coefficient", a.name());
            let rows = vec![r];
            let s = aggregate("verify-shear", &rows);
            let m = |k: &str| s.metric(k).unwrap_or(f64::NAN);
            let checks = [
                "unitarity_defect",
                "inverse_defect",
                "dt_conjugation_residual",
                "two_path_residual",
                "weight_identity_residual",
            ]
            .iter()
            .map(|k| Check::max(k, k, m(k), tol(k)))
            .collect();
            (rows, s, checks)
        }
        Experiment::VerifyDilation => {
            let radius = cfg.param("probe_radius").number();
            let delta = gain_exponent(sigma);
            let mut rows = Vec::new();
            for &lambda in cfg.param("lambdas").list() {
                let p = DilationParams::new(lambda, sigma)?;
                let u = dilation_probe(&p, radius)?;
                guard_memory(cfg, u.len(), "the dilation probe")?;
                let mut r = verify_dilation_conjugation(&u, &p, delta)?;
                let w = ["weight_t_residual", "weight_x_residual", "weight_v_residual", "weight_sum_residual"]
                    .iter()
                    .map(|k| r.metric(k).unwrap_or(f64::NAN))
                    .fold(0.0, f64::max);
                r = r.with_metric("weight_residual", w).with_context("points", u.len() as f64);
                rows.push(r);
            }
            let s = aggregate("verify-dilation", &rows);
            let m = |k: &str| s.metric(k).unwrap_or(f64::NAN);
            let checks =
                ["unitarity_defect", "weight_residual", "p0_residual"].iter().map(|k| Check::max(k, k, m(k), tol(k))).collect();
            (rows, s, checks)
        }
        Experiment::LemmaOneD => {
            let axes = axes_of(cfg, &["t"])?;
            let a = coefficient(cfg)?;
            let profiles = lemma_profiles(&axes[0], cfg.param("lemma_profiles").count(), cfg.seed, 1.0)?;
            let params = sample_lemma_params(
                cfg.param("lemma_points").count(),
                cfg.seed.wrapping_add(1),
                cfg.param("x1_max").number(),
                1.0,
            );
            let run = check_lemma_1d(&params, &profiles, &a, sigma)?;
            let u = run.summary.metric("uniformity_ratio").unwrap_or(f64::NAN);
            let checks = vec![
                Check::finite("max_ratio", run.max_ratio()),
                Check::max("uniformity_ratio", "uniformity_ratio", u, tol("uniformity_ratio")),
            ];
            (run.rows, run.summary, checks)
        }
        Experiment::KeyEstimate | Experiment::FullTheorem => {
            let axes = axes_of(cfg, &["t", "x", "v"])?;
            let fam = family(cfg)?;
            let a = coefficient(cfg)?;
            let fields = fam.generate(&axes)?;
            let run = if cfg.experiment == Experiment::KeyEstimate {
                check_key_estimate(&fields, &a, sigma, fam.support_t)?
            } else {
                check_full_theorem(&fields, &a, sigma, cfg.param("s").number(), fam.support_t)?
            };
            let checks = vec![Check::finite("max_ratio", run.max_ratio())];
            (run.rows, run.summary, checks)
        }
        Experiment::ScalingSweep => {
            let u0 = scaling_probe()?;
            guard_memory(cfg, u0.len(), "the probe grid")?;
            let run = scaling_sweep(&u0, sigma, cfg.param("delta_trial").number(), cfg.param("lambdas").list())?;
            let slope = run.summary.metric("slope").unwrap_or(f64::NAN);
            let expected = run.summary.metric("expected_slope").unwrap_or(f64::NAN);
            let dev = (slope - expected).abs();
            let summary = run.summary.clone().with_metric("slope_deviation", dev);
            let checks = vec![Check::max("slope_deviation", "slope_deviation", dev, tol("slope_deviation"))];
            (run.rows, summary, checks)
        }
        Experiment::WickPath => {
            let axes = axes_of(cfg, &["t", "x1", "x2"])?;
            let fam = family(cfg)?;
            let a = coefficient(cfg)?;
            let fields: Vec<SampledField> = fam.generate(&axes)?;
            let block = axes[1].points() * axes[2].points();
            guard_memory(cfg, block * block, "the phase-space lattice")?;
            let mut rows = Vec::new();
            for batch in per_lambda(cfg, |lambda, stride| Ok(wick_estimate_path(&fields, &a, sigma, lambda, stride, budget)?.rows))? {
                rows.extend(batch);
            }
            let worst = |k: &str| rows.iter().filter_map(|r| r.metric(k)).fold(0.0, f64::max);
            let (diff, rem) = (worst("path_difference"), worst("remainder_ratio"));
            let run = HarnessRun::from_rows("wick-path", rows);
            let summary =
                run.summary.clone().with_metric("max_path_difference", diff).with_metric("max_remainder_ratio", rem);
            let checks = vec![Check::finite("max_ratio", run.max_ratio())];
            (run.rows, summary, checks)
        }
    };
    summary.context.insert("sigma".into(), sigma);
    summary.context.insert("seed".into(), cfg.seed as f64);
    Ok(Outcome { rows, summary, checks })
}
