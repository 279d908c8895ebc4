//! Radial Fourier multipliers: the blended fractional symbol
//! `F(η) = |η|^{2σ} w(η) + |η|² (1 − w(η))`, pure powers `|ζ|^s`, Sobolev
//! brackets `⟨ζ⟩^s`, and the anisotropic weight on the left of the main estimate.
//!
//! Frequencies are the lattice values `k/L` with no 2π factor.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{AxisLabel, GridError, SampledField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MultiplierError {
    #[error("sigma must lie in (0, 1) for F_sigma, got {0}")]
    SigmaOutOfRange(f64),
    #[error("cutoff radii must satisfy 0 <= inner < outer, got ({0}, {1})")]
    BadCutoff(f64, f64),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// The gain exponent `2σ/(2σ+1)`.
pub fn gain_exponent(sigma: f64) -> f64 {
    2.0 * sigma / (2.0 * sigma + 1.0)
}

/// Smooth transition from 0 on `|η| <= inner_radius` to 1 on `|η| >= outer_radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub inner_radius: f64,
    pub outer_radius: f64,
}

impl Default for CutoffSpec {
    fn default() -> Self {
        CutoffSpec { inner_radius: 1.0, outer_radius: 2.0 }
    }
}

fn flat_bump(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

/// `m(s) / (m(s) + m(1 − s))` with `m(s) = e^{−1/s}`: smooth, 0 at 0, 1 at 1.
pub fn profile(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let a = flat_bump(s);
    a / (a + flat_bump(1.0 - s))
}

impl CutoffSpec {
    pub fn new(inner_radius: f64, outer_radius: f64) -> Result<Self, MultiplierError> {
        if !(inner_radius >= 0.0 && outer_radius > inner_radius && outer_radius.is_finite()) {
            return Err(MultiplierError::BadCutoff(inner_radius, outer_radius));
        }
        Ok(CutoffSpec { inner_radius, outer_radius })
    }

    pub fn w(&self, r: f64) -> f64 {
        profile((r - self.inner_radius) / (self.outer_radius - self.inner_radius))
    }
}

/// `F(r)` for `r = |η|`.
pub fn eval_f_radial(sigma: f64, cutoff: &CutoffSpec, r: f64) -> f64 {
    let w = cutoff.w(r);
    let r2 = r * r;
    if w == 0.0 {
        return r2;
    }
    let p = r.powf(2.0 * sigma);
    if w == 1.0 {
        return p;
    }
    p * w + r2 * (1.0 - w)
}

pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplierKind {
    FSigma,
    AbsPower,
    BracketPower,
    Custom,
}

/// Evaluation rule for a radial multiplier `m(|ζ|)`.
#[derive(Clone)]
pub enum MultiplierSpec {
    FSigma { sigma: f64, cutoff: CutoffSpec },
    AbsPower { exponent: f64 },
    BracketPower { exponent: f64 },
    Custom { name: String, rule: RadialFn },
}

impl fmt::Debug for MultiplierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MultiplierSpec::FSigma { sigma, cutoff } => {
                f.debug_struct("FSigma").field("sigma", sigma).field("cutoff", cutoff).finish()
            }
            MultiplierSpec::AbsPower { exponent } => f.debug_struct("AbsPower").field("exponent", exponent).finish(),
            MultiplierSpec::BracketPower { exponent } => {
                f.debug_struct("BracketPower").field("exponent", exponent).finish()
            }
            MultiplierSpec::Custom { name, .. } => f.debug_struct("Custom").field("name", name).finish(),
        }
    }
}

impl MultiplierSpec {
    /// `F` with the canonical cutoff radii (1, 2). Requires `0 < σ < 1`.
    pub fn f_sigma(sigma: f64) -> Result<Self, MultiplierError> {
        Self::f_sigma_with(sigma, CutoffSpec::default())
    }

    pub fn f_sigma_with(sigma: f64, cutoff: CutoffSpec) -> Result<Self, MultiplierError> {
        if !(sigma > 0.0 && sigma < 1.0) {
            return Err(MultiplierError::SigmaOutOfRange(sigma));
        }
        CutoffSpec::new(cutoff.inner_radius, cutoff.outer_radius)?;
        Ok(MultiplierSpec::FSigma { sigma, cutoff })
    }

    /// The `σ = 1` limit `F(η) = |η|²`, admitted only for the Vlasov–Fokker–Planck comparison.
    pub fn f_sigma_unit() -> Self {
        MultiplierSpec::FSigma { sigma: 1.0, cutoff: CutoffSpec::default() }
    }

    pub fn abs_power(exponent: f64) -> Self {
        MultiplierSpec::AbsPower { exponent }
    }

    pub fn bracket_power(exponent: f64) -> Self {
        MultiplierSpec::BracketPower { exponent }
    }

    pub fn custom(name: impl Into<String>, rule: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        MultiplierSpec::Custom { name: name.into(), rule: Arc::new(rule) }
    }

    pub fn kind(&self) -> MultiplierKind {
        match self {
            MultiplierSpec::FSigma { .. } => MultiplierKind::FSigma,
            MultiplierSpec::AbsPower { .. } => MultiplierKind::AbsPower,
            MultiplierSpec::BracketPower { .. } => MultiplierKind::BracketPower,
            MultiplierSpec::Custom { .. } => MultiplierKind::Custom,
        }
    }

    pub fn eval_radial(&self, r: f64) -> f64 {
        match self {
            MultiplierSpec::FSigma { sigma, cutoff } => eval_f_radial(*sigma, cutoff, r),
            MultiplierSpec::AbsPower { exponent } => {
                if r == 0.0 {
                    if *exponent > 0.0 {
                        0.0
                    } else if *exponent == 0.0 {
                        1.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    r.powf(*exponent)
                }
            }
            MultiplierSpec::BracketPower { exponent } => (1.0 + r * r).powf(0.5 * exponent),
            MultiplierSpec::Custom { rule, .. } => rule(r),
        }
    }

    pub fn eval(&self, eta: &[f64]) -> f64 {
        self.eval_radial(eta.iter().map(|x| x * x).sum::<f64>().sqrt())
    }
}

/// `F(η)` for a vector `η`.
pub fn eval_f(spec: &MultiplierSpec, eta: &[f64]) -> f64 {
    spec.eval(eta)
}

/// `m(D)` acting on the frequencies of `axes`.
pub fn apply_multiplier(
    field: &SampledField,
    spec: &MultiplierSpec,
    axes: &[usize],
) -> Result<SampledField, MultiplierError> {
    Ok(field.apply_symbol(axes, |z| Complex64::new(spec.eval(z), 0.0))?)
}

/// `(1 + |D_t|^δ + |D_x|^δ + |D_v|^{2σ}) u` with `δ = 2σ/(2σ+1)`, for `0 < σ <= 1`.
pub fn lhs_weight(field: &SampledField, sigma: f64) -> Result<SampledField, MultiplierError> {
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(MultiplierError::SigmaOutOfRange(sigma));
    }
    let axes = [
        field.axis_index(AxisLabel::T)?,
        field.axis_index(AxisLabel::X)?,
        field.axis_index(AxisLabel::V)?,
    ];
    let d = gain_exponent(sigma);
    Ok(field.apply_symbol(&axes, |z| {
        Complex64::new(1.0 + z[0].abs().powf(d) + z[1].abs().powf(d) + z[2].abs().powf(2.0 * sigma), 0.0)
    })?)
}

/// `C₂ = sup_η (|η|^{2σ} − F(η))` together with the maximizing radius.
///
/// The difference vanishes for `|η| >= outer_radius`, so the search runs on
/// `[0, outer_radius]`: a dense scan followed by golden-section refinement.
pub fn comparison_constant(sigma: f64, cutoff: &CutoffSpec) -> (f64, f64) {
    let g = |r: f64| r.powf(2.0 * sigma) - eval_f_radial(sigma, cutoff, r);
    let n = 20_000;
    let top = cutoff.outer_radius;
    let (mut best_r, mut best) = (0.0, g(0.0));
    for i in 1..=n {
        let r = top * i as f64 / n as f64;
        let v = g(r);
        if v > best {
            best = v;
            best_r = r;
        }
    }
    let step = top / n as f64;
    let (mut a, mut b) = ((best_r - step).max(0.0), (best_r + step).min(top));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if g(c) > g(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let r = 0.5 * (a + b);
    if g(r) > best {
        (g(r), r)
    } else {
        (best, best_r)
    }
}
