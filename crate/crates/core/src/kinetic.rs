//! The model operator `P = ∂_t + v∂_x + a(t,x,v)(−Δ̃_v)^σ`, its constant-coefficient
//! principal part `P₀ = iD_t + ivD_x + |D_v|^{2σ}`, the anisotropic dilations
//! `T_λ`, and the shear unitaries `M_t`, `M` that put `P` in normal form.
//!
//! `D = (2iπ)^{-1}∂` has symbol equal to the lattice frequency.
//! Off-grid samples use trigonometric interpolation: band-limited
//! interpolation for dilations and exact Fourier phase shifts for shears.

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::Fft;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{along_axis, plan, Axis, AxisLabel, Direction, GridError, SampledField};
use crate::multipliers::{apply_multiplier, gain_exponent, MultiplierError, MultiplierSpec};
use crate::quantization::{weyl_apply, PhaseSymbol, QuantizationError};
use crate::report::EstimateReport;

/// Relative squared mass allowed to leave the box (or the band) under resampling.
pub const MASS_TOLERANCE: f64 = 1e-10;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KineticError {
    #[error("coefficient {name} violates its bounds at (t, x, v) = ({t}, {x}, {v}): value {value}")]
    Coefficient { name: String, t: f64, x: f64, v: f64, value: f64 },
    #[error("invalid coefficient bounds: a0 = {a0}, sup = {sup}")]
    Bounds { a0: f64, sup: f64 },
    #[error("resampling pushes relative mass {mass:e} outside the box on axis {axis}")]
    SupportOverflow { axis: usize, mass: f64 },
    #[error("resampling pushes relative spectral mass {mass:e} beyond the band on axis {axis}")]
    BandOverflow { axis: usize, mass: f64 },
    #[error("dilation needs lambda >= 1 and sigma in (0, 1), got lambda = {lambda}, sigma = {sigma}")]
    Dilation { lambda: f64, sigma: f64 },
    #[error("operation expects {0}")]
    Shape(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Multiplier(#[from] MultiplierError),
    #[error(transparent)]
    Quantization(#[from] QuantizationError),
}

pub type CoefficientFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Named coefficient families; each satisfies `a >= 0.5` everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum CoefficientFamily {
    /// `a ≡ value`.
    Constant { value: f64 },
    /// `a = 1 + amplitude · sin²(x)`.
    SinSqX { amplitude: f64 },
    /// `a = 1 + amplitude · cos(t) · e^{−v²}`.
    CosTGaussV { amplitude: f64 },
}

impl Default for CoefficientFamily {
    fn default() -> Self {
        CoefficientFamily::Constant { value: 1.0 }
    }
}

/// A coefficient `a(t, x, v)` with `a0 <= a <= sup_bound`.
#[derive(Clone)]
pub struct CoefficientField {
    name: String,
    rule: CoefficientFn,
    a0: f64,
    sup_bound: f64,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("name", &self.name)
            .field("a0", &self.a0)
            .field("sup_bound", &self.sup_bound)
            .finish()
    }
}

impl CoefficientField {
    pub fn new(
        name: impl Into<String>,
        a0: f64,
        sup_bound: f64,
        rule: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self, KineticError> {
        if !(a0 > 0.0 && sup_bound >= a0 && sup_bound.is_finite()) {
            return Err(KineticError::Bounds { a0, sup: sup_bound });
        }
        Ok(CoefficientField { name: name.into(), rule: Arc::new(rule), a0, sup_bound })
    }

    pub fn constant(value: f64) -> Result<Self, KineticError> {
        Self::new(format!("constant({value})"), value, value, move |_, _, _| value)
    }

    pub fn from_family(family: CoefficientFamily) -> Result<Self, KineticError> {
        match family {
            CoefficientFamily::Constant { value } => Self::constant(value),
            CoefficientFamily::SinSqX { amplitude } => Self::new(
                format!("1+{amplitude}sin^2(x)"),
                1.0_f64.min(1.0 + amplitude),
                1.0_f64.max(1.0 + amplitude),
                move |_, x, _| 1.0 + amplitude * x.sin().powi(2),
            ),
            CoefficientFamily::CosTGaussV { amplitude } => Self::new(
                format!("1+{amplitude}cos(t)exp(-v^2)"),
                1.0 - amplitude.abs(),
                1.0 + amplitude.abs(),
                move |t, _, v| 1.0 + amplitude * t.cos() * (-v * v).exp(),
            ),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    pub fn eval(&self, t: f64, x: f64, v: f64) -> f64 {
        (self.rule)(t, x, v)
    }

    pub fn is_constant_one(&self) -> bool {
        self.a0 == 1.0 && self.sup_bound == 1.0
    }

    /// Check `a0 <= a <= sup_bound` at every node of a `(t, x, v)` grid.
    pub fn check_on(&self, t: &Axis, x: &Axis, v: &Axis) -> Result<(), KineticError> {
        let tol = 1e-12 * self.sup_bound;
        for &tt in &t.nodes() {
            for &xx in &x.nodes() {
                for &vv in &v.nodes() {
                    let value = self.eval(tt, xx, vv);
                    if !(value >= self.a0 - tol && value <= self.sup_bound + tol) {
                        return Err(KineticError::Coefficient {
                            name: self.name.clone(),
                            t: tt,
                            x: xx,
                            v: vv,
                            value,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Indices of the `t`, `x`, `v` axes.
pub fn txv_axes(u: &SampledField) -> Result<[usize; 3], KineticError> {
    Ok([u.axis_index(AxisLabel::T)?, u.axis_index(AxisLabel::X)?, u.axis_index(AxisLabel::V)?])
}

/// `P u = ∂_t u + v ∂_x u + a (−Δ̃_v)^σ u` with `(−Δ̃_v)^σ` the multiplier `spec`.
pub fn apply_p(u: &SampledField, a: &CoefficientField, spec: &MultiplierSpec) -> Result<SampledField, KineticError> {
    let [it, ix, iv] = txv_axes(u)?;
    let ax = u.axes();
    a.check_on(&ax[it], &ax[ix], &ax[iv])?;
    let dt = u.apply_symbol(&[it], |z| 2.0 * PI * I * z[0])?;
    let dx = u.apply_symbol(&[ix], |z| 2.0 * PI * I * z[0])?.multiply_by(|c| Complex64::new(c[iv], 0.0));
    let mut lap = apply_multiplier(u, spec, &[iv])?;
    if !a.is_constant_one() {
        lap = lap.multiply_by(|c| Complex64::new(a.eval(c[it], c[ix], c[iv]), 0.0));
    }
    Ok(dt.add(&dx)?.add(&lap)?)
}

/// `P₀ u = iD_t u + i v D_x u + |D_v|^{2σ} u`.
pub fn apply_p0(u: &SampledField, sigma: f64) -> Result<SampledField, KineticError> {
    let [it, ix, iv] = txv_axes(u)?;
    let dt = u.apply_symbol(&[it], |z| I * z[0])?;
    let dx = u.apply_symbol(&[ix], |z| I * z[0])?.multiply_by(|c| Complex64::new(c[iv], 0.0));
    let lap = apply_multiplier(u, &MultiplierSpec::abs_power(2.0 * sigma), &[iv])?;
    Ok(dt.add(&dx)?.add(&lap)?)
}

/// Parameters of `T_λ u(t,x,v) = λ u(λ^{2σ/(2σ+1)} t, λ x, λ^{1/(2σ+1)} v)` (one space dimension).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DilationParams {
    lambda: f64,
    sigma: f64,
}

impl DilationParams {
    pub fn new(lambda: f64, sigma: f64) -> Result<Self, KineticError> {
        if !(lambda >= 1.0 && lambda.is_finite() && sigma > 0.0 && sigma < 1.0) {
            return Err(KineticError::Dilation { lambda, sigma });
        }
        Ok(DilationParams { lambda, sigma })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Contraction factors on `(t, x, v)`.
    pub fn factors(&self) -> [f64; 3] {
        let s = 2.0 * self.sigma + 1.0;
        [self.lambda.powf(2.0 * self.sigma / s), self.lambda, self.lambda.powf(1.0 / s)]
    }

    /// Powers of `λ` picked up by `|D_t|^δ`, `|D_x|^δ`, `|D_v|^δ` under conjugation by `T_λ`.
    pub fn weight_exponents(&self, delta: f64) -> [f64; 3] {
        let s = 2.0 * self.sigma + 1.0;
        [2.0 * self.sigma * delta / s, delta, delta / s]
    }
}

/// A unit-width Gaussian packet on a `(t, x, v)` grid sized so that `T_λ` and `T_λ^{-1}`
/// keep it inside the box and the band.
///
/// `radius` is the tail radius in widths: the box is `[−radius, radius)` on every axis and
/// the modulation `radius/(2π)` puts the spectrum `radius` spectral widths away from zero,
/// where `|D|^δ` is smooth. Each axis gets the smallest power-of-two point count whose
/// band covers the contracted spectrum.
pub fn dilation_probe(p: &DilationParams, radius: f64) -> Result<SampledField, KineticError> {
    let l = 2.0 * radius;
    let m = radius / (2.0 * PI);
    let labels = [AxisLabel::T, AxisLabel::X, AxisLabel::V];
    let f = p.factors();
    let mut axes = Vec::with_capacity(3);
    for d in 0..3 {
        let need = (4.0 * l * f[d] * m).ceil() as usize;
        axes.push(Axis::new(need.next_power_of_two().max(8), l, labels[d])?);
    }
    Ok(SampledField::from_fn(&axes, |z| {
        let r2: f64 = z.iter().map(|v| v * v).sum();
        let phase: f64 = z.iter().sum::<f64>() * 2.0 * PI * m;
        Complex64::from_polar((-0.5 * r2).exp(), phase)
    })?)
}

/// Row-major matrix `M[j][l]` with `(M f)_j = √c · I_f(c z_j)`, `I_f` the trigonometric
/// interpolant of the samples `f`, and zero where `c z_j` leaves `[−L/2, L/2)`.
///
/// The Nyquist mode is interpolated as a cosine, so the matrix is real.
pub fn dilation_matrix(axis: &Axis, c: f64) -> Vec<f64> {
    let n = axis.points();
    let l = axis.length();
    let m = (n / 2 - 1) as f64;
    let mut out = vec![0.0; n * n];
    let sc = c.sqrt() / n as f64;
    for j in 0..n {
        let z = c * axis.node(j);
        if z < -0.5 * l * (1.0 + 1e-12) || z >= 0.5 * l {
            continue;
        }
        let s = (z + 0.5 * l) / l;
        let nyq = (PI * n as f64 * s).cos();
        for q in 0..n {
            let mut th = 2.0 * PI * (s - q as f64 / n as f64);
            th -= 2.0 * PI * (th / (2.0 * PI)).round();
            let dirichlet = if th.abs() < 1e-9 {
                2.0 * m + 1.0
            } else {
                ((m + 0.5) * th).sin() / (0.5 * th).sin()
            };
            let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
            out[j * n + q] = sc * (dirichlet + nyq * sign);
        }
    }
    out
}

/// Relative squared mass of `u` at physical nodes with `|z| >= edge` on axis `d`.
fn exterior_mass(u: &SampledField, d: usize, edge: f64) -> f64 {
    let ax = u.axes()[d];
    let shape = u.shape();
    let inner: usize = shape[d + 1..].iter().product();
    let n = ax.points();
    let total: f64 = u.values().iter().map(|v| v.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let outside: f64 = u
        .values()
        .iter()
        .enumerate()
        .filter(|(flat, _)| ax.node((flat / inner) % n).abs() >= edge)
        .map(|(_, v)| v.norm_sqr())
        .sum();
    outside / total
}

/// `u ↦ Π √c_d · u(c_d z_d)` over the listed `(axis, c)` pairs.
///
/// Contraction (`c > 1`) requires the spectrum to fit in the reduced band;
/// expansion (`c < 1`) requires the support to fit in the reduced box.
/// Either overflow beyond [`MASS_TOLERANCE`] is an error.
pub fn rescale(u: &SampledField, factors: &[(usize, f64)]) -> Result<SampledField, KineticError> {
    let mut out = u.clone();
    let shape = u.shape();
    for &(d, c) in factors {
        if d >= u.ndim() {
            return Err(GridError::AxisIndex(d).into());
        }
        if c == 1.0 {
            continue;
        }
        let ax = u.axes()[d];
        if c < 1.0 {
            let mass = exterior_mass(&out, d, 0.5 * c * ax.length());
            if mass > MASS_TOLERANCE {
                return Err(KineticError::SupportOverflow { axis: d, mass });
            }
        }
        let total: f64 = out.values().iter().map(|v| v.norm_sqr()).sum();
        let chirp = Chirp::new(&ax, c);
        let lost = Mutex::new(0.0);
        along_axis(out.values_mut(), &shape, d, |lines, n| {
            let part: f64 = lines
                .par_chunks_mut(n)
                .map_init(|| chirp.scratch(), |buf, line| chirp.apply(line, buf))
                .sum();
            *lost.lock().expect("unpoisoned") += part;
        });
        let mass = lost.into_inner().expect("unpoisoned") / ax.points() as f64;
        if c > 1.0 && total > 0.0 && mass / total > MASS_TOLERANCE {
            return Err(KineticError::BandOverflow { axis: d, mass: mass / total });
        }
    }
    Ok(out)
}

/// Bluestein evaluation of `√c · I_f(c z_j)` in `O(N log N)` per line; agrees with
/// [`dilation_matrix`] up to rounding.
struct Chirp {
    n: usize,
    p: usize,
    scale: f64,
    /// `e^{iπ c k²/N}` for `k = −N/2..N/2`, index `k + N/2`, with the Nyquist slot cleared.
    pre: Vec<Complex64>,
    /// `e^{iπ c j²/N}` times the zero-extension mask.
    post: Vec<Complex64>,
    /// `cos(πN s_j)` for the Nyquist term.
    nyq: Vec<f64>,
    /// `e^{iπ k (1 − c)}`: the box offset.
    shift: Vec<Complex64>,
    /// FFT bins beyond `nyquist / c`, the band lost under contraction.
    outband: Vec<bool>,
    /// Transform of the zero-padded kernel `e^{−iπ c m²/N}`.
    kernel: Vec<Complex64>,
    fwd_n: Arc<dyn Fft<f64>>,
    fwd_p: Arc<dyn Fft<f64>>,
    inv_p: Arc<dyn Fft<f64>>,
}

impl Chirp {
    fn new(ax: &Axis, c: f64) -> Self {
        let n = ax.points();
        let l = ax.length();
        let h = (n / 2) as i64;
        // Outputs read conv[N−1..2N−1], which never wrap for a period of 2N.
        let p = 2 * n;
        let nf = n as f64;
        let chirp = |m: f64, sign: f64| Complex64::from_polar(1.0, sign * PI * c * m * m / nf);
        let pre: Vec<Complex64> = (0..n)
            .map(|i| if i == 0 { Complex64::new(0.0, 0.0) } else { chirp(i as f64 - h as f64, 1.0) })
            .collect();
        let mut post = vec![Complex64::new(0.0, 0.0); n];
        let mut nyq = vec![0.0; n];
        for j in 0..n {
            let z = c * ax.node(j);
            if z < -0.5 * l * (1.0 + 1e-12) || z >= 0.5 * l {
                continue;
            }
            post[j] = chirp(j as f64, 1.0);
            nyq[j] = (PI * nf * (z + 0.5 * l) / l).cos();
        }
        let shift = (0..n).map(|i| Complex64::from_polar(1.0, PI * (i as f64 - h as f64) * (1.0 - c))).collect();
        // Kernel index i holds m = i − (N − 1) + N/2.
        let mut kernel = vec![Complex64::new(0.0, 0.0); p];
        for (i, k) in kernel.iter_mut().take(2 * n - 1).enumerate() {
            *k = chirp(i as f64 - (n as f64 - 1.0) + h as f64, -1.0);
        }
        let fwd_p = plan(p, Direction::Forward);
        fwd_p.process(&mut kernel);
        Chirp {
            n,
            p,
            scale: c.sqrt() / nf,
            pre,
            post,
            nyq,
            shift,
            outband: (0..n).map(|k| ax.frequency(k).abs() > ax.nyquist() / c).collect(),
            kernel,
            fwd_n: plan(n, Direction::Forward),
            fwd_p,
            inv_p: plan(p, Direction::Inverse),
        }
    }

    fn scratch(&self) -> Vec<Complex64> {
        let work = self.fwd_p.get_inplace_scratch_len().max(self.inv_p.get_inplace_scratch_len()).max(self.fwd_n.get_inplace_scratch_len());
        vec![Complex64::new(0.0, 0.0); self.p + self.n + work]
    }

    /// Resample `line` in place; returns `N` times the squared mass outside the kept band.
    fn apply(&self, line: &mut [Complex64], buf: &mut [Complex64]) -> f64 {
        let (n, p) = (self.n, self.p);
        let h = n / 2;
        let (conv, rest) = buf.split_at_mut(p);
        let (coef, work) = rest.split_at_mut(n);
        coef.copy_from_slice(line);
        self.fwd_n.process_with_scratch(coef, work);
        let nyquist = coef[h];
        let lost: f64 = coef.iter().zip(&self.outband).filter(|(_, o)| **o).map(|(v, _)| v.norm_sqr()).sum();
        conv.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for i in 0..n {
            // Coefficient of wavenumber k = i − N/2 sits at FFT bin (k mod N).
            conv[i] = coef[(i + h) % n] * self.shift[i] * self.pre[i];
        }
        self.fwd_p.process_with_scratch(conv, work);
        for (v, k) in conv.iter_mut().zip(&self.kernel) {
            *v *= k;
        }
        self.inv_p.process_with_scratch(conv, work);
        let norm = 1.0 / p as f64;
        for (j, out) in line.iter_mut().enumerate() {
            *out = (conv[j + n - 1] * norm * self.post[j] + nyquist * self.nyq[j]) * self.scale;
        }
        lost
    }
}

/// `T_λ u`.
pub fn apply_dilation(u: &SampledField, p: &DilationParams) -> Result<SampledField, KineticError> {
    let axes = txv_axes(u)?;
    let f = p.factors();
    rescale(u, &[(axes[0], f[0]), (axes[1], f[1]), (axes[2], f[2])])
}

/// `T_λ^{-1} u`.
pub fn apply_dilation_inverse(u: &SampledField, p: &DilationParams) -> Result<SampledField, KineticError> {
    let axes = txv_axes(u)?;
    let f = p.factors();
    rescale(u, &[(axes[0], 1.0 / f[0]), (axes[1], 1.0 / f[1]), (axes[2], 1.0 / f[2])])
}

/// `|D_d|^δ` on one axis.
fn abs_d(u: &SampledField, d: usize, delta: f64) -> Result<SampledField, KineticError> {
    Ok(apply_multiplier(u, &MultiplierSpec::abs_power(delta), &[d])?)
}

fn rel(a: &SampledField, b: &SampledField) -> Result<f64, KineticError> {
    Ok(a.sub(b)?.norm_l2() / b.norm_l2())
}

/// Residuals of `T_λ^{-1} P₀ T_λ = λ^{2σ/(2σ+1)} P₀` and of the per-term weight identities
/// `T_λ^{-1} |D_i|^δ T_λ = λ^{e_i} |D_i|^δ` on `u` (constant coefficient `a ≡ 1`).
///
/// Metrics: `p0_residual`, `weight_t_residual`, `weight_x_residual`, `weight_v_residual`,
/// `weight_sum_residual`, `unitarity_defect`.
pub fn verify_dilation_conjugation(
    u: &SampledField,
    p: &DilationParams,
    delta: f64,
) -> Result<EstimateReport, KineticError> {
    let axes = txv_axes(u)?;
    let sigma = p.sigma();
    let lam = p.lambda();
    let tu = apply_dilation(u, p)?;
    let unitarity = (tu.norm_l2() - u.norm_l2()).abs() / u.norm_l2();
    let p0u = apply_p0(u, sigma)?;
    let lhs = apply_dilation_inverse(&apply_p0(&tu, sigma)?, p)?;
    let rhs = p0u.scale(Complex64::new(lam.powf(gain_exponent(sigma)), 0.0));
    let p0_res = rel(&lhs, &rhs)?;
    let ex = p.weight_exponents(delta);
    let mut res = [0.0; 3];
    let mut sum_l: Option<SampledField> = None;
    let mut sum_r: Option<SampledField> = None;
    for i in 0..3 {
        let l = apply_dilation_inverse(&abs_d(&tu, axes[i], delta)?, p)?;
        let r = abs_d(u, axes[i], delta)?.scale(Complex64::new(lam.powf(ex[i]), 0.0));
        res[i] = rel(&l, &r)?;
        sum_l = Some(match sum_l {
            Some(s) => s.add(&l)?,
            None => l,
        });
        sum_r = Some(match sum_r {
            Some(s) => s.add(&r)?,
            None => r,
        });
    }
    let sum_res = rel(&sum_l.expect("three terms"), &sum_r.expect("three terms"))?;
    Ok(EstimateReport::new("dilation-conjugation", lhs.norm_l2(), rhs.norm_l2())
        .with_context("lambda", lam)
        .with_context("sigma", sigma)
        .with_context("delta", delta)
        .with_metric("p0_residual", p0_res)
        .with_metric("weight_t_residual", res[0])
        .with_metric("weight_x_residual", res[1])
        .with_metric("weight_v_residual", res[2])
        .with_metric("weight_sum_residual", sum_res)
        .with_metric("exponent_t", ex[0])
        .with_metric("exponent_x", ex[1])
        .with_metric("exponent_v", ex[2])
        .with_metric("unitarity_defect", unitarity))
}

/// Which shear to apply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShearMode {
    /// `M_t` on a 2D field over `(x, y)`.
    Fixed(f64),
    /// `M` on a 3D field over `(t, x, y)`, with `t` read from the first axis.
    Joint,
}

/// Translate each contiguous row (length `n`) by `shift(row)` using Fourier phases:
/// `row(z) ↦ row(z − s)`. Returns the relative squared mass that wrapped around.
fn shift_rows<F>(values: &mut [Complex64], ax: &Axis, shift: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let n = ax.points();
    let l = ax.length();
    let fwd = plan(n, Direction::Forward);
    let inv = plan(n, Direction::Inverse);
    let total: f64 = values.iter().map(|v| v.norm_sqr()).sum();
    let wrapped: Vec<f64> = values
        .par_chunks_mut(n)
        .enumerate()
        .map(|(r, row)| {
            let s = shift(r);
            let lost: f64 = row
                .iter()
                .enumerate()
                .filter(|(j, _)| {
                    let z = ax.node(*j) + s;
                    z < -0.5 * l || z >= 0.5 * l
                })
                .map(|(_, v)| v.norm_sqr())
                .sum();
            if s != 0.0 {
                fwd.process(row);
                for (k, v) in row.iter_mut().enumerate() {
                    *v *= Complex64::from_polar(1.0 / n as f64, -2.0 * PI * ax.frequency(k) * s);
                }
                inv.process(row);
            }
            lost
        })
        .collect();
    if total == 0.0 {
        0.0
    } else {
        wrapped.iter().sum::<f64>() / total
    }
}

/// Swap the last two axes of a field (both must have the same points and length).
fn swap_last_two(u: &SampledField, labels: [AxisLabel; 2]) -> Result<SampledField, KineticError> {
    let nd = u.ndim();
    let ax = u.axes();
    let (a, b) = (ax[nd - 2], ax[nd - 1]);
    if a.points() != b.points() || a.length() != b.length() {
        return Err(KineticError::Shape("two sheared axes with equal points and length".into()));
    }
    let n = a.points();
    let block = n * n;
    let mut out = vec![Complex64::new(0.0, 0.0); u.len()];
    out.par_chunks_mut(block).zip(u.values().par_chunks(block)).for_each(|(dst, src)| {
        for i in 0..n {
            for j in 0..n {
                dst[i * n + j] = src[j * n + i];
            }
        }
    });
    let mut axes = ax.to_vec();
    axes[nd - 2] = a.with_label(labels[0]);
    axes[nd - 1] = b.with_label(labels[1]);
    Ok(SampledField::from_values(&axes, out)?)
}

fn shear_shape(u: &SampledField, mode: ShearMode) -> Result<(), KineticError> {
    let want = match mode {
        ShearMode::Fixed(_) => 2,
        ShearMode::Joint => 3,
    };
    if u.ndim() != want {
        return Err(KineticError::Shape(format!("a {want}-axis field for this shear mode")));
    }
    Ok(())
}

/// Shear offsets per contiguous row: `t · x₁` where `x₁` is the second-to-last coordinate.
fn row_shifts(u: &SampledField, mode: ShearMode) -> impl Fn(usize) -> f64 + Sync {
    let ax = u.axes().to_vec();
    let nd = ax.len();
    move |row| {
        let n1 = ax[nd - 2].points();
        let x1 = ax[nd - 2].node(row % n1);
        let t = match mode {
            ShearMode::Fixed(t) => t,
            ShearMode::Joint => ax[0].node(row / n1),
        };
        t * x1
    }
}

/// `(M_t u)(x₁, x₂) = u(x₂ − t x₁, x₁)`; in joint mode `(M u)(t, x₁, x₂) = u(t, x₂ − t x₁, x₁)`.
/// Output axes are labelled `x1`, `x2`.
pub fn apply_shear(u: &SampledField, mode: ShearMode) -> Result<SampledField, KineticError> {
    shear_shape(u, mode)?;
    let mut s = swap_last_two(u, [AxisLabel::X1, AxisLabel::X2])?;
    let shifts = row_shifts(&s, mode);
    let ax = s.axes()[s.ndim() - 1];
    let mass = shift_rows(s.values_mut(), &ax, shifts);
    if mass > MASS_TOLERANCE {
        return Err(KineticError::SupportOverflow { axis: u.ndim() - 1, mass });
    }
    Ok(s)
}

/// `(M_t^{-1} u)(x, y) = u(y, x + t y)`; joint mode likewise with `t` from the first axis.
/// Output axes are labelled `x`, `v` (the latter carrying `y`).
pub fn apply_shear_inverse(u: &SampledField, mode: ShearMode) -> Result<SampledField, KineticError> {
    shear_shape(u, mode)?;
    let mut s = u.clone();
    let shifts = row_shifts(u, mode);
    let ax = s.axes()[s.ndim() - 1];
    let mass = shift_rows(s.values_mut(), &ax, |r| -shifts(r));
    if mass > MASS_TOLERANCE {
        return Err(KineticError::SupportOverflow { axis: u.ndim() - 1, mass });
    }
    swap_last_two(&s, [AxisLabel::X, AxisLabel::V])
}

/// `iD_t` along the first axis.
fn i_dt(u: &SampledField) -> Result<SampledField, KineticError> {
    Ok(u.apply_symbol(&[0], |z| I * z[0])?)
}

/// Apply a per-`t` Weyl quantization in the last two variables of a `(t, ·, ·)` field.
fn weyl_slices<F>(u: &SampledField, budget: usize, symbol_at: F) -> Result<SampledField, KineticError>
where
    F: Fn(f64) -> PhaseSymbol + Sync,
{
    if u.ndim() != 3 {
        return Err(KineticError::Shape("a 3-axis (t, ·, ·) field".into()));
    }
    let ax = u.axes();
    let slice_axes = [ax[1], ax[2]];
    let block = ax[1].points() * ax[2].points();
    let slices: Vec<Result<Vec<Complex64>, KineticError>> = (0..ax[0].points())
        .map(|i| {
            let t = ax[0].node(i);
            let s = SampledField::from_values(&slice_axes, u.values()[i * block..(i + 1) * block].to_vec())?;
            Ok(weyl_apply(&symbol_at(t), &s, budget)?.into_values())
        })
        .collect();
    let mut out = Vec::with_capacity(u.len());
    for s in slices {
        out.extend(s?);
    }
    Ok(u.with_values(out))
}

/// `iD_t + [a(t, ξ₂, ξ₁ + tξ₂) F(x₂ − t x₁)]^w` on a `(t, x₁, x₂)` field,
/// the Weyl part quantized in `(x₁, x₂)` slice by slice.
///
/// The Fourier-side coefficient `a(t, ξ, η)` is read from `a` as `a.eval(t, ξ, η)`.
pub fn apply_normal_form(
    u: &SampledField,
    a: &CoefficientField,
    spec: &MultiplierSpec,
    budget: usize,
) -> Result<SampledField, KineticError> {
    let dt = i_dt(u)?;
    let part = if a.is_constant_one() {
        let f = spec.clone();
        u.multiply_by(|c| Complex64::new(f.eval(&[c[2] - c[0] * c[1]]), 0.0))
    } else {
        weyl_slices(u, budget, |t| {
            let (a, f) = (a.clone(), spec.clone());
            PhaseSymbol::new("normal-form", f64::INFINITY, move |x, k| {
                a.eval(t, k[1], k[0] + t * k[1]) * f.eval(&[x[1] - t * x[0]])
            })
        })?
    };
    Ok(dt.add(&part)?)
}

/// The Fourier-side operator `iD_t − i y D_x + [a(t, ξ, η) F(x)]^w` on a `(t, x, y)` field.
pub fn apply_fourier_side(
    u: &SampledField,
    a: &CoefficientField,
    spec: &MultiplierSpec,
    budget: usize,
) -> Result<SampledField, KineticError> {
    if u.ndim() != 3 {
        return Err(KineticError::Shape("a 3-axis (t, x, y) field".into()));
    }
    let dt = i_dt(u)?;
    let transport = u.apply_symbol(&[1], |z| -I * z[0])?.multiply_by(|c| Complex64::new(c[2], 0.0));
    let part = if a.is_constant_one() {
        let f = spec.clone();
        u.multiply_by(|c| Complex64::new(f.eval(&[c[1]]), 0.0))
    } else {
        weyl_slices(u, budget, |t| {
            let (a, f) = (a.clone(), spec.clone());
            PhaseSymbol::new("fourier-side", f64::INFINITY, move |x, k| a.eval(t, k[0], k[1]) * f.eval(&[x[0]]))
        })?
    };
    Ok(dt.add(&transport)?.add(&part)?)
}

/// A Gaussian probe on `(t, x₁, x₂)` with 32 points per axis: widths `0.2` in `t` and `0.35`
/// in `x`, boxes of length 3 and 5, centred at `x₁ = 0.2` with a small modulation.
///
/// The shear keeps it inside the box for every `t` node. Most of its mass sits where
/// `F(x₂ − t x₁)` is quadratic; the mass in the cutoff annulus `1 < |x₂ − t x₁| < 2`
/// sets the interpolation error of the two-path comparison.
pub fn normal_form_probe() -> Result<SampledField, KineticError> {
    let axes = [
        Axis::new(32, 3.0, AxisLabel::T)?,
        Axis::new(32, 5.0, AxisLabel::X1)?,
        Axis::new(32, 5.0, AxisLabel::X2)?,
    ];
    let (wt, wx) = (0.2_f64, 0.35_f64);
    Ok(SampledField::from_fn(&axes, |z| {
        let e = -z[0] * z[0] / (2.0 * wt * wt) - ((z[1] - 0.2).powi(2) + z[2] * z[2]) / (2.0 * wx * wx);
        Complex64::from_polar(e.exp(), 2.0 * PI * 0.1 * (z[1] - z[2]))
    })?)
}

/// Normal-form identities on a `(t, x₁, x₂)` field `u`.
///
/// Metrics: `unitarity_defect` (of `M`), `inverse_defect` (`‖M M^{-1} u − u‖/‖u‖`),
/// `dt_conjugation_residual` (`M iD_t M^{-1} u` against `iD_t u + i x₁ D_{x₂} u`),
/// `two_path_residual` (`‖M P_fourier M^{-1} u − P_normal u‖/‖u‖`),
/// `weight_identity_residual` (`M (1 + ⟨x⟩^{2σ} + ⟨y⟩^δ) M^{-1}` against `1 + ⟨x₂ − t x₁⟩^{2σ} + ⟨x₁⟩^δ`).
pub fn verify_normal_form(
    u: &SampledField,
    a: &CoefficientField,
    spec: &MultiplierSpec,
    sigma: f64,
    budget: usize,
) -> Result<EstimateReport, KineticError> {
    let nu = u.norm_l2();
    let mu = apply_shear(u, ShearMode::Joint)?;
    let unitarity = (mu.norm_l2() - nu).abs() / nu;
    let minv = apply_shear_inverse(u, ShearMode::Joint)?;
    let back = apply_shear(&minv, ShearMode::Joint)?;
    let inverse = back.sub(u)?.norm_l2() / nu;

    let lhs = apply_shear(&i_dt(&minv)?, ShearMode::Joint)?;
    let rhs = i_dt(u)?.add(&u.apply_symbol(&[2], |z| I * z[0])?.multiply_by(|c| Complex64::new(c[1], 0.0)))?;
    let dt_res = lhs.sub(&rhs)?.norm_l2() / rhs.norm_l2();

    let p_fourier = apply_fourier_side(&minv, a, spec, budget)?;
    let path_a = apply_shear(&p_fourier, ShearMode::Joint)?;
    let path_b = apply_normal_form(u, a, spec, budget)?;
    let two_path = path_a.sub(&path_b)?.norm_l2() / nu;

    let d = gain_exponent(sigma);
    let br = |z: f64, e: f64| (1.0 + z * z).powf(0.5 * e);
    let w = minv.multiply_by(|c| Complex64::new(1.0 + br(c[1], 2.0 * sigma) + br(c[2], d), 0.0));
    let conj = apply_shear(&w, ShearMode::Joint)?;
    let direct = u.multiply_by(|c| Complex64::new(1.0 + br(c[2] - c[0] * c[1], 2.0 * sigma) + br(c[1], d), 0.0));
    let weight_res = conj.sub(&direct)?.norm_l2() / direct.norm_l2();

    Ok(EstimateReport::new("normal-form", path_b.norm_l2(), nu)
        .with_context("sigma", sigma)
        .with_tag("coefficient", a.name())
        .with_metric("unitarity_defect", unitarity)
        .with_metric("inverse_defect", inverse)
        .with_metric("dt_conjugation_residual", dt_res)
        .with_metric("two_path_residual", two_path)
        .with_metric("weight_identity_residual", weight_res))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn axes3(n: [usize; 3], l: [f64; 3]) -> Vec<Axis> {
        vec![
            Axis::new(n[0], l[0], AxisLabel::T).unwrap(),
            Axis::new(n[1], l[1], AxisLabel::X).unwrap(),
            Axis::new(n[2], l[2], AxisLabel::V).unwrap(),
        ]
    }

    fn packet(axes: &[Axis], w: [f64; 3], k: [f64; 3]) -> SampledField {
        SampledField::from_fn(axes, |z| {
            let mut e = 0.0;
            let mut ph = 0.0;
            for d in 0..3 {
                e -= z[d] * z[d] / (2.0 * w[d] * w[d]);
                ph += 2.0 * PI * k[d] * z[d];
            }
            Complex64::from_polar(e.exp(), ph)
        })
        .unwrap()
    }

    #[test]
    fn coefficient_families_respect_bounds() {
        let ax = axes3([16, 16, 16], [6.0, 8.0, 8.0]);
        for fam in [
            CoefficientFamily::Constant { value: 1.0 },
            CoefficientFamily::SinSqX { amplitude: 0.5 },
            CoefficientFamily::CosTGaussV { amplitude: 0.4 },
        ] {
            let a = CoefficientField::from_family(fam).unwrap();
            assert!(a.a0() >= 0.5);
            a.check_on(&ax[0], &ax[1], &ax[2]).unwrap();
        }
        let bad = CoefficientField::new("liar", 1.0, 2.0, |_, x, _| 1.0 + x).unwrap();
        assert!(matches!(bad.check_on(&ax[0], &ax[1], &ax[2]), Err(KineticError::Coefficient { .. })));
        assert!(CoefficientField::constant(0.0).is_err());
    }

    #[test]
    fn p_without_transport_is_the_fractional_laplacian() {
        let ax = axes3([16, 16, 32], [4.0, 4.0, 8.0]);
        let u = SampledField::from_real_fn(&ax, |z| (-z[2] * z[2]).exp()).unwrap();
        let spec = MultiplierSpec::f_sigma(0.5).unwrap();
        let pu = apply_p(&u, &CoefficientField::constant(1.0).unwrap(), &spec).unwrap();
        let lap = apply_multiplier(&u, &spec, &[2]).unwrap();
        assert!(pu.sub(&lap).unwrap().norm_l2() < 1e-12 * lap.norm_l2());
    }

    #[test]
    fn p_on_plane_wave_matches_closed_form() {
        let ax = axes3([16, 16, 64], [4.0, 4.0, 16.0]);
        let (tau, xi) = (0.75, -1.25);
        let g = |v: f64| (-PI * v * v).exp();
        let u = SampledField::from_fn(&ax, |z| Complex64::from_polar(g(z[2]), 2.0 * PI * (tau * z[0] + xi * z[1]))).unwrap();
        let spec = MultiplierSpec::f_sigma(0.3).unwrap();
        let pu = apply_p(&u, &CoefficientField::constant(1.0).unwrap(), &spec).unwrap();
        let lap = apply_multiplier(&u, &spec, &[2]).unwrap();
        let want = u.multiply_by(|z| 2.0 * PI * I * (tau + z[2] * xi)).add(&lap).unwrap();
        assert!(pu.sub(&want).unwrap().norm_l2() < 1e-10 * want.norm_l2());
    }

    #[test]
    fn p_matches_direct_dft_oracle() {
        // Direct O(N²) sums on each axis, independent of the FFT path.
        let n = 32;
        let ax = axes3([n, n, n], [6.0, 6.0, 8.0]);
        let u = packet(&ax, [0.6, 0.7, 0.8], [0.2, -0.3, 0.0]);
        let a = CoefficientField::from_family(CoefficientFamily::SinSqX { amplitude: 0.5 }).unwrap();
        let spec = MultiplierSpec::f_sigma(0.6).unwrap();
        let got = apply_p(&u, &a, &spec).unwrap();
        let apply_axis = |f: &SampledField, d: usize, sym: &dyn Fn(f64) -> Complex64| -> SampledField {
            let axd = ax[d];
            let nodes = axd.nodes();
            let freqs = axd.frequencies();
            let st = crate::grid::strides(&f.shape());
            let mut out = f.clone();
            for flat in 0..f.len() {
                let j = (flat / st[d]) % n;
                let base = flat - j * st[d];
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, &e) in freqs.iter().enumerate() {
                    let _ = k;
                    let mut hat = Complex64::new(0.0, 0.0);
                    for (l, &z) in nodes.iter().enumerate() {
                        hat += f.values()[base + l * st[d]] * Complex64::from_polar(1.0, -2.0 * PI * z * e);
                    }
                    acc += hat * sym(e) * Complex64::from_polar(1.0, 2.0 * PI * nodes[j] * e);
                }
                out.values_mut()[flat] = acc / n as f64;
            }
            out
        };
        let dt = apply_axis(&u, 0, &|e| 2.0 * PI * I * e);
        let dx = apply_axis(&u, 1, &|e| 2.0 * PI * I * e).multiply_by(|c| Complex64::new(c[2], 0.0));
        let lap = apply_axis(&u, 2, &|e| Complex64::new(spec.eval(&[e]), 0.0))
            .multiply_by(|c| Complex64::new(a.eval(c[0], c[1], c[2]), 0.0));
        let want = dt.add(&dx).unwrap().add(&lap).unwrap();
        assert!(got.sub(&want).unwrap().norm_l2() < 1e-8 * want.norm_l2());
    }

    #[test]
    fn dilation_validation() {
        assert!(DilationParams::new(0.5, 0.5).is_err());
        assert!(DilationParams::new(2.0, 1.0).is_err());
        let p = DilationParams::new(4.0, 0.5).unwrap();
        let f = p.factors();
        assert!((f[0] - 2.0).abs() < 1e-15 && f[1] == 4.0 && (f[2] - 2.0).abs() < 1e-15);
        assert!((f.iter().product::<f64>().sqrt() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn dilation_identity_and_matrix() {
        let a = Axis::new(16, 4.0, AxisLabel::X).unwrap();
        let m = dilation_matrix(&a, 1.0);
        for j in 0..16 {
            for q in 0..16 {
                let e = if j == q { 1.0 } else { 0.0 };
                assert!((m[j * 16 + q] - e).abs() < 1e-13);
            }
        }
        let ax = axes3([16, 16, 16], [6.0, 6.0, 6.0]);
        let u = packet(&ax, [0.7, 0.7, 0.7], [0.0, 0.0, 0.0]);
        let same = apply_dilation(&u, &DilationParams::new(1.0, 0.5).unwrap()).unwrap();
        assert!(same.sub(&u).unwrap().norm_l2() < 1e-13);
    }

    #[test]
    fn fast_rescale_matches_dense_matrix() {
        let mut rng = 0x2545_f491_u64;
        let mut next = || {
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            (rng >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for (n, c) in [(16, 0.6), (32, 1.7), (64, 3.1), (16, 1.0)] {
            let a = Axis::new(n, 5.0, AxisLabel::X).unwrap();
            let vals: Vec<Complex64> = (0..n).map(|_| Complex64::new(next(), next())).collect();
            let mat = dilation_matrix(&a, c);
            let mut line = vals.clone();
            let chirp = Chirp::new(&a, c);
            let _ = chirp.apply(&mut line, &mut chirp.scratch());
            for j in 0..n {
                let want: Complex64 = (0..n).map(|q| vals[q] * mat[j * n + q]).sum();
                assert!((line[j] - want).norm() < 1e-12, "n={n} c={c} j={j}");
            }
        }
    }

    #[test]
    fn one_dimensional_rescale_of_gaussian() {
        let a = Axis::new(128, 12.0, AxisLabel::X).unwrap();
        let g = |w: f64| SampledField::from_real_fn(&[a], move |z| (-z[0] * z[0] / (2.0 * w * w)).exp()).unwrap();
        let c: f64 = 2.0;
        let got = rescale(&g(0.7), &[(0, c)]).unwrap();
        let want = g(0.7 / c).scale(Complex64::new(c.sqrt(), 0.0));
        assert!(got.sub(&want).unwrap().norm_l2() < 1e-12);
        let back = rescale(&got, &[(0, 1.0 / c)]).unwrap();
        assert!(back.sub(&g(0.7)).unwrap().norm_l2() < 1e-12);
        assert!(matches!(rescale(&g(1.5), &[(0, 0.2)]), Err(KineticError::SupportOverflow { .. })));
        assert!(matches!(rescale(&g(0.05), &[(0, 8.0)]), Err(KineticError::BandOverflow { .. })));
    }

    #[test]
    fn probe_grids_pass_conjugation() {
        let p = DilationParams::new(2.0, 0.5).unwrap();
        let u = dilation_probe(&p, 5.8).unwrap();
        assert_eq!(u.shape(), vec![64, 128, 64]);
        let r = verify_dilation_conjugation(&u, &p, gain_exponent(0.5)).unwrap();
        for (k, v) in &r.metrics {
            if k.ends_with("residual") || k.ends_with("defect") {
                assert!(*v < 1e-6, "{k} = {v}");
            }
        }
        assert!((r.metric("exponent_x").unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dilation_group_law() {
        let ax = axes3([64, 128, 64], [12.0, 12.0, 12.0]);
        let u = packet(&ax, [1.0, 1.0, 1.0], [0.1, 0.1, 0.1]);
        let s = 0.5;
        let p2 = DilationParams::new(2.0, s).unwrap();
        let p15 = DilationParams::new(1.5, s).unwrap();
        let p3 = DilationParams::new(3.0, s).unwrap();
        let two = apply_dilation(&apply_dilation(&u, &p2).unwrap(), &p15).unwrap();
        let one = apply_dilation(&u, &p3).unwrap();
        assert!(two.sub(&one).unwrap().norm_l2() < 1e-7 * u.norm_l2());
        assert!((one.norm_l2() - u.norm_l2()).abs() < 1e-8 * u.norm_l2());
    }

    #[test]
    fn p0_real_part_is_the_dissipation() {
        let ax = axes3([16, 16, 32], [4.0, 6.0, 8.0]);
        let u = packet(&ax, [0.5, 0.8, 0.9], [0.5, -0.4, 0.7]);
        for s in [0.25, 0.75] {
            let p0u = apply_p0(&u, s).unwrap();
            let lap = apply_multiplier(&u, &MultiplierSpec::abs_power(2.0 * s), &[2]).unwrap();
            let re = p0u.inner(&u).unwrap().re;
            let diss = lap.inner(&u).unwrap().re;
            assert!((re - diss).abs() < 1e-10 * u.norm_l2().powi(2));
            assert!(diss >= 0.0);
        }
    }

    #[test]
    fn shear_at_zero_is_a_swap() {
        let a = Axis::new(16, 4.0, AxisLabel::X).unwrap();
        let b = Axis::new(16, 4.0, AxisLabel::V).unwrap();
        let u = SampledField::from_real_fn(&[a, b], |z| (-(z[0] - 0.3).powi(2) - 2.0 * z[1] * z[1]).exp()).unwrap();
        let m = apply_shear(&u, ShearMode::Fixed(0.0)).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                assert_eq!(m.values()[i * 16 + j], u.values()[j * 16 + i]);
            }
        }
        assert_eq!(m.axes()[0].label(), AxisLabel::X1);
        let back = apply_shear_inverse(&m, ShearMode::Fixed(0.0)).unwrap();
        assert_eq!(back, u);
    }

    #[test]
    fn shear_matches_pointwise_formula() {
        let a = Axis::new(64, 12.0, AxisLabel::X).unwrap();
        let f = |x: f64, y: f64| (-(x * x) / 1.5 - 2.0 * y * y).exp();
        let u = SampledField::from_real_fn(&[a, a], |z| f(z[0], z[1])).unwrap();
        let t = 0.7;
        let m = apply_shear(&u, ShearMode::Fixed(t)).unwrap();
        let want = SampledField::from_real_fn(&[a, a], |z| f(z[1] - t * z[0], z[0])).unwrap();
        assert!(m.sub(&want).unwrap().norm_l2() < 1e-9);
        let mi = apply_shear_inverse(&u, ShearMode::Fixed(t)).unwrap();
        let want = SampledField::from_real_fn(&[a, a], |z| f(z[1], z[0] + t * z[1])).unwrap();
        assert!(mi.sub(&want).unwrap().norm_l2() < 1e-9);
    }

    #[test]
    fn shear_overflow_is_reported() {
        let a = Axis::new(32, 4.0, AxisLabel::X).unwrap();
        let u = SampledField::from_real_fn(&[a, a], |z| (-(z[0] * z[0]) - z[1] * z[1]).exp()).unwrap();
        assert!(matches!(apply_shear(&u, ShearMode::Fixed(3.0)), Err(KineticError::SupportOverflow { .. })));
        assert!(matches!(apply_shear(&u, ShearMode::Joint), Err(KineticError::Shape(_))));
    }

    #[test]
    fn normal_form_identities_constant_coefficient() {
        let u = normal_form_probe().unwrap();
        let a = CoefficientField::constant(1.0).unwrap();
        let r = verify_normal_form(&u, &a, &MultiplierSpec::f_sigma(0.5).unwrap(), 0.5, 1 << 28).unwrap();
        assert!(r.metric("unitarity_defect").unwrap() < 1e-12);
        assert!(r.metric("inverse_defect").unwrap() < 1e-12);
        assert!(r.metric("dt_conjugation_residual").unwrap() < 1e-6);
        assert!(r.metric("two_path_residual").unwrap() < 1e-5);
        assert!(r.metric("weight_identity_residual").unwrap() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn shear_is_unitary(t in -1.0f64..1.0, c in -0.5f64..0.5, k in -1.0f64..1.0) {
            let a = Axis::new(32, 10.0, AxisLabel::X).unwrap();
            let u = SampledField::from_fn(&[a, a], |z| {
                Complex64::from_polar((-(z[0] - c).powi(2) - 1.5 * z[1] * z[1]).exp(), 2.0 * PI * k * z[1])
            }).unwrap();
            let m = apply_shear(&u, ShearMode::Fixed(t)).unwrap();
            prop_assert!((m.norm_l2() - u.norm_l2()).abs() <= 1e-12 * u.norm_l2());
            let back = apply_shear_inverse(&m, ShearMode::Fixed(t)).unwrap();
            prop_assert!(back.sub(&u).unwrap().norm_l2() <= 1e-12 * u.norm_l2());
        }

        #[test]
        fn apply_p_is_linear(s in 0.1f64..0.9, alpha in -2.0f64..2.0) {
            let ax = axes3([16, 16, 16], [4.0, 4.0, 6.0]);
            let u = packet(&ax, [0.5, 0.6, 0.7], [0.25, 0.5, 0.0]);
            let v = packet(&ax, [0.4, 0.5, 0.9], [-0.5, 0.0, 0.75]);
            let a = CoefficientField::from_family(CoefficientFamily::CosTGaussV { amplitude: 0.4 }).unwrap();
            let spec = MultiplierSpec::f_sigma(s).unwrap();
            let lhs = apply_p(&u.axpy(Complex64::new(alpha, 0.0), &v).unwrap(), &a, &spec).unwrap();
            let rhs = apply_p(&u, &a, &spec).unwrap().axpy(Complex64::new(alpha, 0.0), &apply_p(&v, &a, &spec).unwrap()).unwrap();
            prop_assert!(lhs.sub(&rhs).unwrap().norm_l2() <= 1e-12 * (1.0 + lhs.norm_l2()));
        }
    }
}
