//! Wave-packet transform, Wick and Weyl quantization on periodic grids.
//!
//! The packets are `φ_{y,η}(x) = (2λ)^{n/4} e^{−πλ|x−y|²} e^{2iπ(x−y)·η}`,
//! periodized in `x − y`. The y-lattice is every `stride`-th grid node and
//! the η-lattice is the full dual lattice `k/L`, so `W*W` is multiplication by
//! a Riemann sum of `g²` that equals 1 up to a Poisson error of order
//! `e^{−π/(2λΔy²)}`. Phase-space fields are ordinary [`SampledField`]s over
//! the axes `(y₁[, y₂], η₁[, η₂])` with centered η nodes.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::grid::{along_axis, plan, transform_axes, Axis, AxisLabel, Direction, GridError, SampledField};
use crate::report::EstimateReport;

/// Default cap on dense Weyl kernel tables, in bytes.
pub const DEFAULT_KERNEL_BUDGET: usize = 512 << 20;

/// Periodic images kept on each side when periodizing packets and kernels.
const IMAGES: i32 = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantizationError {
    #[error("invalid frame: {0}")]
    Frame(String),
    #[error("dense kernel needs {required} bytes, budget is {budget}")]
    MemoryBudget { required: usize, budget: usize },
    #[error("quantizers act on fields with 1 or 2 axes, got {0}")]
    Dimension(usize),
    #[error(transparent)]
    Grid(#[from] GridError),
}

pub type SymbolFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// A real symbol `a(x, ξ)` on phase space.
#[derive(Clone)]
pub struct PhaseSymbol {
    name: String,
    sup: f64,
    rule: SymbolFn,
}

impl fmt::Debug for PhaseSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhaseSymbol").field("name", &self.name).field("sup", &self.sup).finish()
    }
}

impl PhaseSymbol {
    /// `sup` is the bound reported for the symbol; use `f64::INFINITY` for unbounded symbols.
    pub fn new(
        name: impl Into<String>,
        sup: f64,
        rule: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        PhaseSymbol { name: name.into(), sup, rule: Arc::new(rule) }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("const({c})"), c.abs(), move |_, _| c)
    }

    /// `α + β·x + γ·ξ`.
    pub fn affine(alpha: f64, beta: Vec<f64>, gamma: Vec<f64>) -> Self {
        Self::new("affine", f64::INFINITY, move |x, xi| {
            alpha
                + beta.iter().zip(x).map(|(b, x)| b * x).sum::<f64>()
                + gamma.iter().zip(xi).map(|(g, k)| g * k).sum::<f64>()
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sup(&self) -> f64 {
        self.sup
    }

    pub fn eval(&self, x: &[f64], xi: &[f64]) -> f64 {
        (self.rule)(x, xi)
    }
}

fn check_dim(n: usize) -> Result<(), QuantizationError> {
    if n == 0 || n > 2 {
        Err(QuantizationError::Dimension(n))
    } else {
        Ok(())
    }
}

/// Odometer over a multi-index with the last entry fastest.
fn unflatten(mut flat: usize, dims: &[usize], out: &mut [usize]) {
    for d in (0..dims.len()).rev() {
        out[d] = flat % dims[d];
        flat /= dims[d];
    }
}

/// Gaussian wave-packet frame over 1 or 2 base axes.
#[derive(Debug, Clone, PartialEq)]
pub struct WavePacketFrame {
    lambda: f64,
    base: Vec<Axis>,
    stride: usize,
}

impl WavePacketFrame {
    pub fn new(lambda: f64, base: &[Axis], stride: usize) -> Result<Self, QuantizationError> {
        check_dim(base.len())?;
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(QuantizationError::Frame(format!("lambda must lie in (0, 1], got {lambda}")));
        }
        if stride == 0 || !stride.is_power_of_two() {
            return Err(QuantizationError::Frame(format!("stride must be a power of two, got {stride}")));
        }
        for a in base {
            if a.points() / stride < 8 {
                return Err(QuantizationError::Frame(format!(
                    "stride {stride} leaves fewer than 8 y-points on a {}-point axis",
                    a.points()
                )));
            }
            let cell = stride as f64 * a.spacing() / a.length();
            if cell > 0.25 + 1e-15 {
                return Err(QuantizationError::Frame(format!(
                    "lattice cell Δy·Δη = {cell} exceeds 1/4"
                )));
            }
        }
        Ok(WavePacketFrame { lambda, base: base.to_vec(), stride })
    }

    /// The default 1D frame: 32 points on a box of side 8, every node a y-point.
    pub fn default_1d(lambda: f64) -> Result<Self, QuantizationError> {
        Self::new(lambda, &[Axis::new(32, 8.0, AxisLabel::X)?], 1)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn base_axes(&self) -> &[Axis] {
        &self.base
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    pub fn y_axes(&self) -> Vec<Axis> {
        let labels = [AxisLabel::X1, AxisLabel::X2];
        self.base
            .iter()
            .zip(labels)
            .map(|(a, l)| Axis::new(a.points() / self.stride, a.length(), l).expect("validated"))
            .collect()
    }

    pub fn eta_axes(&self) -> Vec<Axis> {
        let labels = [AxisLabel::Xi1, AxisLabel::Xi2];
        self.base
            .iter()
            .zip(labels)
            .map(|(a, l)| Axis::new(a.points(), a.points() as f64 / a.length(), l).expect("validated"))
            .collect()
    }

    /// `(y₁[, y₂], η₁[, η₂])`.
    pub fn phase_axes(&self) -> Vec<Axis> {
        let mut v = self.y_axes();
        v.extend(self.eta_axes());
        v
    }

    /// Phase-space cell volume `Π Δy Δη`.
    pub fn cell(&self) -> f64 {
        self.base.iter().map(|a| self.stride as f64 * a.spacing() / a.length()).product()
    }

    /// `1 / (Δy Δη)` for the coarsest axis.
    pub fn oversampling(&self) -> f64 {
        self.base
            .iter()
            .map(|a| a.length() / (self.stride as f64 * a.spacing()))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn phase_points(&self) -> usize {
        self.base.iter().map(|a| a.points() * a.points() / self.stride).product()
    }

    /// Periodized 1D window `(2λ)^{1/4} Σ_m e^{−πλ(d+mL)²}`.
    fn window(&self, length: f64, d: f64) -> f64 {
        let c = (2.0 * self.lambda).powf(0.25);
        (-IMAGES..=IMAGES)
            .map(|m| {
                let s = d + m as f64 * length;
                (-PI * self.lambda * s * s).exp()
            })
            .sum::<f64>()
            * c
    }

    /// `win[d][a * N + j] = g(x_j − y_a)` per axis.
    fn windows(&self) -> Vec<Vec<f64>> {
        self.base
            .iter()
            .map(|ax| {
                let n = ax.points();
                let ny = n / self.stride;
                let mut w = vec![0.0; ny * n];
                for a in 0..ny {
                    let y = ax.node(a * self.stride);
                    for j in 0..n {
                        w[a * n + j] = self.window(ax.length(), ax.node(j) - y);
                    }
                }
                w
            })
            .collect()
    }

    /// `ph[d][a * N + k] = e^{2iπ y_a η_k}` with `k` in FFT order.
    fn phases(&self) -> Vec<Vec<Complex64>> {
        self.base
            .iter()
            .map(|ax| {
                let n = ax.points();
                let ny = n / self.stride;
                let mut p = vec![Complex64::new(0.0, 0.0); ny * n];
                for a in 0..ny {
                    let y = ax.node(a * self.stride);
                    for k in 0..n {
                        p[a * n + k] = Complex64::from_polar(1.0, 2.0 * PI * y * ax.frequency(k));
                    }
                }
                p
            })
            .collect()
    }

    fn dims(&self) -> (Vec<usize>, Vec<usize>) {
        let n: Vec<usize> = self.base.iter().map(|a| a.points()).collect();
        let ny: Vec<usize> = n.iter().map(|&p| p / self.stride).collect();
        (n, ny)
    }

    fn check_base(&self, u: &SampledField) -> Result<(), QuantizationError> {
        let ok = u.ndim() == self.dim()
            && u.axes().iter().zip(&self.base).all(|(a, b)| a.points() == b.points() && a.length() == b.length());
        if ok {
            Ok(())
        } else {
            Err(GridError::AxisMismatch.into())
        }
    }

    fn check_phase(&self, v: &SampledField) -> Result<(), QuantizationError> {
        let want = self.phase_axes();
        let ok = v.ndim() == want.len()
            && v.axes().iter().zip(&want).all(|(a, b)| a.points() == b.points() && a.length() == b.length());
        if ok {
            Ok(())
        } else {
            Err(GridError::AxisMismatch.into())
        }
    }

    /// Map from FFT bin to centered η node, per axis.
    fn centered(n: usize, k: usize) -> usize {
        (k + n / 2) % n
    }

    /// `W_λ u(y, η) = (u, φ_{y,η})`.
    pub fn transform(&self, u: &SampledField) -> Result<SampledField, QuantizationError> {
        self.check_base(u)?;
        let (n, ny) = self.dims();
        let block: usize = n.iter().product();
        let ny_total: usize = ny.iter().product();
        let win = self.windows();
        let ph = self.phases();
        let scale: f64 = self.base.iter().map(|a| a.spacing() * (a.points() as f64).sqrt()).product();
        let mut out = vec![Complex64::new(0.0, 0.0); ny_total * block];
        let uv = u.values();
        let base = &self.base;
        out.par_chunks_mut(block).enumerate().for_each(|(yflat, dst)| {
            let mut a = [0usize; 2];
            unflatten(yflat, &ny, &mut a[..n.len()]);
            let mut buf: Vec<Complex64> = uv.to_vec();
            let mut j = [0usize; 2];
            for (flat, b) in buf.iter_mut().enumerate() {
                unflatten(flat, &n, &mut j[..n.len()]);
                let mut w = 1.0;
                for d in 0..n.len() {
                    w *= win[d][a[d] * n[d] + j[d]];
                }
                *b *= w;
            }
            let all: Vec<usize> = (0..n.len()).collect();
            transform_axes(&mut buf, base, &all, Direction::Forward);
            let mut k = [0usize; 2];
            for (flat, b) in buf.iter().enumerate() {
                unflatten(flat, &n, &mut k[..n.len()]);
                let mut p = Complex64::new(scale, 0.0);
                let mut dst_idx = 0;
                for d in 0..n.len() {
                    p *= ph[d][a[d] * n[d] + k[d]];
                    dst_idx = dst_idx * n[d] + Self::centered(n[d], k[d]);
                }
                dst[dst_idx] = p * b;
            }
        });
        Ok(SampledField::from_values(&self.phase_axes(), out)?)
    }

    /// `W_λ^* v(x) = Σ_Y ΔyΔη φ_Y(x) v(Y)`.
    pub fn adjoint(&self, v: &SampledField) -> Result<SampledField, QuantizationError> {
        self.check_phase(v)?;
        let (n, ny) = self.dims();
        let block: usize = n.iter().product();
        let ny_total: usize = ny.iter().product();
        let win = self.windows();
        let ph = self.phases();
        let scale: f64 = self.cell() * self.base.iter().map(|a| (a.points() as f64).sqrt()).product::<f64>();
        let vv = v.values();
        let base = &self.base;
        // Fixed-size groups summed in order keep the result independent of the thread count.
        const GROUP: usize = 8;
        let groups: Vec<usize> = (0..ny_total.div_ceil(GROUP)).collect();
        let partials: Vec<Vec<Complex64>> = groups
            .par_iter()
            .map(|&g| {
                let mut acc = vec![Complex64::new(0.0, 0.0); block];
                let mut buf = vec![Complex64::new(0.0, 0.0); block];
                for yflat in g * GROUP..((g + 1) * GROUP).min(ny_total) {
                    let mut a = [0usize; 2];
                    unflatten(yflat, &ny, &mut a[..n.len()]);
                    let src = &vv[yflat * block..(yflat + 1) * block];
                    let mut k = [0usize; 2];
                    for (flat, b) in buf.iter_mut().enumerate() {
                        unflatten(flat, &n, &mut k[..n.len()]);
                        let mut p = Complex64::new(1.0, 0.0);
                        let mut src_idx = 0;
                        for d in 0..n.len() {
                            p *= ph[d][a[d] * n[d] + k[d]].conj();
                            src_idx = src_idx * n[d] + Self::centered(n[d], k[d]);
                        }
                        *b = p * src[src_idx];
                    }
                    let all: Vec<usize> = (0..n.len()).collect();
                    transform_axes(&mut buf, base, &all, Direction::Inverse);
                    let mut j = [0usize; 2];
                    for (flat, (acc, b)) in acc.iter_mut().zip(&buf).enumerate() {
                        unflatten(flat, &n, &mut j[..n.len()]);
                        let mut w = scale;
                        for d in 0..n.len() {
                            w *= win[d][a[d] * n[d] + j[d]];
                        }
                        *acc += b * w;
                    }
                }
                acc
            })
            .collect();
        let mut out = vec![Complex64::new(0.0, 0.0); block];
        for p in &partials {
            for (o, x) in out.iter_mut().zip(p) {
                *o += x;
            }
        }
        Ok(SampledField::from_values(&self.base, out)?)
    }

    /// The packet `φ_{y,η}` sampled on the base grid.
    pub fn packet(&self, y: &[f64], eta: &[f64]) -> Result<SampledField, QuantizationError> {
        if y.len() != self.dim() || eta.len() != self.dim() {
            return Err(QuantizationError::Dimension(y.len()));
        }
        let base = self.base.clone();
        Ok(SampledField::from_fn(&self.base, |x| {
            let mut v = Complex64::new(1.0, 0.0);
            for d in 0..x.len() {
                let s = x[d] - y[d];
                v *= self.window(base[d].length(), s) * Complex64::from_polar(1.0, 2.0 * PI * s * eta[d]);
            }
            v
        })?)
    }

    /// Symbol values on the phase lattice, in the layout of [`WavePacketFrame::transform`].
    pub fn sample_symbol(&self, a: &PhaseSymbol) -> Vec<f64> {
        let axes = self.phase_axes();
        let n = self.dim();
        let total: usize = axes.iter().map(|a| a.points()).product();
        let dims: Vec<usize> = axes.iter().map(|a| a.points()).collect();
        (0..total)
            .into_par_iter()
            .map(|flat| {
                let mut idx = [0usize; 4];
                unflatten(flat, &dims, &mut idx[..dims.len()]);
                let mut x = [0.0; 2];
                let mut xi = [0.0; 2];
                for d in 0..n {
                    x[d] = axes[d].node(idx[d]);
                    xi[d] = axes[n + d].node(idx[n + d]);
                }
                a.eval(&x[..n], &xi[..n])
            })
            .collect()
    }

    /// `a^{Wick(λ)} u = W_λ^* (a · W_λ u)`.
    pub fn wick_apply(&self, a: &PhaseSymbol, u: &SampledField) -> Result<SampledField, QuantizationError> {
        let s = self.sample_symbol(a);
        self.wick_apply_sampled(&s, u)
    }

    /// Wick quantization of symbol values already sampled on the lattice.
    pub fn wick_apply_sampled(&self, a: &[f64], u: &SampledField) -> Result<SampledField, QuantizationError> {
        let mut w = self.transform(u)?;
        if a.len() != w.len() {
            return Err(GridError::ValueCount { expected: w.len(), got: a.len() }.into());
        }
        w.values_mut().par_iter_mut().zip(a.par_iter()).for_each(|(v, s)| *v *= s);
        let out = self.adjoint(&w)?;
        Ok(out.relabel(&u.axes().iter().map(|a| a.label()).collect::<Vec<_>>()))
    }

    /// `max_x |S(x) − 1|` where `W*W` is multiplication by `S`.
    pub fn tightness_defect(&self) -> Result<f64, QuantizationError> {
        let one = SampledField::from_real_fn(&self.base, |_| 1.0)?;
        let s = self.adjoint(&self.transform(&one)?)?;
        Ok(s.values().iter().map(|v| (v - 1.0).norm()).fold(0.0, f64::max))
    }

    /// Closed-form `K_λ(X, Y)` summed over the periodic images seen by the lattice.
    pub fn torus_kernel(&self, x: &[f64], xi: &[f64], y: &[f64], eta: &[f64]) -> Complex64 {
        let mut k = Complex64::new(1.0, 0.0);
        for (d, ax) in self.base.iter().enumerate() {
            let mut s = Complex64::new(0.0, 0.0);
            for m in -IMAGES..=IMAGES {
                for r in -IMAGES..=IMAGES {
                    let yy = y[d] + m as f64 * ax.length();
                    let xx = xi[d] + r as f64 / ax.spacing();
                    s += projection_kernel(self.lambda, &[x[d]], &[xx], &[yy], &[eta[d]]);
                }
            }
            k *= s;
        }
        k
    }

    /// Dense `π_λ = W_λ W_λ^*`, row-major, acting on phase-lattice values.
    pub fn dense_projection(&self, budget: usize) -> Result<Vec<Complex64>, QuantizationError> {
        let p = self.phase_points();
        let required = p * p * 16;
        if required > budget {
            return Err(QuantizationError::MemoryBudget { required, budget });
        }
        let axes = self.phase_axes();
        let cols: Vec<Vec<Complex64>> = (0..p)
            .into_par_iter()
            .map(|c| {
                let mut e = vec![Complex64::new(0.0, 0.0); p];
                e[c] = Complex64::new(1.0, 0.0);
                let v = SampledField::from_values(&axes, e).expect("lattice shape");
                let w = self.adjoint(&v).and_then(|x| self.transform(&x)).expect("frame shape");
                w.into_values()
            })
            .collect();
        let mut m = vec![Complex64::new(0.0, 0.0); p * p];
        for (c, col) in cols.iter().enumerate() {
            for (r, v) in col.iter().enumerate() {
                m[r * p + c] = *v;
            }
        }
        Ok(m)
    }

    /// Idempotence, self-adjointness and kernel agreement of the dense projection.
    pub fn verify_projection(&self, budget: usize, seed: u64) -> Result<EstimateReport, QuantizationError> {
        let p = self.phase_points();
        let m = self.dense_projection(budget)?;
        let axes = self.phase_axes();
        let n = self.dim();
        let cell = self.cell();
        let dims: Vec<usize> = axes.iter().map(|a| a.points()).collect();
        let point = |flat: usize| {
            let mut idx = [0usize; 4];
            unflatten(flat, &dims, &mut idx[..dims.len()]);
            let mut x = [0.0; 2];
            let mut xi = [0.0; 2];
            for d in 0..n {
                x[d] = axes[d].node(idx[d]);
                xi[d] = axes[n + d].node(idx[n + d]);
            }
            (x, xi)
        };
        let kernel_err = (0..p)
            .into_par_iter()
            .map(|r| {
                let (x, xi) = point(r);
                let mut e: f64 = 0.0;
                for c in 0..p {
                    let (y, eta) = point(c);
                    let k = self.torus_kernel(&x[..n], &xi[..n], &y[..n], &eta[..n]);
                    e = e.max((m[r * p + c] / cell - k).norm());
                }
                e
            })
            .reduce(|| 0.0, f64::max);
        let mut asym: f64 = 0.0;
        for r in 0..p {
            for c in 0..r {
                asym += (m[r * p + c] - m[c * p + r].conj()).norm_sqr() * 2.0;
            }
        }
        let apply = |v: &[Complex64]| -> Vec<Complex64> {
            (0..p).into_par_iter().map(|r| m[r * p..(r + 1) * p].iter().zip(v).map(|(a, b)| a * b).sum()).collect()
        };
        // ‖π² − π‖ by power iteration on the Hermitian defect.
        let defect = |v: &[Complex64]| -> Vec<Complex64> {
            let a = apply(v);
            let b = apply(&a);
            b.iter().zip(&a).map(|(x, y)| x - y).collect()
        };
        let idem = power_norm(p, seed, 60, defect);
        let trace: Complex64 = (0..p).map(|i| m[i * p + i]).sum();
        Ok(EstimateReport::new("projection", idem, 1.0)
            .with_context("lambda", self.lambda)
            .with_context("phase_points", p as f64)
            .with_metric("idempotence_defect", idem)
            .with_metric("self_adjoint_defect", asym.sqrt())
            .with_metric("kernel_max_error", kernel_err)
            .with_metric("trace", trace.re)
            .with_metric("trace_expected", p as f64 * cell))
    }
}

/// Operator-norm estimate of a linear map on `C^p` by power iteration.
pub fn power_norm<F>(p: usize, seed: u64, iters: usize, op: F) -> f64
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
{
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<Complex64> =
        (0..p).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let norm = |v: &[Complex64]| v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let mut est = 0.0;
    for _ in 0..iters {
        let nv = norm(&v);
        if nv == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let w = op(&v);
        est = norm(&w);
        v = w;
    }
    est
}

/// `K_λ(X, Y) = e^{−(π/2)Γ_λ(X−Y)} e^{iπ(x−y)·(ξ+η)}` with `Γ_λ(y, η) = λ|y|² + |η|²/λ`.
pub fn projection_kernel(lambda: f64, x: &[f64], xi: &[f64], y: &[f64], eta: &[f64]) -> Complex64 {
    let mut gamma = 0.0;
    let mut phase = 0.0;
    for d in 0..x.len() {
        let dx = x[d] - y[d];
        let dk = xi[d] - eta[d];
        gamma += lambda * dx * dx + dk * dk / lambda;
        phase += PI * dx * (xi[d] + eta[d]);
    }
    Complex64::from_polar((-0.5 * PI * gamma).exp(), phase)
}

/// Gauss–Hermite nodes and weights for the weight `e^{−t²}` on ℝ.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let pim4 = PI.powf(-0.25);
    let m = n.div_ceil(2);
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2 - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// The Gaussian-smoothed symbol `ã(X) = 2ⁿ ∫ a(X+Y) e^{−2πΓ_λ(Y)} dY`, so that
/// `a^{Wick(λ)} = ã^w`. Evaluated by tensor Gauss–Hermite quadrature of `order` nodes per variable.
pub fn wick_via_weyl(a: &PhaseSymbol, lambda: f64, dim: usize, order: usize) -> PhaseSymbol {
    let (t, w) = gauss_hermite(order);
    let sy = (1.0 / (4.0 * PI * lambda)).sqrt() * 2f64.sqrt();
    let se = (lambda / (4.0 * PI)).sqrt() * 2f64.sqrt();
    let inner = a.clone();
    let norm = PI.sqrt().powi(2 * dim as i32);
    PhaseSymbol::new(format!("smoothed({})", a.name()), a.sup(), move |x, xi| {
        let vars = 2 * dim;
        let total = order.pow(vars as u32);
        let mut idx = vec![0usize; vars];
        let mut xs = x.to_vec();
        let mut ks = xi.to_vec();
        let mut acc = 0.0;
        for flat in 0..total {
            unflatten(flat, &vec![order; vars], &mut idx);
            let mut wt = 1.0;
            for d in 0..dim {
                xs[d] = x[d] + sy * t[idx[d]];
                ks[d] = xi[d] + se * t[idx[dim + d]];
                wt *= w[idx[d]] * w[idx[dim + d]];
            }
            acc += wt * inner.eval(&xs, &ks);
        }
        acc / norm
    })
}

/// Midpoints `(z_j + z_l)/2` indexed by `p = j + l`.
fn midpoints(ax: &Axis) -> Vec<f64> {
    (0..2 * ax.points() - 1).map(|p| -0.5 * ax.length() + 0.5 * p as f64 * ax.spacing()).collect()
}

/// Weyl quantization `(a^w u)(x) = ∫∫ e^{2iπ(x−y)·ξ} a((x+y)/2, ξ) u(y) dy dξ`, discretized with
/// the lattice frequencies and the exact half-node midpoints.
///
/// For each midpoint the ξ-sum is one inverse FFT, giving a table `A_p(j − l)`
/// of `Π(2N−1) · ΠN` entries; `budget` caps its size in bytes.
pub fn weyl_apply(a: &PhaseSymbol, u: &SampledField, budget: usize) -> Result<SampledField, QuantizationError> {
    let nd = u.ndim();
    check_dim(nd)?;
    let axes = u.axes();
    let n: Vec<usize> = axes.iter().map(|a| a.points()).collect();
    let np: Vec<usize> = n.iter().map(|&p| 2 * p - 1).collect();
    let block: usize = n.iter().product();
    let mids: usize = np.iter().product();
    let required = mids * block * 16;
    if required > budget {
        return Err(QuantizationError::MemoryBudget { required, budget });
    }
    let mid: Vec<Vec<f64>> = axes.iter().map(midpoints).collect();
    let freq: Vec<Vec<f64>> = axes.iter().map(|a| a.frequencies()).collect();
    let inv = 1.0 / block as f64;
    let mut table = vec![Complex64::new(0.0, 0.0); mids * block];
    table.par_chunks_mut(block).enumerate().for_each(|(pflat, buf)| {
        let mut p = [0usize; 2];
        unflatten(pflat, &np, &mut p[..nd]);
        let mut x = [0.0; 2];
        for d in 0..nd {
            x[d] = mid[d][p[d]];
        }
        let mut k = [0usize; 2];
        let mut xi = [0.0; 2];
        for (flat, b) in buf.iter_mut().enumerate() {
            unflatten(flat, &n, &mut k[..nd]);
            for d in 0..nd {
                xi[d] = freq[d][k[d]];
            }
            *b = Complex64::new(a.eval(&x[..nd], &xi[..nd]) * inv, 0.0);
        }
        for d in 0..nd {
            let f = plan(n[d], Direction::Inverse);
            along_axis(buf, &n, d, |lines, _| f.process(lines));
        }
    });
    let uv = u.values();
    let mut out = vec![Complex64::new(0.0, 0.0); block];
    out.par_iter_mut().enumerate().for_each(|(jflat, o)| {
        let mut j = [0usize; 2];
        unflatten(jflat, &n, &mut j[..nd]);
        let mut l = [0usize; 2];
        let mut acc = Complex64::new(0.0, 0.0);
        for (lflat, &ul) in uv.iter().enumerate() {
            unflatten(lflat, &n, &mut l[..nd]);
            let mut pflat = 0;
            let mut dflat = 0;
            for d in 0..nd {
                pflat = pflat * np[d] + j[d] + l[d];
                dflat = dflat * n[d] + (j[d] + n[d] - l[d]) % n[d];
            }
            acc += table[pflat * block + dflat] * ul;
        }
        *o = acc;
    });
    Ok(u.with_values(out))
}

fn random_field(axes: &[Axis], rng: &mut rand_chacha::ChaCha8Rng) -> Result<SampledField, GridError> {
    use rand::Rng;
    let n: usize = axes.iter().map(|a| a.points()).product();
    SampledField::from_values(axes, (0..n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
}

/// Wick checks on one frame: `W*W = I`, `1^{Wick} = I`, positivity over `positivity_trials`
/// random nonnegative lattice symbols, and [`WavePacketFrame::verify_projection`].
///
/// Metrics: `isometry_defect` (`max |S − 1|`, an operator bound), `identity_defect`,
/// `min_positivity` (least `Re⟨a^{Wick}u, u⟩ / ‖u‖²`), `idempotence_defect`,
/// `self_adjoint_defect`, `kernel_max_error`.
pub fn verify_wick_suite(
    frame: &WavePacketFrame,
    positivity_trials: usize,
    seed: u64,
    budget: usize,
) -> Result<EstimateReport, QuantizationError> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let base = frame.base_axes().to_vec();
    let iso = frame.tightness_defect()?;
    let u = random_field(&base, &mut rng)?;
    let one = frame.wick_apply(&PhaseSymbol::constant(1.0), &u)?;
    let identity = one.sub(&u)?.norm_l2() / u.norm_l2();
    let p = frame.phase_points();
    let mut min_pos = f64::INFINITY;
    for _ in 0..positivity_trials {
        let sym: Vec<f64> = (0..p).map(|_| rng.random_range(0.0..1.0f64).powi(3)).collect();
        let v = random_field(&base, &mut rng)?;
        let av = frame.wick_apply_sampled(&sym, &v)?;
        let n2 = v.norm_l2().powi(2);
        min_pos = min_pos.min(av.inner(&v)?.re / n2);
    }
    let proj = frame.verify_projection(budget, seed)?;
    let mut r = EstimateReport::new("verify-wick", iso.max(identity), 1.0)
        .with_context("lambda", frame.lambda())
        .with_context("points", base[0].points() as f64)
        .with_context("length", base[0].length())
        .with_context("stride", frame.stride() as f64)
        .with_context("positivity_trials", positivity_trials as f64)
        .with_metric("isometry_defect", iso)
        .with_metric("identity_defect", identity)
        .with_metric("min_positivity", min_pos);
    for k in ["idempotence_defect", "self_adjoint_defect", "kernel_max_error"] {
        r = r.with_metric(k, proj.metric(k).unwrap_or(f64::NAN));
    }
    Ok(r)
}

/// Weyl cross-checks on a 1D axis for one `λ`.
///
/// Metrics: `xi_derivative_error` (`ξ^w` against the spectral derivative, relative),
/// `smoothed_y2_error` and `smoothed_eta2_error` (Gauss–Hermite smoothing of `y²`, `η²`
/// against `y² + 1/(4πλ)`, `η² + λ/(4π)`), and `affine_wick_weyl` (relative
/// `‖(a^{Wick} − a^w)u‖` for `a = α + βx + γξ` and a packet well inside the box).
/// `frame` is built on `axis` with `stride`.
pub fn verify_weyl_suite(
    axis: &Axis,
    lambda: f64,
    stride: usize,
    budget: usize,
) -> Result<EstimateReport, QuantizationError> {
    let axes = [*axis];
    let len = axis.length();
    let u = SampledField::from_fn(&axes, |z| {
        let s = z[0] - 0.03 * len;
        Complex64::from_polar((-s * s / (2.0 * (0.06 * len).powi(2))).exp(), 2.0 * PI * 0.7 * z[0])
    })?;
    let nu = u.norm_l2();
    let xi = weyl_apply(&PhaseSymbol::affine(0.0, vec![0.0], vec![1.0]), &u, budget)?;
    let deriv = u.apply_symbol(&[0], |z| Complex64::new(z[0], 0.0))?;
    let xi_err = xi.sub(&deriv)?.norm_l2() / deriv.norm_l2();
    let y2 = wick_via_weyl(&PhaseSymbol::new("y2", f64::INFINITY, |x, _| x[0] * x[0]), lambda, 1, 12);
    let e2 = wick_via_weyl(&PhaseSymbol::new("eta2", f64::INFINITY, |_, k| k[0] * k[0]), lambda, 1, 12);
    let (mut ey, mut ee) = (0.0f64, 0.0f64);
    for (x, k) in [(0.0, 0.0), (1.3, -0.7), (-2.0, 3.5), (4.1, 0.25)] {
        ey = ey.max((y2.eval(&[x], &[k]) - (x * x + 1.0 / (4.0 * PI * lambda))).abs());
        ee = ee.max((e2.eval(&[x], &[k]) - (k * k + lambda / (4.0 * PI))).abs());
    }
    let frame = WavePacketFrame::new(lambda, &axes, stride)?;
    let aff = PhaseSymbol::affine(0.5, vec![0.3], vec![-0.8]);
    let wick = frame.wick_apply(&aff, &u)?;
    let weyl = weyl_apply(&aff, &u, budget)?;
    let affine = wick.sub(&weyl)?.norm_l2() / nu;
    Ok(EstimateReport::new("verify-weyl", xi_err.max(affine), 1.0)
        .with_context("lambda", lambda)
        .with_context("points", axis.points() as f64)
        .with_context("length", len)
        .with_context("stride", stride as f64)
        .with_metric("xi_derivative_error", xi_err)
        .with_metric("smoothed_y2_error", ey)
        .with_metric("smoothed_eta2_error", ee)
        .with_metric("affine_wick_weyl", affine))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn gaussian(axes: &[Axis], c: f64, w: f64, k: f64) -> SampledField {
        SampledField::from_fn(axes, |z| {
            let r2: f64 = z.iter().map(|x| (x - c) * (x - c)).sum();
            Complex64::from_polar((-r2 / (2.0 * w * w)).exp(), 2.0 * PI * k * z[0])
        })
        .unwrap()
    }

    #[test]
    fn frame_validation() {
        let a = Axis::new(32, 8.0, AxisLabel::X).unwrap();
        assert!(WavePacketFrame::new(1.5, &[a], 1).is_err());
        assert!(WavePacketFrame::new(0.5, &[a], 3).is_err());
        assert!(WavePacketFrame::new(0.5, &[a], 8).is_err());
        let f = WavePacketFrame::default_1d(0.5).unwrap();
        assert_eq!(f.phase_points(), 1024);
        assert_eq!(f.oversampling(), 32.0);
    }

    #[test]
    fn packets_have_unit_norm() {
        for lam in [0.25, 0.5, 1.0] {
            let f = WavePacketFrame::default_1d(lam).unwrap();
            for (y, e) in [(0.0, 0.0), (1.25, -0.5), (-3.75, 1.875)] {
                assert!((f.packet(&[y], &[e]).unwrap().norm_l2() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn reproducing_peak() {
        let f = WavePacketFrame::default_1d(0.5).unwrap();
        let u = f.packet(&[0.0], &[0.0]).unwrap();
        let w = f.transform(&u).unwrap();
        let (imax, vmax) = w
            .values()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap();
        assert!((vmax.norm() - 1.0).abs() < 1e-8);
        let c = w.coords(imax);
        assert_eq!(c, vec![0.0, 0.0]);
    }

    #[test]
    fn transform_matches_direct_inner_products() {
        let a = Axis::new(16, 6.0, AxisLabel::X).unwrap();
        let f = WavePacketFrame::new(0.7, &[a], 2).unwrap();
        let u = gaussian(&[a], 0.3, 0.8, 0.4);
        let w = f.transform(&u).unwrap();
        for flat in [0, 5, 37, 100, 127] {
            let c = w.coords(flat);
            let direct = u.inner(&f.packet(&[c[0]], &[c[1]]).unwrap()).unwrap();
            assert!((direct - w.values()[flat]).norm() < 1e-12);
        }
    }

    #[test]
    fn adjoint_pairing() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for f in [
            WavePacketFrame::default_1d(0.25).unwrap(),
            WavePacketFrame::new(0.5, &[Axis::new(16, 4.0, AxisLabel::X1).unwrap(), Axis::new(8, 4.0, AxisLabel::X2).unwrap()], 1)
                .unwrap(),
        ] {
            let base = f.base_axes().to_vec();
            let size: usize = base.iter().map(|a| a.points()).product();
            let vals = (0..size).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let u = SampledField::from_values(&base, vals).unwrap();
            let pa = f.phase_axes();
            let vals = (0..f.phase_points()).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let v = SampledField::from_values(&pa, vals).unwrap();
            let lhs = f.transform(&u).unwrap().inner(&v).unwrap();
            let rhs = u.inner(&f.adjoint(&v).unwrap()).unwrap();
            assert!((lhs - rhs).norm() <= 1e-8 * u.norm_l2() * v.norm_l2());
        }
    }

    #[test]
    fn lattice_delta_gives_weighted_packet() {
        let f = WavePacketFrame::default_1d(1.0).unwrap();
        let pa = f.phase_axes();
        let mut v = SampledField::zeros(&pa).unwrap();
        let idx = 7 * 32 + 20;
        v.values_mut()[idx] = Complex64::new(1.0, 0.0);
        let c = v.coords(idx);
        let got = f.adjoint(&v).unwrap();
        let want = f.packet(&[c[0]], &[c[1]]).unwrap().scale(Complex64::new(f.cell(), 0.0));
        assert!(got.sub(&want).unwrap().norm_l2() < 1e-14);
    }

    #[test]
    fn translation_covariance() {
        let f = WavePacketFrame::default_1d(0.5).unwrap();
        let ax = f.base_axes().to_vec();
        let u = gaussian(&ax, 0.0, 0.4, 0.0);
        let shifted = gaussian(&ax, 1.0, 0.4, 0.0);
        let (w0, w1) = (f.transform(&u).unwrap(), f.transform(&shifted).unwrap());
        // y-step is h = 0.25, so a shift by 1 moves 4 rows of 32
        for a in 0..24 {
            for m in 0..32 {
                let x = w0.values()[a * 32 + m].norm();
                let y = w1.values()[(a + 4) * 32 + m].norm();
                assert!((x - y).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn isometry_and_identity() {
        for lam in [0.25, 0.5, 1.0] {
            let f = WavePacketFrame::default_1d(lam).unwrap();
            assert!(f.tightness_defect().unwrap() < 1e-9);
            let u = gaussian(f.base_axes(), 0.2, 0.7, 0.5);
            let w = f.transform(&u).unwrap();
            assert!((w.norm_l2() - u.norm_l2()).abs() < 1e-9 * u.norm_l2());
            let one = f.wick_apply(&PhaseSymbol::constant(1.0), &u).unwrap();
            assert!(one.sub(&u).unwrap().norm_l2() < 1e-9 * u.norm_l2());
        }
    }

    #[test]
    fn kernel_closed_form() {
        assert_eq!(projection_kernel(0.5, &[0.3], &[1.0], &[0.3], &[1.0]), Complex64::new(1.0, 0.0));
        let k = projection_kernel(0.5, &[0.3], &[1.0], &[-0.2], &[0.1]);
        let g = 0.5 * 0.25 + 0.81 / 0.5;
        assert!((k.norm() - (-0.5 * PI * g).exp()).abs() < 1e-15);
    }

    #[test]
    fn projection_small_frame() {
        let a = Axis::new(16, 4.0, AxisLabel::X).unwrap();
        let f = WavePacketFrame::new(1.0, &[a], 1).unwrap();
        let r = f.verify_projection(DEFAULT_KERNEL_BUDGET, 1).unwrap();
        assert!(r.metric("idempotence_defect").unwrap() < 1e-8);
        assert!(r.metric("self_adjoint_defect").unwrap() < 1e-10);
        assert!(r.metric("kernel_max_error").unwrap() < 1e-6, "{r:?}");
        assert!(matches!(
            f.verify_projection(1000, 1),
            Err(QuantizationError::MemoryBudget { .. })
        ));
    }

    #[test]
    fn gauss_hermite_moments() {
        let (x, w) = gauss_hermite(20);
        let m = |p: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum::<f64>();
        assert!((m(0) - PI.sqrt()).abs() < 1e-13);
        assert!(m(1).abs() < 1e-13);
        assert!((m(2) - PI.sqrt() / 2.0).abs() < 1e-13);
        assert!((m(4) - 0.75 * PI.sqrt()).abs() < 1e-12);
        let (x1, w1) = gauss_hermite(1);
        assert_eq!(x1, vec![0.0]);
        assert!((w1[0] - PI.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn smoothing_of_quadratics() {
        for lam in [0.25, 0.5, 1.0] {
            let y2 = wick_via_weyl(&PhaseSymbol::new("y2", f64::INFINITY, |x, _| x[0] * x[0]), lam, 1, 12);
            let e2 = wick_via_weyl(&PhaseSymbol::new("eta2", f64::INFINITY, |_, k| k[0] * k[0]), lam, 1, 12);
            let one = wick_via_weyl(&PhaseSymbol::constant(1.0), lam, 1, 12);
            let lin = wick_via_weyl(&PhaseSymbol::affine(0.5, vec![2.0], vec![-3.0]), lam, 1, 12);
            for (x, k) in [(0.0, 0.0), (1.3, -0.7), (-2.0, 3.5)] {
                assert!((y2.eval(&[x], &[k]) - (x * x + 1.0 / (4.0 * PI * lam))).abs() < 1e-12);
                assert!((e2.eval(&[x], &[k]) - (k * k + lam / (4.0 * PI))).abs() < 1e-12);
                assert!((one.eval(&[x], &[k]) - 1.0).abs() < 1e-13);
                assert!((lin.eval(&[x], &[k]) - (0.5 + 2.0 * x - 3.0 * k)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn weyl_of_position_symbol_is_multiplication() {
        let a = Axis::new(32, 6.0, AxisLabel::X).unwrap();
        let u = gaussian(&[a], 0.1, 0.9, 0.3);
        let sym = PhaseSymbol::new("cos", 1.0, |x, _| x[0].cos());
        let got = weyl_apply(&sym, &u, DEFAULT_KERNEL_BUDGET).unwrap();
        let want = u.multiply_by(|z| Complex64::new(z[0].cos(), 0.0));
        assert!(got.sub(&want).unwrap().norm_l2() < 1e-10 * u.norm_l2());
    }

    #[test]
    fn weyl_of_xi_is_spectral_derivative() {
        let a = Axis::new(64, 12.0, AxisLabel::X).unwrap();
        let u = gaussian(&[a], 0.4, 0.8, 0.7);
        let got = weyl_apply(&PhaseSymbol::affine(0.0, vec![0.0], vec![1.0]), &u, DEFAULT_KERNEL_BUDGET).unwrap();
        let want = u.apply_symbol(&[0], |z| Complex64::new(z[0], 0.0)).unwrap();
        assert!(got.sub(&want).unwrap().norm_l2() < 1e-8 * u.norm_l2());
        let b = Axis::new(16, 5.0, AxisLabel::X2).unwrap();
        let a2 = Axis::new(16, 4.0, AxisLabel::X1).unwrap();
        let v = gaussian(&[a2, b], 0.0, 0.7, 0.2);
        let got = weyl_apply(&PhaseSymbol::affine(0.0, vec![0.0, 0.0], vec![1.0, 2.0]), &v, DEFAULT_KERNEL_BUDGET).unwrap();
        let want = v.apply_symbol(&[0, 1], |z| Complex64::new(z[0] + 2.0 * z[1], 0.0)).unwrap();
        assert!(got.sub(&want).unwrap().norm_l2() < 1e-8 * v.norm_l2());
    }

    #[test]
    fn wick_suite_on_small_frame() {
        let a = Axis::new(16, 4.0, AxisLabel::X).unwrap();
        let f = WavePacketFrame::new(1.0, &[a], 1).unwrap();
        let r = verify_wick_suite(&f, 3, 5, DEFAULT_KERNEL_BUDGET).unwrap();
        assert!(r.metric("isometry_defect").unwrap() < 1e-8);
        assert!(r.metric("identity_defect").unwrap() < 1e-8);
        assert!(r.metric("min_positivity").unwrap() >= 0.0);
        assert!(r.metric("kernel_max_error").unwrap() < 1e-6);
        assert_eq!(r, verify_wick_suite(&f, 3, 5, DEFAULT_KERNEL_BUDGET).unwrap());
    }

    #[test]
    fn weyl_suite_matches_closed_forms() {
        let a = Axis::new(64, 12.0, AxisLabel::X).unwrap();
        let r = verify_weyl_suite(&a, 0.5, 1, DEFAULT_KERNEL_BUDGET).unwrap();
        assert!(r.metric("xi_derivative_error").unwrap() < 1e-10);
        assert!(r.metric("smoothed_y2_error").unwrap() < 1e-12);
        assert!(r.metric("smoothed_eta2_error").unwrap() < 1e-12);
        assert!(r.metric("affine_wick_weyl").unwrap() < 1e-6);
        assert!(matches!(verify_weyl_suite(&a, 0.5, 1, 1 << 10), Err(QuantizationError::MemoryBudget { .. })));
    }

    #[test]
    fn weyl_budget_guard() {
        let a = Axis::new(32, 6.0, AxisLabel::X).unwrap();
        let u = gaussian(&[a, a], 0.0, 1.0, 0.0);
        let r = weyl_apply(&PhaseSymbol::constant(1.0), &u, 1 << 20);
        assert!(matches!(r, Err(QuantizationError::MemoryBudget { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn weyl_real_symbol_self_adjoint(seed in 0u64..10_000, c in -1.0f64..1.0) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a = Axis::new(16, 4.0, AxisLabel::X).unwrap();
            let mut mk = || SampledField::from_values(&[a],
                (0..16).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()).unwrap();
            let (u, v) = (mk(), mk());
            let sym = PhaseSymbol::new("mix", f64::INFINITY, move |x, k| (x[0] * k[0] + c).sin() + x[0] * x[0] * k[0]);
            let au = weyl_apply(&sym, &u, DEFAULT_KERNEL_BUDGET).unwrap();
            let av = weyl_apply(&sym, &v, DEFAULT_KERNEL_BUDGET).unwrap();
            let d = (au.inner(&v).unwrap() - u.inner(&av).unwrap()).norm();
            prop_assert!(d <= 1e-8 * u.norm_l2() * v.norm_l2());
        }

        #[test]
        fn wick_positivity(seed in 0u64..10_000) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let f = WavePacketFrame::default_1d(0.5).unwrap();
            let vals: Vec<f64> = (0..f.phase_points()).map(|_| rng.random_range(0.0..3.0)).collect();
            let raw = (0..32).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let u = SampledField::from_values(f.base_axes(), raw).unwrap();
            let au = f.wick_apply_sampled(&vals, &u).unwrap();
            prop_assert!(au.inner(&u).unwrap().re >= -1e-12 * u.norm_l2().powi(2));
            prop_assert!(au.norm_l2() <= (3.0 + 1e-6) * u.norm_l2());
        }
    }
}
