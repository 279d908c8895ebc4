//! Uniform periodic grids and complex fields sampled on them.
//!
//! Nodes sit at `z_j = -L/2 + j h` so that the origin is always a node. The
//! discrete Fourier transform is unitary and carries the physical phase of
//! the centered nodes, so `fft` approximates the continuum transform
//! `∫ u(z) e^{-2iπ z ζ} dz` at the lattice frequencies `ζ = k/L`. Norms use
//! the physical cell volume in both domains, which makes Parseval exact.

use std::cell::RefCell;
use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_AXES: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("a field needs between 1 and {MAX_AXES} axes, got {0}")]
    AxisCount(usize),
    #[error("axis points must be a power of two and at least 8, got {0}")]
    Points(usize),
    #[error("axis length must be positive and finite, got {0}")]
    Length(f64),
    #[error("value count {got} does not match the grid size {expected}")]
    ValueCount { expected: usize, got: usize },
    #[error("fields live on different grids")]
    AxisMismatch,
    #[error("axis index {0} out of range")]
    AxisIndex(usize),
    #[error("axis subset is empty")]
    EmptySubset,
    #[error("no axis labelled {0}")]
    MissingAxis(AxisLabel),
    #[error("malformed field file: {0}")]
    Format(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for GridError {
    fn from(e: std::io::Error) -> Self {
        GridError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisLabel {
    T,
    X,
    V,
    X1,
    X2,
    Xi1,
    Xi2,
}

impl AxisLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            AxisLabel::T => "t",
            AxisLabel::X => "x",
            AxisLabel::V => "v",
            AxisLabel::X1 => "x1",
            AxisLabel::X2 => "x2",
            AxisLabel::Xi1 => "xi1",
            AxisLabel::Xi2 => "xi2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "t" => AxisLabel::T,
            "x" => AxisLabel::X,
            "v" => AxisLabel::V,
            "x1" => AxisLabel::X1,
            "x2" => AxisLabel::X2,
            "xi1" => AxisLabel::Xi1,
            "xi2" => AxisLabel::Xi2,
            _ => return None,
        })
    }
}

impl std::fmt::Display for AxisLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One periodic axis of side `length` sampled at `points` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    points: usize,
    length: f64,
    label: AxisLabel,
}

impl Axis {
    pub fn new(points: usize, length: f64, label: AxisLabel) -> Result<Self, GridError> {
        if points < 8 || !points.is_power_of_two() {
            return Err(GridError::Points(points));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(GridError::Length(length));
        }
        Ok(Axis { points, length, label })
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn label(&self) -> AxisLabel {
        self.label
    }

    pub fn with_label(mut self, label: AxisLabel) -> Self {
        self.label = label;
        self
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.points as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        -0.5 * self.length + j as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.node(j)).collect()
    }

    /// Signed integer wavenumber of FFT bin `k`.
    pub fn wavenumber(&self, k: usize) -> i64 {
        let n = self.points as i64;
        let k = k as i64;
        if k < n / 2 {
            k
        } else {
            k - n
        }
    }

    /// Lattice frequency `k/L` of FFT bin `k`.
    pub fn frequency(&self, k: usize) -> f64 {
        self.wavenumber(k) as f64 / self.length
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.points).map(|k| self.frequency(k)).collect()
    }

    pub fn nyquist(&self) -> f64 {
        self.points as f64 / (2.0 * self.length)
    }
}

/// The dual lattice of a set of axes, in FFT ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    axes: Vec<Axis>,
}

impl FrequencyGrid {
    pub fn new(axes: &[Axis]) -> Self {
        FrequencyGrid { axes: axes.to_vec() }
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn frequencies(&self, axis: usize) -> Vec<f64> {
        self.axes[axis].frequencies()
    }

    /// Smallest and largest lattice frequency on `axis`.
    pub fn bounds(&self, axis: usize) -> (f64, f64) {
        let a = &self.axes[axis];
        let n = a.points as f64;
        (-n / (2.0 * a.length), (n / 2.0 - 1.0) / a.length)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Physical,
    Frequency,
}

/// Complex samples on a grid of 1 to 4 axes, row-major with the first axis slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    axes: Vec<Axis>,
    values: Vec<Complex64>,
    domain: Domain,
}

fn check_axes(axes: &[Axis]) -> Result<usize, GridError> {
    if axes.is_empty() || axes.len() > MAX_AXES {
        return Err(GridError::AxisCount(axes.len()));
    }
    Ok(axes.iter().map(|a| a.points).product())
}

/// Coordinates of flat index `flat` written into `out`.
fn coords_into(axes: &[Axis], mut flat: usize, out: &mut [f64]) {
    for d in (0..axes.len()).rev() {
        let n = axes[d].points;
        out[d] = axes[d].node(flat % n);
        flat /= n;
    }
}

impl SampledField {
    /// Sample `rule` at every node. The rule receives the physical coordinates.
    pub fn from_fn<F>(axes: &[Axis], rule: F) -> Result<Self, GridError>
    where
        F: Fn(&[f64]) -> Complex64 + Sync,
    {
        let size = check_axes(axes)?;
        let mut values = vec![Complex64::new(0.0, 0.0); size];
        let last = axes[axes.len() - 1].points;
        values.par_chunks_mut(last).enumerate().for_each(|(row, chunk)| {
            let mut c = [0.0; MAX_AXES];
            let c = &mut c[..axes.len()];
            for (j, v) in chunk.iter_mut().enumerate() {
                coords_into(axes, row * last + j, c);
                *v = rule(c);
            }
        });
        Ok(SampledField { axes: axes.to_vec(), values, domain: Domain::Physical })
    }

    /// Real-valued convenience wrapper around [`SampledField::from_fn`].
    pub fn from_real_fn<F>(axes: &[Axis], rule: F) -> Result<Self, GridError>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        Self::from_fn(axes, |c| Complex64::new(rule(c), 0.0))
    }

    pub fn from_values(axes: &[Axis], values: Vec<Complex64>) -> Result<Self, GridError> {
        let size = check_axes(axes)?;
        if values.len() != size {
            return Err(GridError::ValueCount { expected: size, got: values.len() });
        }
        Ok(SampledField { axes: axes.to_vec(), values, domain: Domain::Physical })
    }

    pub fn zeros(axes: &[Axis]) -> Result<Self, GridError> {
        let size = check_axes(axes)?;
        Ok(SampledField {
            axes: axes.to_vec(),
            values: vec![Complex64::new(0.0, 0.0); size],
            domain: Domain::Physical,
        })
    }

    /// A field on the same grid with new values.
    pub fn with_values(&self, values: Vec<Complex64>) -> Self {
        assert_eq!(values.len(), self.values.len(), "value count must match the grid");
        SampledField { axes: self.axes.clone(), values, domain: self.domain }
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.points).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ndim(&self) -> usize {
        self.axes.len()
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing()).product()
    }

    pub fn frequency_grid(&self) -> FrequencyGrid {
        FrequencyGrid::new(&self.axes)
    }

    pub fn axis_index(&self, label: AxisLabel) -> Result<usize, GridError> {
        self.axes.iter().position(|a| a.label == label).ok_or(GridError::MissingAxis(label))
    }

    pub fn relabel(mut self, labels: &[AxisLabel]) -> Self {
        for (a, l) in self.axes.iter_mut().zip(labels) {
            a.label = *l;
        }
        self
    }

    /// Physical coordinates of the node at `flat`.
    pub fn coords(&self, flat: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.axes.len()];
        coords_into(&self.axes, flat, &mut c);
        c
    }

    pub fn same_grid(&self, other: &SampledField) -> bool {
        self.axes.len() == other.axes.len()
            && self
                .axes
                .iter()
                .zip(&other.axes)
                .all(|(a, b)| a.points == b.points && a.length == b.length)
    }

    fn ensure_same(&self, other: &SampledField) -> Result<(), GridError> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(GridError::AxisMismatch)
        }
    }

    pub fn fft(&self) -> SampledField {
        let all: Vec<usize> = (0..self.ndim()).collect();
        let mut out = self.clone();
        transform_axes(&mut out.values, &self.axes, &all, Direction::Forward);
        out.domain = Domain::Frequency;
        out
    }

    pub fn ifft(&self) -> SampledField {
        let all: Vec<usize> = (0..self.ndim()).collect();
        let mut out = self.clone();
        transform_axes(&mut out.values, &self.axes, &all, Direction::Inverse);
        out.domain = Domain::Physical;
        out
    }

    /// Forward transform along a subset of axes only.
    pub fn fft_axes(&self, axes: &[usize]) -> Result<SampledField, GridError> {
        self.check_subset(axes)?;
        let mut out = self.clone();
        transform_axes(&mut out.values, &self.axes, axes, Direction::Forward);
        Ok(out)
    }

    pub fn ifft_axes(&self, axes: &[usize]) -> Result<SampledField, GridError> {
        self.check_subset(axes)?;
        let mut out = self.clone();
        transform_axes(&mut out.values, &self.axes, axes, Direction::Inverse);
        Ok(out)
    }

    fn check_subset(&self, axes: &[usize]) -> Result<(), GridError> {
        if axes.is_empty() {
            return Err(GridError::EmptySubset);
        }
        match axes.iter().find(|&&a| a >= self.ndim()) {
            Some(&a) => Err(GridError::AxisIndex(a)),
            None => Ok(()),
        }
    }

    /// Apply the Fourier multiplier `symbol` acting on the frequencies of `axes`.
    ///
    /// The symbol receives the lattice frequencies of the chosen axes, in the
    /// order given.
    pub fn apply_symbol<F>(&self, axes: &[usize], symbol: F) -> Result<SampledField, GridError>
    where
        F: Fn(&[f64]) -> Complex64 + Sync,
    {
        let mut spec = self.fft_axes(axes)?;
        let shape = self.shape();
        let strides = strides(&shape);
        if let [a] = *axes {
            let table: Vec<Complex64> = self.axes[a].frequencies().iter().map(|&f| symbol(&[f])).collect();
            let (st, n) = (strides[a], shape[a]);
            spec.values.par_chunks_mut(st * n).for_each(|block| {
                for (run, m) in block.chunks_mut(st).zip(&table) {
                    run.iter_mut().for_each(|v| *v *= m);
                }
            });
            return spec.ifft_axes(axes);
        }
        let freqs: Vec<Vec<f64>> = axes.iter().map(|&a| self.axes[a].frequencies()).collect();
        spec.values.par_iter_mut().enumerate().for_each(|(flat, v)| {
            let mut z = [0.0; MAX_AXES];
            for (i, &a) in axes.iter().enumerate() {
                z[i] = freqs[i][(flat / strides[a]) % shape[a]];
            }
            *v *= symbol(&z[..axes.len()]);
        });
        spec.ifft_axes(axes)
    }

    /// Pointwise multiplication by a function of the physical coordinates.
    pub fn multiply_by<F>(&self, rule: F) -> SampledField
    where
        F: Fn(&[f64]) -> Complex64 + Sync,
    {
        let mut out = self.clone();
        let axes = &self.axes;
        let last = axes[axes.len() - 1].points;
        out.values.par_chunks_mut(last).enumerate().for_each(|(row, chunk)| {
            let mut c = [0.0; MAX_AXES];
            let c = &mut c[..axes.len()];
            for (j, v) in chunk.iter_mut().enumerate() {
                coords_into(axes, row * last + j, c);
                *v *= rule(c);
            }
        });
        out
    }

    pub fn scale(&self, s: Complex64) -> SampledField {
        self.with_values(self.values.iter().map(|v| v * s).collect())
    }

    pub fn add(&self, other: &SampledField) -> Result<SampledField, GridError> {
        self.ensure_same(other)?;
        Ok(self.with_values(self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect()))
    }

    pub fn sub(&self, other: &SampledField) -> Result<SampledField, GridError> {
        self.ensure_same(other)?;
        Ok(self.with_values(self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect()))
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: Complex64, other: &SampledField) -> Result<SampledField, GridError> {
        self.ensure_same(other)?;
        Ok(self.with_values(self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect()))
    }

    pub fn norm_l2(&self) -> f64 {
        let sum: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        (self.cell_volume() * sum).sqrt()
    }

    /// `(self, other) = ∫ self · conj(other)`.
    pub fn inner(&self, other: &SampledField) -> Result<Complex64, GridError> {
        self.ensure_same(other)?;
        let sum: Complex64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum();
        Ok(sum * self.cell_volume())
    }

    /// `‖⟨ζ⟩^s û‖` with `ζ` restricted to the frequencies of `axes`.
    pub fn sobolev_norm(&self, s: f64, axes: &[usize]) -> Result<f64, GridError> {
        if s == 0.0 {
            self.check_subset(axes)?;
            return Ok(self.norm_l2());
        }
        let w = self.apply_symbol(axes, |z| {
            let r2: f64 = z.iter().map(|x| x * x).sum();
            Complex64::new((1.0 + r2).powf(0.5 * s), 0.0)
        })?;
        Ok(w.norm_l2())
    }

    /// Write the binary container: a text header naming the axes, then
    /// little-endian `f64` pairs (re, im).
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<(), GridError> {
        writeln!(w, "hypokit-field 1")?;
        let domain = match self.domain {
            Domain::Physical => "physical",
            Domain::Frequency => "frequency",
        };
        writeln!(w, "domain {domain}")?;
        writeln!(w, "axes {}", self.axes.len())?;
        for a in &self.axes {
            writeln!(w, "axis {} {} {:e}", a.label, a.points, a.length)?;
        }
        writeln!(w, "data")?;
        let mut buf = Vec::with_capacity(16 * self.values.len());
        for v in &self.values {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary<R: BufRead>(mut r: R) -> Result<Self, GridError> {
        let mut line = String::new();
        let mut next = |r: &mut R| -> Result<String, GridError> {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                return Err(GridError::Format("unexpected end of header".into()));
            }
            Ok(line.trim_end().to_string())
        };
        if next(&mut r)? != "hypokit-field 1" {
            return Err(GridError::Format("bad magic line".into()));
        }
        let domain = match next(&mut r)?.as_str() {
            "domain physical" => Domain::Physical,
            "domain frequency" => Domain::Frequency,
            other => return Err(GridError::Format(format!("bad domain line {other:?}"))),
        };
        let count: usize = next(&mut r)?
            .strip_prefix("axes ")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| GridError::Format("bad axes line".into()))?;
        let mut axes = Vec::with_capacity(count);
        for _ in 0..count {
            let l = next(&mut r)?;
            let parts: Vec<&str> = l.split_whitespace().collect();
            let bad = || GridError::Format(format!("bad axis line {l:?}"));
            if parts.len() != 4 || parts[0] != "axis" {
                return Err(bad());
            }
            let label = AxisLabel::parse(parts[1]).ok_or_else(bad)?;
            let points = parts[2].parse().map_err(|_| bad())?;
            let length = parts[3].parse().map_err(|_| bad())?;
            axes.push(Axis::new(points, length, label)?);
        }
        if next(&mut r)? != "data" {
            return Err(GridError::Format("missing data marker".into()));
        }
        let size = check_axes(&axes)?;
        let mut raw = vec![0u8; 16 * size];
        r.read_exact(&mut raw)?;
        let values = raw
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
                Complex64::new(re, im)
            })
            .collect();
        Ok(SampledField { axes, values, domain })
    }

    /// CSV export of a 1D or 2D slice. `keep` names the axes that vary;
    /// `fixed[d]` is the node index used for every other axis `d`.
    pub fn write_csv_slice<W: Write>(
        &self,
        w: W,
        keep: &[usize],
        fixed: &[usize],
    ) -> Result<(), GridError> {
        if keep.is_empty() || keep.len() > 2 {
            return Err(GridError::Format("a slice keeps one or two axes".into()));
        }
        self.check_subset(keep)?;
        if fixed.len() != self.ndim() {
            return Err(GridError::Format("one fixed index per axis is required".into()));
        }
        let shape = self.shape();
        let st = strides(&shape);
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = keep.iter().map(|&d| self.axes[d].label.to_string()).collect();
        header.extend(["re", "im", "abs"].map(String::from));
        out.write_record(&header).map_err(|e| GridError::Io(e.to_string()))?;
        let mut idx = fixed.to_vec();
        let n0 = shape[keep[0]];
        let n1 = keep.get(1).map_or(1, |&d| shape[d]);
        for i in 0..n0 {
            for j in 0..n1 {
                idx[keep[0]] = i;
                if let Some(&d) = keep.get(1) {
                    idx[d] = j;
                }
                let flat: usize = idx.iter().zip(&st).map(|(a, b)| a * b).sum();
                let v = self.values[flat];
                let mut rec: Vec<String> = keep
                    .iter()
                    .map(|&d| format!("{:e}", self.axes[d].node(idx[d])))
                    .collect();
                rec.push(format!("{:e}", v.re));
                rec.push(format!("{:e}", v.im));
                rec.push(format!("{:e}", v.norm()));
                out.write_record(&rec).map_err(|e| GridError::Io(e.to_string()))?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Row-major strides for `shape`.
pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for d in (0..shape.len().saturating_sub(1)).rev() {
        s[d] = s[d + 1] * shape[d + 1];
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Direction {
    Forward,
    Inverse,
}

type PlanCache = HashMap<(usize, bool), Arc<dyn Fft<f64>>>;

thread_local! {
    static PLANS: RefCell<PlanCache> = RefCell::new(HashMap::new());
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn plan(n: usize, dir: Direction) -> Arc<dyn Fft<f64>> {
    let fwd = dir == Direction::Forward;
    PLANS.with(|p| {
        p.borrow_mut()
            .entry((n, fwd))
            .or_insert_with(|| {
                PLANNER.with(|pl| {
                    let mut pl = pl.borrow_mut();
                    if fwd {
                        pl.plan_fft_forward(n)
                    } else {
                        pl.plan_fft_inverse(n)
                    }
                })
            })
            .clone()
    })
}

/// Unitary, phase-corrected transform of every contiguous line of length `n` in `buf`.
pub(crate) fn transform_lines(buf: &mut [Complex64], n: usize, dir: Direction) {
    let fft = plan(n, dir);
    let scale = 1.0 / (n as f64).sqrt();
    buf.par_chunks_mut(n * 64).for_each(|chunk| {
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        if dir == Direction::Inverse {
            for line in chunk.chunks_mut(n) {
                for (k, v) in line.iter_mut().enumerate() {
                    if k % 2 == 1 {
                        *v = -*v;
                    }
                }
            }
        }
        fft.process_with_scratch(chunk, &mut scratch);
        for line in chunk.chunks_mut(n) {
            for (k, v) in line.iter_mut().enumerate() {
                let s = if dir == Direction::Forward && k % 2 == 1 { -scale } else { scale };
                *v *= s;
            }
        }
    });
}

/// Apply the transform along each axis in `which`.
pub(crate) fn transform_axes(values: &mut [Complex64], axes: &[Axis], which: &[usize], dir: Direction) {
    let shape: Vec<usize> = axes.iter().map(|a| a.points).collect();
    for &d in which {
        along_axis(values, &shape, d, |lines, n| transform_lines(lines, n, dir));
    }
}

/// Gather every line along axis `d` into contiguous storage, run `op`, scatter back.
pub(crate) fn along_axis<F>(values: &mut [Complex64], shape: &[usize], d: usize, op: F)
where
    F: Fn(&mut [Complex64], usize),
{
    let n = shape[d];
    let inner: usize = shape[d + 1..].iter().product();
    if inner == 1 {
        op(values, n);
        return;
    }
    let block = n * inner;
    let mut scratch = vec![Complex64::new(0.0, 0.0); block];
    // Tiles of TILE lines keep both the strided and the contiguous side in cache.
    const TILE: usize = 16;
    for chunk in values.chunks_mut(block) {
        // chunk[j * inner + i] -> scratch[i * n + j]
        let src = &*chunk;
        scratch.par_chunks_mut(n * TILE).enumerate().for_each(|(b, lines)| {
            let i0 = b * TILE;
            let w = lines.len() / n;
            for j in 0..n {
                let row = &src[j * inner + i0..j * inner + i0 + w];
                for (di, v) in row.iter().enumerate() {
                    lines[di * n + j] = *v;
                }
            }
        });
        op(&mut scratch, n);
        let scratch = &scratch;
        chunk.par_chunks_mut(inner * TILE).enumerate().for_each(|(b, rows)| {
            let j0 = b * TILE;
            let h = rows.len() / inner;
            for i in 0..inner {
                let col = &scratch[i * n + j0..i * n + j0 + h];
                for (dj, v) in col.iter().enumerate() {
                    rows[dj * inner + i] = *v;
                }
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn ax(n: usize, l: f64) -> Axis {
        Axis::new(n, l, AxisLabel::X).unwrap()
    }

    #[test]
    fn axis_validation() {
        assert_eq!(Axis::new(12, 1.0, AxisLabel::X), Err(GridError::Points(12)));
        assert_eq!(Axis::new(4, 1.0, AxisLabel::X), Err(GridError::Points(4)));
        assert!(matches!(Axis::new(8, 0.0, AxisLabel::X), Err(GridError::Length(_))));
        let a = ax(16, 4.0);
        assert_eq!(a.spacing(), 0.25);
        assert_eq!(a.node(8), 0.0);
        assert_eq!(a.frequency(0), 0.0);
        assert_eq!(a.frequency(8), -2.0);
        assert_eq!(a.frequency(15), -0.25);
    }

    #[test]
    fn rejects_five_axes() {
        let a = ax(8, 1.0);
        let r = SampledField::from_real_fn(&[a; 5], |_| 1.0);
        assert_eq!(r.unwrap_err(), GridError::AxisCount(5));
    }

    #[test]
    fn constant_rule() {
        let u = SampledField::from_real_fn(&[ax(16, 2.0)], |_| 1.0).unwrap();
        assert!(u.values().iter().all(|&v| v == c(1.0)));
    }

    #[test]
    fn frequency_bounds() {
        let g = FrequencyGrid::new(&[ax(16, 4.0)]);
        assert_eq!(g.bounds(0), (-2.0, 1.75));
        assert_eq!(g.frequencies(0)[0], 0.0);
    }

    #[test]
    fn gaussian_norm_matches_quadrature() {
        // ∫ e^{-2π z²} dz = 2^{-1/2}; the discrete sum is spectrally exact here.
        let u = SampledField::from_real_fn(&[ax(64, 16.0)], |z| (-std::f64::consts::PI * z[0] * z[0]).exp())
            .unwrap();
        assert!((u.norm_l2() - 2f64.powf(-0.25)).abs() < 1e-10);
        let a = ax(64, 16.0);
        let v = SampledField::from_real_fn(&[a, a], |z| {
            (-std::f64::consts::PI * (z[0] * z[0] + z[1] * z[1])).exp()
        })
        .unwrap();
        assert!((v.norm_l2() - 2f64.powf(-0.5)).abs() < 1e-10);
    }

    #[test]
    fn plane_wave_single_bin() {
        let a = ax(32, 4.0);
        let k = 5usize;
        let u = SampledField::from_fn(&[a], |z| {
            Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 * z[0] / 4.0)
        })
        .unwrap();
        let s = u.fft();
        for (i, v) in s.values().iter().enumerate() {
            if i == k {
                assert!((v.norm() - 32f64.sqrt()).abs() < 1e-12);
            } else {
                assert!(v.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn delta_at_origin_has_flat_spectrum() {
        let a = ax(16, 3.0);
        let mut u = SampledField::zeros(&[a]).unwrap();
        u.values_mut()[8] = c(1.0);
        let s = u.fft();
        for v in s.values() {
            assert!((v - c(0.25)).norm() < 1e-15);
        }
    }

    #[test]
    fn real_even_field_has_real_even_spectrum() {
        let a = ax(32, 6.0);
        let b = ax(16, 2.0);
        let u = SampledField::from_real_fn(&[a, b], |z| (-z[0] * z[0]).exp() * (3.0 * z[1]).cos() + z[0].powi(4) * 0.01)
            .unwrap();
        let s = u.fft();
        let sh = s.shape();
        for i in 0..sh[0] {
            for j in 0..sh[1] {
                let v = s.values()[i * sh[1] + j];
                let m = s.values()[((sh[0] - i) % sh[0]) * sh[1] + (sh[1] - j) % sh[1]];
                assert!(v.im.abs() < 1e-10);
                assert!((v - m).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn offset_gaussian_inner_product() {
        // ∫ e^{-π z²} e^{-π (z-1)²} dz = e^{-π/2} / √2.
        let a = ax(128, 16.0);
        let g = SampledField::from_real_fn(&[a], |z| (-std::f64::consts::PI * z[0] * z[0]).exp()).unwrap();
        let h = SampledField::from_real_fn(&[a], |z| (-std::f64::consts::PI * (z[0] - 1.0).powi(2)).exp()).unwrap();
        let ip = g.inner(&h).unwrap();
        let exact = (-std::f64::consts::PI / 2.0).exp() / 2f64.sqrt();
        assert!((ip.re - exact).abs() < 1e-8 && ip.im.abs() < 1e-14);
    }

    #[test]
    fn orthogonal_plane_waves() {
        let a = ax(16, 2.0);
        let p = |k: f64| {
            SampledField::from_fn(&[a], move |z| Complex64::from_polar(1.0, std::f64::consts::PI * k * z[0]))
                .unwrap()
        };
        assert!(p(1.0).inner(&p(3.0)).unwrap().norm() < 1e-12);
    }

    #[test]
    fn sobolev_plane_wave() {
        let a = ax(32, 8.0);
        let k = 3.0 / 8.0;
        let u = SampledField::from_fn(&[a], |z| Complex64::from_polar(2.0, 2.0 * std::f64::consts::PI * k * z[0]))
            .unwrap();
        let s = 1.5;
        let got = u.sobolev_norm(s, &[0]).unwrap();
        assert!((got - (1.0 + k * k).powf(s / 2.0) * u.norm_l2()).abs() < 1e-12);
        assert_eq!(u.sobolev_norm(0.0, &[0]).unwrap(), u.norm_l2());
    }

    #[test]
    fn sobolev_one_of_gaussian() {
        // ‖u‖²_{H¹} = ‖u‖² + ‖u′‖²/(4π²) for u = e^{-π z²}:
        // ‖u′‖² = ∫ 4π² z² e^{-2π z²} = 4π² · 2^{-1/2}/(4π), so H¹² = 2^{-1/2}(1 + 1/(4π)).
        let a = ax(128, 16.0);
        let u = SampledField::from_real_fn(&[a], |z| (-std::f64::consts::PI * z[0] * z[0]).exp()).unwrap();
        let exact = (2f64.powf(-0.5) * (1.0 + 1.0 / (4.0 * std::f64::consts::PI))).sqrt();
        assert!((u.sobolev_norm(1.0, &[0]).unwrap() - exact).abs() < 1e-8);
    }

    #[test]
    fn partial_transform_matches_full_on_separable() {
        let a = Axis::new(16, 2.0, AxisLabel::T).unwrap();
        let b = Axis::new(8, 3.0, AxisLabel::V).unwrap();
        let u = SampledField::from_real_fn(&[a, b], |z| (-(z[0] * z[0]) - 2.0 * z[1] * z[1]).exp()).unwrap();
        let both = u.fft_axes(&[0]).unwrap().fft_axes(&[1]).unwrap();
        let full = u.fft();
        assert!(both.sub(&full).unwrap().norm_l2() < 1e-14);
        assert_eq!(u.fft_axes(&[]).unwrap_err(), GridError::EmptySubset);
        assert_eq!(u.fft_axes(&[2]).unwrap_err(), GridError::AxisIndex(2));
    }

    #[test]
    fn binary_round_trip() {
        let a = Axis::new(8, 1.5, AxisLabel::T).unwrap();
        let b = Axis::new(16, 2.5, AxisLabel::Xi2).unwrap();
        let u = SampledField::from_fn(&[a, b], |z| Complex64::new(z[0], z[1] * z[0] + 0.1)).unwrap().fft();
        let mut buf = Vec::new();
        u.write_binary(&mut buf).unwrap();
        let back = SampledField::read_binary(&buf[..]).unwrap();
        assert_eq!(back, u);
        assert!(SampledField::read_binary(&b"nope\n"[..]).is_err());
    }

    #[test]
    fn csv_slice_rows() {
        let a = Axis::new(8, 1.0, AxisLabel::X).unwrap();
        let b = Axis::new(8, 2.0, AxisLabel::V).unwrap();
        let u = SampledField::from_real_fn(&[a, b], |z| z[0] + 10.0 * z[1]).unwrap();
        let mut buf = Vec::new();
        u.write_csv_slice(&mut buf, &[1], &[4, 0]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "v,re,im,abs");
        assert_eq!(lines.len(), 9);
        let mut buf2 = Vec::new();
        u.write_csv_slice(&mut buf2, &[0, 1], &[0, 0]).unwrap();
        assert_eq!(String::from_utf8(buf2).unwrap().lines().count(), 65);
    }

    fn field_strategy() -> impl Strategy<Value = SampledField> {
        (prop::sample::select(vec![8usize, 16, 32]), prop::sample::select(vec![8usize, 16]), 1.0f64..10.0)
            .prop_flat_map(|(n, m, l)| {
                prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * m).prop_map(move |raw| {
                    let axes = [ax(n, l), Axis::new(m, l * 0.5, AxisLabel::V).unwrap()];
                    SampledField::from_values(&axes, raw.into_iter().map(|(a, b)| Complex64::new(a, b)).collect())
                        .unwrap()
                })
            })
    }

    proptest! {
        #[test]
        fn parseval_and_round_trip(u in field_strategy()) {
            let n = u.norm_l2();
            prop_assert!((u.fft().norm_l2() - n).abs() <= 1e-12 * n);
            prop_assert!(u.fft().ifft().sub(&u).unwrap().norm_l2() <= 1e-12 * n);
        }

        #[test]
        fn inner_is_conjugate_symmetric(u in field_strategy(), s in -2.0f64..2.0) {
            let v = u.multiply_by(|z| Complex64::new(z[0].cos(), s * z[1]));
            let a = u.inner(&v).unwrap();
            let b = v.inner(&u).unwrap();
            prop_assert!((a - b.conj()).norm() <= 1e-12 * (1.0 + a.norm()));
            let uu = u.inner(&u).unwrap();
            prop_assert!(uu.im.abs() <= 1e-12 * uu.re);
            prop_assert!((uu.re - u.norm_l2().powi(2)).abs() <= 1e-12 * uu.re);
        }

        #[test]
        fn fft_is_linear(u in field_strategy(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let v = u.multiply_by(|z| Complex64::new(1.0, z[1]));
            let lhs = u.scale(c(a)).axpy(c(b), &v).unwrap().fft();
            let rhs = u.fft().scale(c(a)).axpy(c(b), &v.fft()).unwrap();
            prop_assert!(lhs.sub(&rhs).unwrap().norm_l2() <= 1e-12 * (1.0 + lhs.norm_l2()));
        }

        #[test]
        fn sobolev_monotone_in_s(u in field_strategy(), s1 in -2.0f64..2.0, ds in 0.0f64..2.0) {
            let a = u.sobolev_norm(s1, &[0, 1]).unwrap();
            let b = u.sobolev_norm(s1 + ds, &[0, 1]).unwrap();
            prop_assert!(a <= b * (1.0 + 1e-12));
        }
    }
}
