//! Fixtures shared by the benchmarks: deterministic fields on the standard grids.

use std::f64::consts::PI;

use hypokit_core::{Axis, AxisLabel, Complex64, SampledField};

/// Modulated Gaussian of width `0.1·L` on `axes`.
pub fn packet(axes: &[Axis]) -> SampledField {
    SampledField::from_fn(axes, |z| {
        let mut e = 0.0;
        let mut ph = 0.0;
        for (d, a) in axes.iter().enumerate() {
            let w = 0.1 * a.length();
            e += z[d] * z[d] / (2.0 * w * w);
            ph += 2.0 * PI * 0.1 * a.nyquist() * z[d];
        }
        Complex64::from_polar((-e).exp(), ph)
    })
    .expect("valid grid")
}

/// `n` points per axis on the `(t, x, v)` box `[−2, 2) × [−4, 4)²`.
pub fn txv(n: usize) -> Vec<Axis> {
    vec![
        Axis::new(n, 4.0, AxisLabel::T).expect("valid axis"),
        Axis::new(n, 8.0, AxisLabel::X).expect("valid axis"),
        Axis::new(n, 8.0, AxisLabel::V).expect("valid axis"),
    ]
}

/// One axis of `n` points and length `length`.
pub fn line(n: usize, length: f64) -> Vec<Axis> {
    vec![Axis::new(n, length, AxisLabel::X).expect("valid axis")]
}
