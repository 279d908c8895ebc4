//! Spectral toolkit for the linear non-cutoff Boltzmann model operator
//! `P = ∂_t + v·∂_x + a(t,x,v)(−Δ̃_v)^σ`, its normal-form reductions and the
//! wave-packet (Wick) and Weyl quantizations used to study it.
//!
//! Every module computes on [`grid::SampledField`], a complex field sampled on
//! a periodic box with a unitary, phase-corrected FFT.

pub mod estimates;
pub mod grid;
pub mod kinetic;
pub mod multipliers;
pub mod quantization;
pub mod report;

pub use estimates::{EstimatesError, FamilyKind, HarnessRun, LemmaParams, TestFamily};
pub use grid::{Axis, AxisLabel, Domain, FrequencyGrid, GridError, SampledField};
pub use kinetic::{CoefficientFamily, CoefficientField, DilationParams, KineticError, ShearMode};
pub use multipliers::{gain_exponent, CutoffSpec, MultiplierError, MultiplierKind, MultiplierSpec};
pub use quantization::{PhaseSymbol, QuantizationError, WavePacketFrame};
pub use report::EstimateReport;
pub use num_complex::Complex64;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
