//! Time evolution of spin-boson systems with a truncated Taylor-series step
//! propagator, cross-checked against eigendecomposition-based evolution.
//!
//! The numerical core is generic over the real scalar type ([`Scalar`], for
//! `f32` and `f64`); the aliases below fix it to `f64`, which is what the
//! documented tolerances and the on-disk cache assume.

// `!(x <= tol)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cache;
pub mod error;
pub mod fingerprint;
pub mod model;
mod scalar;
pub mod spectral;
pub mod states;
pub mod taylor;
pub mod trajectory;

pub use error::{Error, Result};
pub use model::{
    build_transfer_matrix, hermiticity_check, ModelParams, TransferMatrix, Truncation,
};
pub use scalar::Scalar;
pub use spectral::{
    diagonalize, gs_scan, level_differences, teee_evolve, GsClass, GsScanResult,
    SpectralDecomposition,
};
pub use states::{coherent_state, fock_state, CoherentSpec, Spin, SpinorFockState};
pub use taylor::{
    build_step_propagator, certified_step, evolve, evolve_reusing, suggest_step, PowerCache,
    PropagatorConfig, StepPropagator,
};
pub use trajectory::{Record, Snapshot, Trajectory};

pub use num_complex::Complex;

pub type C64 = Complex<f64>;
pub type ModelParams64 = ModelParams<f64>;
pub type TransferMatrix64 = TransferMatrix<f64>;
pub type State64 = SpinorFockState<f64>;
pub type CoherentSpec64 = CoherentSpec<f64>;
pub type PropagatorConfig64 = PropagatorConfig<f64>;
pub type StepPropagator64 = StepPropagator<f64>;
pub type Trajectory64 = Trajectory<f64>;
pub type Record64 = Record<f64>;
pub type Spectral64 = SpectralDecomposition<f64>;
pub type GsScan64 = GsScanResult<f64>;

pub type ModelParams32 = ModelParams<f32>;
pub type TransferMatrix32 = TransferMatrix<f32>;
pub type State32 = SpinorFockState<f32>;
pub type StepPropagator32 = StepPropagator<f32>;
pub type Trajectory32 = Trajectory<f32>;
