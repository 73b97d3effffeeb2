//! Numerical toolkit for hidden-variable quantization: classical
//! Hamilton-Jacobi ensembles, the `lambda = ±hbar` branch dynamics, Schrödinger
//! and Madelung propagation, pilot-wave trajectories and pointer measurements.
//!
//! Everything is generic over the scalar type ([`Real`], implemented for `f32`
//! and `f64`). The `*64` aliases below are the configurations the runner uses.

pub mod analytic;
pub mod classical;
pub mod error;
pub mod field;
pub mod hv;
pub mod measure;
pub mod pilot;
pub mod quantizer;
pub mod quantum;
pub mod scalar;
pub mod spectral;

pub use error::{Error, Result};
pub use scalar::{Cplx, Real};

pub type Grid64 = field::Grid<f64>;
pub type Grid32 = field::Grid<f32>;
pub type RealField64 = field::RealField<f64>;
pub type RealField32 = field::RealField<f32>;
pub type ComplexField64 = field::ComplexField<f64>;
pub type ComplexField32 = field::ComplexField<f32>;
