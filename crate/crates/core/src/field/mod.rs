//! Grids, sampled fields and the finite-difference, quadrature and
//! interpolation operators built on them.

mod diff;
#[allow(clippy::module_inception)]
mod field;
mod grid;
mod interp;
mod io;
mod sample;

pub use diff::{gradient, gradient_with, gradients, laplacian, laplacian_with, second_derivative_with, EdgeRule};
pub use field::{integrate, ComplexField, Field, RealField};
pub use grid::{Axis, Boundary, Grid, MIN_POINTS};
pub use interp::interpolate;
#[allow(unused_imports)]
pub(crate) use interp::locate;
pub use io::{load_field, read_field, save_field, write_field};
pub use sample::Sample;
