//! Pilot-wave guidance: effective velocities, density sampling, guided
//! ensembles and the equivariance check.

mod guidance;
mod sampling;

pub use guidance::{effective_velocity, effective_velocity_of, equivariance_test, guidance_series, GuidedEnsemble};
pub use sampling::{binned_l1, sample_density};
