//! Classical ensemble dynamics: Hamilton-Jacobi and continuity stepping,
//! exact shear transport, and trajectory integration.

mod ensemble;
mod shear;
mod trajectory;

pub use ensemble::{
    advective_limit, continuity_rhs, continuity_step, hj_evolve, hj_step, ClassicalEnsembleState, ADVECTIVE_CFL,
    MASS_TOLERANCE,
};
#[allow(unused_imports)]
pub(crate) use shear::shift_along;
pub use shear::shear_transport;
pub use trajectory::{
    classical_pointer_readout, integrate_trajectories, FnVelocity, FrozenVelocity, MomentumSeries, TrajectorySet,
    VelocitySource,
};
