//! Hidden-variable layer: `lambda` sampling, fixed-`lambda` branch dynamics,
//! branch averaging and fast-flip evolution.

mod branch;
mod flip;
mod lambda;

pub use branch::{
    average_branches, branch_continuity_rhs, branch_rhs, branch_step, check_phase_symmetry, evolve_branches,
    fluctuation_identity_residual, madelung_continuity_rhs, BranchMode, BranchRun, BranchState,
};
pub use flip::{
    antithetic_step, branch_advance, flip_evolve, flip_macro_step, flip_replicas, flip_run, FlipOptions,
};
pub use lambda::{ball_surface_vector, replica_rng, sample_lambda, sample_lambdas, LambdaDistribution};
