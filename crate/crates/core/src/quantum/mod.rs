//! Wavefunction propagation, Madelung form and quantum observables.

mod linsolve;
mod madelung;
mod modes;
mod observables;
mod propagator;

pub use linsolve::{SOLVER_ACCEPT, SOLVER_TARGET};
pub use madelung::{
    evolve_madelung, from_madelung, madelung_evolve_to, madelung_step_with, phase_gradient, to_madelung, MadelungState,
    DIFFUSIVE_CFL, NODE_THRESHOLD,
};
#[allow(unused_imports)]
pub(crate) use madelung::{check_nodes, pair_limit, pair_rhs, pair_step, PairTerms};
pub use modes::ModePropagator;
pub use observables::{energy, madelung_energy, uncertainty_product, ObservableRow, ObservableSeries, Uncertainty};
pub use propagator::{Propagator, PropagatorKind};
