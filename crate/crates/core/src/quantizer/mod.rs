//! Classical Hamiltonian catalog, velocity functionals and the
//! classical-to-quantum operator mapping.

mod hamiltonian;
mod operator;
mod ordering;
mod velocity;

pub use hamiltonian::{ClassicalHamiltonian, EmParticle};
pub use operator::{
    expectation, expectation_at, hermiticity_defect, momentum, quantize, QuantumOperator, HERMITICITY_TOLERANCE,
    NORM_TOLERANCE,
};
#[allow(unused_imports)]
pub(crate) use operator::boundary_nodes;
pub use ordering::{ordering_gap, ordering_gap_interior, ordering_gap_with, ORDERING_GAP_MARGIN};
pub use velocity::{velocity_functional, VelocityFunctional};
