use std::sync::Arc;

use super::sampling::{binned_l1, sample_density};
use crate::classical::{integrate_trajectories, MomentumSeries, TrajectorySet};
use crate::error::{usage, Result};
use crate::field::{ComplexField, RealField};
use crate::quantizer::{velocity_functional, ClassicalHamiltonian};
use crate::quantum::{phase_gradient, MadelungState, NODE_THRESHOLD};
use crate::scalar::Real;

/// `f(S_Q)`: the velocity functional of `h` applied to the Madelung action.
pub fn effective_velocity<T: Real>(state: &MadelungState<T>, h: &ClassicalHamiltonian<T>) -> Result<Vec<RealField<T>>> {
    velocity_functional(h)?.eval(&state.s, state.t)
}

/// `f(S_Q)` computed from `psi` directly, with `dS_Q` taken as
/// `hbar Im(conj(psi) dpsi)/|psi|^2`; needs no phase unwrapping.
pub fn effective_velocity_of<T: Real>(
    psi: &ComplexField<T>,
    h: &ClassicalHamiltonian<T>,
    hbar: T,
    t: T,
) -> Result<Vec<RealField<T>>> {
    let p = momentum_fields(psi, hbar)?;
    velocity_functional(h)?.from_momentum(&p, t)
}

fn momentum_fields<T: Real>(psi: &ComplexField<T>, hbar: T) -> Result<Vec<RealField<T>>> {
    (0..psi.grid().rank()).map(|k| phase_gradient(psi, k, hbar)).collect()
}

/// Guidance field built from a wavefunction snapshot series.
pub fn guidance_series<T: Real>(
    h: &ClassicalHamiltonian<T>,
    snapshots: &[ComplexField<T>],
    times: &[T],
    hbar: T,
) -> Result<MomentumSeries<T>> {
    if snapshots.len() != times.len() {
        return usage("need one snapshot per timestamp");
    }
    let momenta = snapshots.iter().map(|psi| momentum_fields(psi, hbar)).collect::<Result<Vec<_>>>()?;
    let densities = snapshots.iter().map(|psi| psi.norm_sqr()).collect();
    MomentumSeries::new(velocity_functional(h)?, times.to_vec(), momenta)?
        .with_node_guard(densities, T::lit(NODE_THRESHOLD))
}

/// Particles guided through a frozen series of wavefunction snapshots.
#[derive(Clone, Debug)]
pub struct GuidedEnsemble<T: Real> {
    pub trajectories: TrajectorySet<T>,
    pub snapshots: Arc<Vec<ComplexField<T>>>,
    /// Binned L1 distance of the seeds to `|psi(0)|^2` at unit bin factor.
    pub seeding_l1: T,
}

impl<T: Real> GuidedEnsemble<T> {
    /// Seeds `n` particles from `|psi(t_0)|^2` and guides them through every
    /// snapshot time with RK4 sub-steps no longer than `max_dt`.
    pub fn seed_and_guide(
        h: &ClassicalHamiltonian<T>,
        snapshots: Arc<Vec<ComplexField<T>>>,
        times: &[T],
        hbar: T,
        n: usize,
        seed: u64,
        max_dt: T,
    ) -> Result<Self> {
        let first = snapshots.first().ok_or_else(|| crate::error::Error::Usage("no snapshots".into()))?;
        let seeds = sample_density(&first.norm_sqr(), n, seed)?;
        Self::guide(h, snapshots, times, hbar, seeds, max_dt)
    }

    pub fn guide(
        h: &ClassicalHamiltonian<T>,
        snapshots: Arc<Vec<ComplexField<T>>>,
        times: &[T],
        hbar: T,
        seeds: Vec<Vec<T>>,
        max_dt: T,
    ) -> Result<Self> {
        let series = guidance_series(h, &snapshots, times, hbar)?;
        let seeding_l1 = binned_l1(&seeds, &snapshots[0].norm_sqr(), 1)?;
        let trajectories = integrate_trajectories(&series, &seeds, times, max_dt)?;
        Ok(Self { trajectories, snapshots, seeding_l1 })
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }
}

/// Binned L1 distance between the guided particles and `|psi(t)|^2` at each
/// snapshot time; bins span `bin_factor` grid cells per axis.
pub fn equivariance_test<T: Real>(ensemble: &GuidedEnsemble<T>, bin_factor: usize) -> Result<Vec<T>> {
    ensemble
        .snapshots
        .iter()
        .enumerate()
        .map(|(ti, psi)| binned_l1(&ensemble.trajectories.at_time(ti), &psi.norm_sqr(), bin_factor))
        .collect()
}
