use rand::Rng;
use rayon::prelude::*;

use super::branch::{branch_step, BranchState};
use super::lambda::{replica_rng, LambdaDistribution};
use crate::error::{usage, Result};
use crate::quantizer::EmParticle;
use crate::quantum::{pair_limit, MadelungState, PairTerms};
use crate::scalar::Real;

/// Advances a branch by `span` at its fixed `lambda`. The remaining span is
/// split into equal substeps under the stability limit of the current state,
/// re-evaluated after every substep.
pub fn branch_advance<T: Real>(em: &EmParticle<T>, b: &BranchState<T>, span: T) -> Result<BranchState<T>> {
    let terms = PairTerms { lin: b.lambda, sq: b.lambda * b.lambda };
    let end = b.t + span;
    let mut cur = b.clone();
    let mut left = span;
    while left > T::zero() {
        let (limit, _) = pair_limit(em, &cur.s, cur.t, terms)?;
        let n = (left / limit).ceil().to_usize().unwrap_or(1).max(1);
        let h = left / T::count(n);
        cur = branch_step(em, &cur, h)?;
        left = if n == 1 { T::zero() } else { end - cur.t };
    }
    if span > T::zero() {
        cur.t = end;
    }
    Ok(cur)
}

fn with_lambda<T: Real>(state: &MadelungState<T>, lambda: T) -> BranchState<T> {
    BranchState::from_madelung(state, lambda)
}

fn to_state<T: Real>(b: BranchState<T>) -> MadelungState<T> {
    MadelungState { rho: b.rho, s: b.s, t: b.t }
}

/// `+hbar` for `dt`, then `-hbar` for `dt`, from the same state.
pub fn antithetic_step<T: Real>(em: &EmParticle<T>, init: &MadelungState<T>, hbar: T, dt: T) -> Result<MadelungState<T>> {
    let up = branch_advance(em, &with_lambda(init, hbar), dt)?;
    let down = branch_advance(em, &with_lambda(&to_state(up), -hbar), dt)?;
    Ok(to_state(down))
}

/// Fast-flip stepping options.
#[derive(Clone, Copy, Debug)]
pub struct FlipOptions<T> {
    pub dist: LambdaDistribution<T>,
    /// Split each micro step into a `lambda` half and a `-lambda` half.
    pub antithetic: bool,
}

impl<T: Real> FlipOptions<T> {
    pub fn two_point(hbar: T) -> Self {
        Self { dist: LambdaDistribution::TwoPoint { hbar }, antithetic: false }
    }
}

/// One macro step of length `dt_macro` made of `n_micro` fixed-`lambda`
/// micro steps, each with a fresh draw from `rng`.
pub fn flip_macro_step<T: Real, R: Rng + ?Sized>(
    em: &EmParticle<T>,
    init: &MadelungState<T>,
    dt_macro: T,
    n_micro: usize,
    opts: &FlipOptions<T>,
    rng: &mut R,
) -> Result<MadelungState<T>> {
    if n_micro == 0 {
        return usage("n_micro must be at least 1");
    }
    opts.dist.validate()?;
    let tau = dt_macro / T::count(n_micro);
    let mut cur = init.clone();
    for _ in 0..n_micro {
        let lambda = opts.dist.sample(rng);
        cur = if opts.antithetic {
            let half = tau * T::lit(0.5);
            let up = branch_advance(em, &with_lambda(&cur, lambda), half)?;
            to_state(branch_advance(em, &with_lambda(&to_state(up), -lambda), half)?)
        } else {
            to_state(branch_advance(em, &with_lambda(&cur, lambda), tau)?)
        };
    }
    Ok(cur)
}

/// One macro step with `±hbar` flips drawn from the stream of `seed`.
pub fn flip_evolve<T: Real>(
    em: &EmParticle<T>,
    init: &MadelungState<T>,
    hbar: T,
    dt_macro: T,
    n_micro: usize,
    seed: u64,
) -> Result<MadelungState<T>> {
    flip_macro_step(em, init, dt_macro, n_micro, &FlipOptions::two_point(hbar), &mut replica_rng(seed, 0))
}

/// Fast-flip run to `t_end` drawing from stream `replica` of `seed`.
pub fn flip_run<T: Real>(
    em: &EmParticle<T>,
    init: &MadelungState<T>,
    t_end: T,
    dt_macro: T,
    n_micro: usize,
    opts: &FlipOptions<T>,
    seed: u64,
    replica: u64,
) -> Result<MadelungState<T>> {
    if !(dt_macro > T::zero()) || t_end < init.t {
        return usage("flip run needs dt_macro > 0 and t_end >= t");
    }
    let span = t_end - init.t;
    let steps = (span / dt_macro).round().to_usize().unwrap_or(0);
    if (T::count(steps) * dt_macro - span).abs() > T::lit(1e-9) * span.max(T::one()) {
        return usage("flip run span must be a whole number of macro steps");
    }
    let mut rng = replica_rng(seed, replica);
    let mut cur = init.clone();
    for _ in 0..steps {
        cur = flip_macro_step(em, &cur, dt_macro, n_micro, opts, &mut rng)?;
    }
    Ok(cur)
}

/// Independent fast-flip replicas, one RNG stream each, run in parallel.
pub fn flip_replicas<T: Real>(
    em: &EmParticle<T>,
    init: &MadelungState<T>,
    t_end: T,
    dt_macro: T,
    n_micro: usize,
    opts: &FlipOptions<T>,
    seed: u64,
    replicas: usize,
) -> Result<Vec<MadelungState<T>>> {
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| flip_run(em, init, t_end, dt_macro, n_micro, opts, seed, r))
        .collect()
}
