use std::sync::Arc;

use crate::error::{usage, Error, Result};
use crate::field::{gradient_with, laplacian, EdgeRule, Grid, RealField};
use crate::quantizer::EmParticle;
use crate::quantum::{check_nodes, pair_limit, pair_rhs, pair_step, MadelungState, PairTerms};
use crate::scalar::Real;

/// Renormalization trigger for averaged densities.
const AVERAGE_MASS_TOLERANCE: f64 = 1e-10;

/// Density and action evolved at a fixed value of `lambda`.
#[derive(Clone, Debug)]
pub struct BranchState<T: Real> {
    pub lambda: T,
    pub s: RealField<T>,
    pub rho: RealField<T>,
    pub t: T,
}

impl<T: Real> BranchState<T> {
    pub fn from_madelung(state: &MadelungState<T>, lambda: T) -> Self {
        Self { lambda, s: state.s.clone(), rho: state.rho.clone(), t: state.t }
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        self.rho.grid()
    }

    fn terms(&self) -> PairTerms<T> {
        PairTerms { lin: self.lambda, sq: self.lambda * self.lambda }
    }
}

/// One RK4 step of the fixed-`lambda` pair
///
/// `d_t rho + div(rho v) + (lambda/2m) d²rho = 0`
/// `d_t S + |dS - kappa A|²/2m + eV - (lambda²/2m) d²R/R = 0`
pub fn branch_step<T: Real>(em: &EmParticle<T>, b: &BranchState<T>, dt: T) -> Result<BranchState<T>> {
    let (rho, s) = pair_step(em, &b.rho, &b.s, b.t, dt, b.terms())?;
    Ok(BranchState { lambda: b.lambda, s, rho, t: b.t + dt })
}

/// Instantaneous `(d_t rho, d_t S)` of a branch.
pub fn branch_rhs<T: Real>(em: &EmParticle<T>, b: &BranchState<T>) -> Result<(RealField<T>, RealField<T>)> {
    let ell = b.rho.map(|r| r.ln());
    let (dl, ds) = pair_rhs(em, &ell, &b.s, b.t, b.terms())?;
    Ok((dl.mul(&b.rho)?, ds))
}

fn flux_divergence<T: Real>(em: &EmParticle<T>, rho: &RealField<T>, s: &RealField<T>, t: T) -> Result<RealField<T>> {
    let grid = rho.grid();
    let mut div = RealField::zeros(grid.clone());
    for k in 0..grid.rank() {
        let mut ds = gradient_with(s, k, EdgeRule::OneSided)?;
        if let Some(a) = em.vector_potential.get(k) {
            ds = ds.axpy(-em.kappa(), &a.sample(grid, t)?)?;
        }
        let flux = ds.mul(rho)?.scale(em.mass.recip());
        div = div.add(&gradient_with(&flux, k, EdgeRule::OneSided)?)?;
    }
    Ok(div)
}

/// `d_t rho = -div(rho v) - (lambda/2m) lap rho` in density form.
pub fn branch_continuity_rhs<T: Real>(
    em: &EmParticle<T>,
    lambda: T,
    rho: &RealField<T>,
    s: &RealField<T>,
    t: T,
) -> Result<RealField<T>> {
    let transport = flux_divergence(em, rho, s, t)?;
    let diffusion = laplacian(rho).scale(lambda / (em.mass + em.mass));
    transport.scale(-T::one()).sub(&diffusion)
}

/// `d_t rho = -div(rho v)`, the Madelung continuity right-hand side.
pub fn madelung_continuity_rhs<T: Real>(
    em: &EmParticle<T>,
    rho: &RealField<T>,
    s: &RealField<T>,
    t: T,
) -> Result<RealField<T>> {
    Ok(flux_divergence(em, rho, s, t)?.scale(-T::one()))
}

/// `(1/4)|grad rho|²/rho² - [(1/2) lap rho / rho - lap R / R]`, which vanishes
/// for smooth positive `rho` up to stencil error.
pub fn fluctuation_identity_residual<T: Real>(rho: &RealField<T>) -> Result<RealField<T>> {
    let grid = rho.grid();
    let r = rho.map(|x| x.sqrt());
    let mut grad2 = RealField::zeros(grid.clone());
    for k in 0..grid.rank() {
        let g = gradient_with(rho, k, EdgeRule::OneSided)?;
        grad2 = grad2.add(&g.mul(&g)?)?;
    }
    let (lap_rho, lap_r) = (laplacian(rho), laplacian(&r));
    let data = (0..rho.len())
        .map(|i| {
            let p = rho.data()[i];
            let lhs = T::lit(0.25) * grad2.data()[i] / (p * p);
            let rhs = T::lit(0.5) * lap_rho.data()[i] / p - lap_r.data()[i] / r.data()[i];
            lhs - rhs
        })
        .collect();
    Ok(RealField::from_parts(grid.clone(), data))
}

/// `S_Q = (S+ + S-)/2` and `rho = (rho+ + rho-)/2`, renormalized when its
/// mass is off by more than `1e-10`.
pub fn average_branches<T: Real>(plus: &BranchState<T>, minus: &BranchState<T>) -> Result<MadelungState<T>> {
    if plus.lambda != -minus.lambda {
        return usage(format!("branches carry lambda {} and {}, not opposite values", plus.lambda, minus.lambda));
    }
    plus.rho.check_grid(&minus.rho)?;
    if plus.t != minus.t {
        return usage("branches are at different times");
    }
    let half = T::lit(0.5);
    let s = plus.s.add(&minus.s)?.scale(half);
    let mut rho = plus.rho.add(&minus.rho)?.scale(half);
    let mass = rho.integrate();
    if (mass - T::one()).abs().as_f64() > AVERAGE_MASS_TOLERANCE {
        rho = rho.scale(mass.recip());
    }
    Ok(MadelungState { rho, s, t: plus.t })
}

/// How the two branches share the density.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchMode {
    /// One density for both branches, advanced with the `lambda`-averaged
    /// continuity right-hand side.
    SharedRho,
    /// Each branch transports its own density.
    IndependentRho,
}

impl BranchMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BranchMode::SharedRho => "shared-rho",
            BranchMode::IndependentRho => "independent-rho",
        }
    }
}

/// A `±lambda` branch pair evolved side by side.
#[derive(Clone, Debug)]
pub struct BranchRun<T: Real> {
    pub mode: BranchMode,
    pub plus: BranchState<T>,
    pub minus: BranchState<T>,
    pub times: Vec<T>,
    /// `sup |S+ - S-|` at each entry of `times`.
    pub discrepancy: Vec<T>,
}

impl<T: Real> BranchRun<T> {
    pub fn averaged(&self) -> Result<MadelungState<T>> {
        average_branches(&self.plus, &self.minus)
    }
}

/// Evolves the `+hbar` and `-hbar` branches from a common start for `steps`
/// steps of `dt`.
pub fn evolve_branches<T: Real>(
    em: &EmParticle<T>,
    init: &MadelungState<T>,
    hbar: T,
    dt: T,
    steps: usize,
    mode: BranchMode,
) -> Result<BranchRun<T>> {
    let mut plus = BranchState::from_madelung(init, hbar);
    let mut minus = BranchState::from_madelung(init, -hbar);
    let mut times = vec![init.t];
    let mut discrepancy = vec![plus.s.sub(&minus.s)?.sup_norm()];
    for _ in 0..steps {
        (plus, minus) = match mode {
            BranchMode::IndependentRho => {
                let (p, m) = rayon::join(|| branch_step(em, &plus, dt), || branch_step(em, &minus, dt));
                (p?, m?)
            }
            BranchMode::SharedRho => shared_step(em, &plus, &minus, dt)?,
        };
        times.push(plus.t);
        discrepancy.push(plus.s.sub(&minus.s)?.sup_norm());
    }
    Ok(BranchRun { mode, plus, minus, times, discrepancy })
}

/// Largest `sup |S+ - S-|` seen during the run.
pub fn check_phase_symmetry<T: Real>(run: &BranchRun<T>) -> T {
    run.discrepancy.iter().copied().fold(T::zero(), T::max)
}

/// RK4 step where each branch keeps its own action and `lambda`-linear term,
/// and the shared log-density moves with the average of the two branch rates.
fn shared_step<T: Real>(
    em: &EmParticle<T>,
    plus: &BranchState<T>,
    minus: &BranchState<T>,
    dt: T,
) -> Result<(BranchState<T>, BranchState<T>)> {
    let t = plus.t;
    check_nodes(&plus.rho, t)?;
    for b in [plus, minus] {
        let (limit, reason) = pair_limit(em, &b.s, t, b.terms())?;
        if dt > limit {
            return Err(Error::Stability { dt: dt.as_f64(), limit: limit.as_f64(), reason: reason.into() });
        }
    }
    let half = dt * T::lit(0.5);
    let rates = |ell: &RealField<T>, sp: &RealField<T>, sm: &RealField<T>, t: T| -> Result<[RealField<T>; 3]> {
        let (lp, dsp) = pair_rhs(em, ell, sp, t, plus.terms())?;
        let (lm, dsm) = pair_rhs(em, ell, sm, t, minus.terms())?;
        Ok([lp.add(&lm)?.scale(T::lit(0.5)), dsp, dsm])
    };
    let ell = plus.rho.map(|r| r.ln());
    let (sp, sm) = (&plus.s, &minus.s);
    let k1 = rates(&ell, sp, sm, t)?;
    let k2 = rates(&ell.axpy(half, &k1[0])?, &sp.axpy(half, &k1[1])?, &sm.axpy(half, &k1[2])?, t + half)?;
    let k3 = rates(&ell.axpy(half, &k2[0])?, &sp.axpy(half, &k2[1])?, &sm.axpy(half, &k2[2])?, t + half)?;
    let k4 = rates(&ell.axpy(dt, &k3[0])?, &sp.axpy(dt, &k3[1])?, &sm.axpy(dt, &k3[2])?, t + dt)?;
    let sixth = dt / T::lit(6.0);
    let two = T::lit(2.0);
    let combine = |y: &RealField<T>, j: usize| -> Result<RealField<T>> {
        let incr = k1[j].add(&k2[j].scale(two))?.add(&k3[j].scale(two))?.add(&k4[j])?;
        y.axpy(sixth, &incr)
    };
    let rho = combine(&ell, 0)?.map(|l| l.exp());
    if !rho.all_finite() {
        return Err(Error::Positivity { time: (t + dt).as_f64() });
    }
    check_nodes(&rho, t + dt)?;
    let (s_plus, s_minus) = (combine(sp, 1)?, combine(sm, 2)?);
    Ok((
        BranchState { lambda: plus.lambda, s: s_plus, rho: rho.clone(), t: t + dt },
        BranchState { lambda: minus.lambda, s: s_minus, rho, t: t + dt },
    ))
}
