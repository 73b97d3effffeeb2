use std::collections::VecDeque;
use std::sync::Arc;

use crate::classical::{advective_limit, MASS_TOLERANCE};
use crate::error::{usage, Error, Result};
use crate::field::{gradient_with, second_derivative_with, Boundary, ComplexField, EdgeRule, Grid, RealField};
use crate::quantizer::EmParticle;
use crate::scalar::{Cplx, Real};

/// Densities below `NODE_THRESHOLD * max(rho)` count as nodes.
pub const NODE_THRESHOLD: f64 = 1e-12;
/// `dt <= DIFFUSIVE_CFL * h^2 m / hbar` for the second-order terms.
pub const DIFFUSIVE_CFL: f64 = 0.2;

/// Density and phase action of a wavefunction, `psi = sqrt(rho) exp(i S / hbar)`.
#[derive(Clone, Debug)]
pub struct MadelungState<T: Real> {
    pub rho: RealField<T>,
    pub s: RealField<T>,
    pub t: T,
}

impl<T: Real> MadelungState<T> {
    pub fn new(rho: RealField<T>, s: RealField<T>, t: T) -> Result<Self> {
        rho.check_grid(&s)?;
        if rho.min() < T::zero() {
            return usage("density must be non-negative");
        }
        let mass = rho.integrate();
        if (mass - T::one()).abs().as_f64() > MASS_TOLERANCE {
            return usage(format!("density integrates to {mass}, expected 1"));
        }
        Ok(Self { rho, s, t })
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        self.rho.grid()
    }
}

/// Principal branch of an angle difference, in `(-π, π]`.
fn wrap<T: Real>(d: T) -> T {
    let two_pi = T::TAU();
    let mut w = d - two_pi * (d / two_pi).round();
    if w <= -T::PI() {
        w += two_pi;
    }
    w
}

fn neighbors<T: Real>(grid: &Grid<T>, flat: usize, out: &mut Vec<usize>) {
    out.clear();
    for (ax, &stride) in grid.axes().iter().zip(grid.strides()) {
        let n = ax.len();
        let j = (flat / stride) % n;
        let periodic = ax.boundary() == Boundary::Periodic;
        if j + 1 < n {
            out.push(flat + stride);
        } else if periodic {
            out.push(flat + stride - n * stride);
        }
        if j > 0 {
            out.push(flat - stride);
        } else if periodic {
            out.push(flat + (n - 1) * stride);
        }
    }
}

/// Splits `psi` into density and unwrapped phase action.
///
/// The phase is unwrapped by breadth-first flood fill starting at the density
/// maximum, adding multiples of `2π hbar` so neighbors stay continuous; this
/// fixes the additive gauge of `S`. Cells below the node threshold are filled
/// last and never checked. Resolved cells cut off from the maximum, or a jump
/// above `π hbar / 2` between resolved neighbors, mean a node crosses the
/// support and are reported.
pub fn to_madelung<T: Real>(psi: &ComplexField<T>, hbar: T) -> Result<MadelungState<T>> {
    let grid = psi.grid().clone();
    let rho = psi.norm_sqr();
    let max = rho.max();
    if !(max > T::zero()) {
        return Err(Error::Node { detail: "wavefunction vanishes identically".into() });
    }
    let floor = T::lit(NODE_THRESHOLD) * max;
    let phase: Vec<T> = psi.data().iter().map(|z| z.arg()).collect();
    let resolved: Vec<bool> = rho.data().iter().map(|&r| r > floor).collect();
    let n = grid.len();
    let mut s = vec![T::zero(); n];
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    let mut nb = Vec::with_capacity(2 * grid.rank());

    let mut flood = |queue: &mut VecDeque<usize>, seen: &mut [bool], s: &mut [T], only_resolved: bool| {
        while let Some(cur) = queue.pop_front() {
            neighbors(&grid, cur, &mut nb);
            for &j in &nb {
                if !seen[j] && (!only_resolved || resolved[j]) {
                    seen[j] = true;
                    s[j] = s[cur] + hbar * wrap(phase[j] - phase[cur]);
                    queue.push_back(j);
                }
            }
        }
    };
    let start = rho.argmax();
    seen[start] = true;
    s[start] = hbar * phase[start];
    queue.push_back(start);
    flood(&mut queue, &mut seen, &mut s, true);
    if let Some(cut) = (0..n).find(|&i| resolved[i] && !seen[i]) {
        return Err(Error::Node {
            detail: format!(
                "resolved density is split by a node; {:?} is unreachable from the maximum",
                grid.point(cut).iter().map(|x| x.as_f64()).collect::<Vec<_>>()
            ),
        });
    }
    queue.extend((0..n).filter(|&i| seen[i]));
    flood(&mut queue, &mut seen, &mut s, false);

    let limit = hbar * T::FRAC_PI_2();
    let mut nb = Vec::with_capacity(2 * grid.rank());
    for i in (0..n).filter(|&i| resolved[i]) {
        neighbors(&grid, i, &mut nb);
        for &j in nb.iter().filter(|&&j| resolved[j]) {
            if (s[j] - s[i]).abs() > limit {
                return Err(Error::Node {
                    detail: format!(
                        "phase jump of {} hbar between cells {:?} and {:?}",
                        ((s[j] - s[i]) / hbar).as_f64(),
                        grid.point(i).iter().map(|x| x.as_f64()).collect::<Vec<_>>(),
                        grid.point(j).iter().map(|x| x.as_f64()).collect::<Vec<_>>()
                    ),
                });
            }
        }
    }
    Ok(MadelungState { rho, s: RealField::from_parts(grid, s), t: T::zero() })
}

/// `sqrt(rho) exp(i S / hbar)`.
pub fn from_madelung<T: Real>(state: &MadelungState<T>, hbar: T) -> ComplexField<T> {
    let data = state
        .rho
        .data()
        .iter()
        .zip(state.s.data())
        .map(|(&r, &s)| Cplx::from_polar(r.max(T::zero()).sqrt(), s / hbar))
        .collect();
    ComplexField::from_parts(state.grid().clone(), data)
}

/// `dS/dq_axis = hbar Im(conj(psi) dpsi) / |psi|^2`, computed without phase
/// unwrapping; zero on cells under the node threshold.
pub fn phase_gradient<T: Real>(psi: &ComplexField<T>, axis: usize, hbar: T) -> Result<RealField<T>> {
    let d = gradient_with(psi, axis, EdgeRule::OneSided)?;
    let rho = psi.norm_sqr();
    let floor = T::lit(NODE_THRESHOLD) * rho.max();
    let data = (0..psi.len())
        .map(|i| {
            let r = rho.data()[i];
            if r <= floor {
                T::zero()
            } else {
                hbar * (psi.data()[i].conj() * d.data()[i]).im / r
            }
        })
        .collect();
    Ok(RealField::from_parts(psi.grid().clone(), data))
}

/// Coefficients of the second-order terms of the pair:
/// `lin` multiplies the continuity term `(lin/2m) d²rho`, `sq` the quantum
/// term `(sq/2m) d²R/R` of the action equation.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PairTerms<T> {
    pub lin: T,
    pub sq: T,
}

/// Spatial pieces shared by the right-hand sides.
struct Derivatives<T: Real> {
    /// `(dS_k - kappa A_k) / m` per axis.
    v: Vec<RealField<T>>,
    div_v: RealField<T>,
    dl: Vec<RealField<T>>,
    lap_l: RealField<T>,
    /// `e V`, if any.
    potential: Option<RealField<T>>,
}

fn derivatives<T: Real>(em: &EmParticle<T>, ell: &RealField<T>, s: &RealField<T>, t: T) -> Result<Derivatives<T>> {
    let grid = ell.grid();
    let rank = grid.rank();
    let kappa = em.kappa();
    let inv_m = em.mass.recip();
    let mut v = Vec::with_capacity(rank);
    let mut div_v = RealField::zeros(grid.clone());
    let mut dl = Vec::with_capacity(rank);
    let mut lap_l = RealField::zeros(grid.clone());
    for k in 0..rank {
        let mut ds = gradient_with(s, k, EdgeRule::OneSided)?;
        let mut dds = second_derivative_with(s, k, EdgeRule::OneSided)?;
        if let Some(a) = em.vector_potential.get(k) {
            ds = ds.axpy(-kappa, &a.sample(grid, t)?)?;
            dds = dds.axpy(-kappa, &a.sample_derivative(grid, t, k)?)?;
        }
        v.push(ds.scale(inv_m));
        div_v = div_v.axpy(inv_m, &dds)?;
        dl.push(gradient_with(ell, k, EdgeRule::OneSided)?);
        lap_l = lap_l.add(&second_derivative_with(ell, k, EdgeRule::OneSided)?)?;
    }
    let potential = match &em.scalar_potential {
        Some(f) => Some(f.sample(grid, t)?.scale(em.charge)),
        None => None,
    };
    Ok(Derivatives { v, div_v, dl, lap_l, potential })
}

/// Time derivatives of `(ln rho, S)`:
///
/// `d_t l = -div v - v·grad l - (lin/2m)(lap l + |grad l|^2)`
/// `d_t S = -[m|v|^2/2 + eV - (sq/2m)(lap l / 2 + |grad l|^2 / 4)]`
pub(crate) fn pair_rhs<T: Real>(
    em: &EmParticle<T>,
    ell: &RealField<T>,
    s: &RealField<T>,
    t: T,
    terms: PairTerms<T>,
) -> Result<(RealField<T>, RealField<T>)> {
    let d = derivatives(em, ell, s, t)?;
    let n = ell.len();
    let m = em.mass;
    let half = T::lit(0.5);
    let quarter = T::lit(0.25);
    let lin = terms.lin / (m + m);
    let sq = terms.sq / (m + m);
    let mut dell = vec![T::zero(); n];
    let mut ds = vec![T::zero(); n];
    for i in 0..n {
        let mut v_dl = T::zero();
        let mut v2 = T::zero();
        let mut dl2 = T::zero();
        for k in 0..d.v.len() {
            let (vk, lk) = (d.v[k].data()[i], d.dl[k].data()[i]);
            v_dl += vk * lk;
            v2 += vk * vk;
            dl2 += lk * lk;
        }
        let lap = d.lap_l.data()[i];
        dell[i] = -d.div_v.data()[i] - v_dl - lin * (lap + dl2);
        let pot = d.potential.as_ref().map_or(T::zero(), |p| p.data()[i]);
        ds[i] = -(half * m * v2 + pot - sq * (half * lap + quarter * dl2));
    }
    let grid = ell.grid().clone();
    Ok((RealField::from_parts(grid.clone(), dell), RealField::from_parts(grid, ds)))
}

/// Quantum term `-(hbar²/2m) d²R/R` as a field, zeroed where the density is
/// below the node threshold.
pub(crate) fn quantum_potential<T: Real>(
    em: &EmParticle<T>,
    rho: &RealField<T>,
    hbar: T,
) -> Result<RealField<T>> {
    let floor = T::lit(NODE_THRESHOLD) * rho.max();
    let tiny = T::min_positive_value();
    let ell = rho.map(|r| r.max(tiny).ln());
    let grid = rho.grid();
    let mut lap = RealField::zeros(grid.clone());
    let mut dl2 = RealField::zeros(grid.clone());
    for k in 0..grid.rank() {
        lap = lap.add(&second_derivative_with(&ell, k, EdgeRule::OneSided)?)?;
        let g = gradient_with(&ell, k, EdgeRule::OneSided)?;
        dl2 = dl2.add(&g.mul(&g)?)?;
    }
    let c = hbar * hbar / (em.mass + em.mass);
    let data = (0..rho.len())
        .map(|i| {
            if rho.data()[i] < floor {
                T::zero()
            } else {
                -c * (T::lit(0.5) * lap.data()[i] + T::lit(0.25) * dl2.data()[i])
            }
        })
        .collect();
    Ok(RealField::from_parts(grid.clone(), data))
}

pub(crate) fn check_nodes<T: Real>(rho: &RealField<T>, t: T) -> Result<()> {
    let max = rho.max();
    let min = rho.min();
    if !min.is_finite() || !max.is_finite() {
        return Err(Error::Positivity { time: t.as_f64() });
    }
    if min < T::lit(NODE_THRESHOLD) * max {
        return Err(Error::Node {
            detail: format!("density {min:e} under the node threshold at t = {}", t.as_f64()),
        });
    }
    Ok(())
}

/// Largest stable step for the pair at the given state.
pub(crate) fn pair_limit<T: Real>(em: &EmParticle<T>, s: &RealField<T>, t: T, terms: PairTerms<T>) -> Result<(T, &'static str)> {
    let grid = s.grid();
    let kappa = em.kappa();
    let mut v = Vec::with_capacity(grid.rank());
    for k in 0..grid.rank() {
        let mut ds = gradient_with(s, k, EdgeRule::OneSided)?;
        if let Some(a) = em.vector_potential.get(k) {
            ds = ds.axpy(-kappa, &a.sample(grid, t)?)?;
        }
        v.push(ds.scale(em.mass.recip()));
    }
    let advective = advective_limit(&v);
    let strength = terms.lin.abs().max(terms.sq.abs().sqrt());
    if strength > T::zero() {
        let h = grid.min_spacing();
        let diffusive = T::lit(DIFFUSIVE_CFL) * h * h * em.mass / strength;
        if diffusive < advective {
            return Ok((diffusive, "diffusive CFL"));
        }
    }
    Ok((advective, "advective CFL"))
}

/// One RK4 step of the pair in `(ln rho, S)` variables.
pub(crate) fn pair_step<T: Real>(
    em: &EmParticle<T>,
    rho: &RealField<T>,
    s: &RealField<T>,
    t: T,
    dt: T,
    terms: PairTerms<T>,
) -> Result<(RealField<T>, RealField<T>)> {
    check_nodes(rho, t)?;
    let (limit, reason) = pair_limit(em, s, t, terms)?;
    if dt > limit {
        return Err(Error::Stability { dt: dt.as_f64(), limit: limit.as_f64(), reason: reason.into() });
    }
    let ell = rho.map(|r| r.ln());
    let half = dt * T::lit(0.5);
    let (k1l, k1s) = pair_rhs(em, &ell, s, t, terms)?;
    let (k2l, k2s) = pair_rhs(em, &ell.axpy(half, &k1l)?, &s.axpy(half, &k1s)?, t + half, terms)?;
    let (k3l, k3s) = pair_rhs(em, &ell.axpy(half, &k2l)?, &s.axpy(half, &k2s)?, t + half, terms)?;
    let (k4l, k4s) = pair_rhs(em, &ell.axpy(dt, &k3l)?, &s.axpy(dt, &k3s)?, t + dt, terms)?;
    let sixth = dt / T::lit(6.0);
    let combine = |y: &RealField<T>, a: &RealField<T>, b: &RealField<T>, c: &RealField<T>, d: &RealField<T>| {
        let data = (0..y.len())
            .map(|i| {
                y.data()[i] + sixth * (a.data()[i] + (b.data()[i] + c.data()[i]) * T::lit(2.0) + d.data()[i])
            })
            .collect();
        RealField::from_parts(y.grid().clone(), data)
    };
    let ell = combine(&ell, &k1l, &k2l, &k3l, &k4l);
    let s = combine(s, &k1s, &k2s, &k3s, &k4s);
    let rho = ell.map(|l| l.exp());
    if !rho.all_finite() || !s.all_finite() {
        return Err(Error::Positivity { time: (t + dt).as_f64() });
    }
    check_nodes(&rho, t + dt)?;
    Ok((rho, s))
}

/// One RK4 step of the Madelung pair: continuity with `v = (dS - kappa A)/m`
/// and the action equation with the quantum term `-(hbar²/2m) d²R/R`.
pub fn evolve_madelung<T: Real>(em: &EmParticle<T>, state: &MadelungState<T>, dt: T, hbar: T) -> Result<MadelungState<T>> {
    madelung_step_with(em, state, dt, hbar, true)
}

/// As [`evolve_madelung`], optionally without the quantum term, in which case
/// the pair is the classical Hamilton-Jacobi and continuity system.
pub fn madelung_step_with<T: Real>(
    em: &EmParticle<T>,
    state: &MadelungState<T>,
    dt: T,
    hbar: T,
    quantum_term: bool,
) -> Result<MadelungState<T>> {
    let sq = if quantum_term { hbar * hbar } else { T::zero() };
    let (rho, s) = pair_step(em, &state.rho, &state.s, state.t, dt, PairTerms { lin: T::zero(), sq })?;
    Ok(MadelungState { rho, s, t: state.t + dt })
}

/// Advances to `t_end` in equal steps no longer than `dt`.
pub fn madelung_evolve_to<T: Real>(
    em: &EmParticle<T>,
    state: &MadelungState<T>,
    t_end: T,
    dt: T,
    hbar: T,
) -> Result<MadelungState<T>> {
    let span = t_end - state.t;
    if !(dt > T::zero()) || span < T::zero() {
        return usage("madelung evolution needs dt > 0 and t_end >= t");
    }
    let steps = super::propagator::step_count(span, dt);
    let mut out = state.clone();
    if steps == 0 {
        return Ok(out);
    }
    let h = span / T::count(steps);
    for _ in 0..steps {
        out = evolve_madelung(em, &out, h, hbar)?;
    }
    Ok(out)
}
