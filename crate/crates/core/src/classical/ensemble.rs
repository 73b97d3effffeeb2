use crate::error::{usage, Error, Result};
use crate::field::{Boundary, Grid, RealField};
use crate::quantizer::{velocity_functional, ClassicalHamiltonian};
use crate::scalar::Real;

/// Courant number for explicit advection: `dt <= ADVECTIVE_CFL * h / max|v|`.
pub const ADVECTIVE_CFL: f64 = 0.4;
/// Tolerance on the normalization of classical densities.
pub const MASS_TOLERANCE: f64 = 1e-6;

/// Action and density of a classical ensemble at time `t`.
#[derive(Clone, Debug)]
pub struct ClassicalEnsembleState<T: Real> {
    pub s: RealField<T>,
    pub rho: RealField<T>,
    pub t: T,
}

impl<T: Real> ClassicalEnsembleState<T> {
    pub fn new(s: RealField<T>, rho: RealField<T>, t: T) -> Result<Self> {
        s.check_grid(&rho)?;
        if rho.min() < T::zero() {
            return usage("classical density must be non-negative");
        }
        let mass = rho.integrate();
        if (mass - T::one()).abs().as_f64() > MASS_TOLERANCE {
            return usage(format!("classical density integrates to {mass}, expected 1"));
        }
        Ok(Self { s, rho, t })
    }
}

/// Largest stable step for the given velocity fields.
pub fn advective_limit<T: Real>(v: &[RealField<T>]) -> T {
    let mut limit = T::infinity();
    for (k, vk) in v.iter().enumerate() {
        let vmax = vk.sup_norm();
        if vmax > T::zero() {
            limit = limit.min(T::lit(ADVECTIVE_CFL) * vk.grid().axis(k).spacing() / vmax);
        }
    }
    limit
}

pub(crate) fn check_advective<T: Real>(v: &[RealField<T>], dt: T) -> Result<()> {
    let limit = advective_limit(v);
    if dt > limit {
        return Err(Error::Stability {
            dt: dt.as_f64(),
            limit: limit.as_f64(),
            reason: "advective CFL".into(),
        });
    }
    Ok(())
}

/// Face flux of `a` between nodes `i` and `i + 1` on one line.
fn face_flux<T: Real>(a: &[T], i: usize, boundary: Boundary) -> T {
    let n = a.len();
    match boundary {
        Boundary::Periodic => {
            let at = |d: isize| a[(i as isize + d).rem_euclid(n as isize) as usize];
            (T::lit(7.0) * (at(0) + at(1)) - (at(-1) + at(2))) / T::lit(12.0)
        }
        Boundary::Dirichlet => {
            if i == 0 || i + 2 == n {
                (a[i] + a[i + 1]) * T::lit(0.5)
            } else {
                (T::lit(7.0) * (a[i] + a[i + 1]) - (a[i - 1] + a[i + 2])) / T::lit(12.0)
            }
        }
    }
}

fn flux_divergence_line<T: Real>(a: &[T], out: &mut [T], h: T, boundary: Boundary) {
    let n = a.len();
    match boundary {
        Boundary::Periodic => {
            for i in 0..n {
                let right = face_flux(a, i, boundary);
                let left = face_flux(a, (i + n - 1) % n, boundary);
                out[i] = (right - left) / h;
            }
        }
        Boundary::Dirichlet => {
            // end nodes own half cells; outer faces carry no flux
            let half = h * T::lit(0.5);
            out[0] = face_flux(a, 0, boundary) / half;
            out[n - 1] = -face_flux(a, n - 2, boundary) / half;
            for i in 1..n - 1 {
                out[i] = (face_flux(a, i, boundary) - face_flux(a, i - 1, boundary)) / h;
            }
        }
    }
}

/// `-div(rho v)` in conservative finite-volume form. On periodic axes the
/// quadrature of the result telescopes to zero exactly.
pub fn continuity_rhs<T: Real>(v: &[RealField<T>], rho: &RealField<T>) -> Result<RealField<T>> {
    let grid: &Grid<T> = rho.grid();
    if v.len() != grid.rank() {
        return usage(format!("{} velocity components for a rank-{} grid", v.len(), grid.rank()));
    }
    let mut acc = vec![T::zero(); grid.len()];
    for (k, vk) in v.iter().enumerate() {
        rho.check_grid(vk)?;
        let a: Vec<T> = rho.data().iter().zip(vk.data()).map(|(&r, &u)| r * u).collect();
        let ax = grid.axis(k);
        let (n, h, boundary) = (ax.len(), ax.spacing(), ax.boundary());
        let stride = grid.strides()[k];
        let mut line = vec![T::zero(); n];
        let mut div = vec![T::zero(); n];
        grid.for_each_line(k, |base| {
            for (i, l) in line.iter_mut().enumerate() {
                *l = a[base + i * stride];
            }
            flux_divergence_line(&line, &mut div, h, boundary);
            for (i, d) in div.iter().enumerate() {
                acc[base + i * stride] -= *d;
            }
        });
    }
    RealField::new(rho.grid().clone(), acc)
}

/// One RK4 step of `d rho/dt = -div(rho v)` with frozen `v`.
pub fn continuity_step<T: Real>(v: &[RealField<T>], rho: &RealField<T>, dt: T) -> Result<RealField<T>> {
    check_advective(v, dt)?;
    rk4(rho, dt, |r| continuity_rhs(v, r))
}

fn rk4<T: Real>(y: &RealField<T>, dt: T, f: impl Fn(&RealField<T>) -> Result<RealField<T>>) -> Result<RealField<T>> {
    let half = dt * T::lit(0.5);
    let k1 = f(y)?;
    let k2 = f(&y.axpy(half, &k1)?)?;
    let k3 = f(&y.axpy(half, &k2)?)?;
    let k4 = f(&y.axpy(dt, &k3)?)?;
    let sixth = dt / T::lit(6.0);
    y.axpy(sixth, &k1)?
        .axpy(sixth + sixth, &k2)?
        .axpy(sixth + sixth, &k3)?
        .axpy(sixth, &k4)
}

/// One RK4 step of the coupled Hamilton-Jacobi and continuity equations.
pub fn hj_step<T: Real>(
    h: &ClassicalHamiltonian<T>,
    state: &ClassicalEnsembleState<T>,
    dt: T,
) -> Result<ClassicalEnsembleState<T>> {
    h.validate(state.s.grid().rank())?;
    let f = velocity_functional(h)?;
    let t0 = state.t;
    check_advective(&f.eval(&state.s, t0)?, dt)?;
    let rhs = |s: &RealField<T>, rho: &RealField<T>, t: T| -> Result<(RealField<T>, RealField<T>)> {
        if !s.all_finite() {
            return Err(Error::Caustic { time: t.as_f64() });
        }
        let ds = f.hamiltonian_field(s, t)?.scale(-T::one());
        let drho = continuity_rhs(&f.eval(s, t)?, rho)?;
        Ok((ds, drho))
    };
    let half = dt * T::lit(0.5);
    let (s0, r0) = (&state.s, &state.rho);
    let (k1s, k1r) = rhs(s0, r0, t0)?;
    let (k2s, k2r) = rhs(&s0.axpy(half, &k1s)?, &r0.axpy(half, &k1r)?, t0 + half)?;
    let (k3s, k3r) = rhs(&s0.axpy(half, &k2s)?, &r0.axpy(half, &k2r)?, t0 + half)?;
    let (k4s, k4r) = rhs(&s0.axpy(dt, &k3s)?, &r0.axpy(dt, &k3r)?, t0 + dt)?;
    let sixth = dt / T::lit(6.0);
    let combine = |y: &RealField<T>, a: &RealField<T>, b: &RealField<T>, c: &RealField<T>, d: &RealField<T>| {
        y.axpy(sixth, a)?.axpy(sixth + sixth, b)?.axpy(sixth + sixth, c)?.axpy(sixth, d)
    };
    let s = combine(s0, &k1s, &k2s, &k3s, &k4s)?;
    let rho = combine(r0, &k1r, &k2r, &k3r, &k4r)?;
    if !s.all_finite() || !rho.all_finite() {
        return Err(Error::Caustic { time: (t0 + dt).as_f64() });
    }
    Ok(ClassicalEnsembleState { s, rho, t: t0 + dt })
}

/// Advances `state` to `t_end` with steps no larger than `dt`.
pub fn hj_evolve<T: Real>(
    h: &ClassicalHamiltonian<T>,
    state: &ClassicalEnsembleState<T>,
    t_end: T,
    dt: T,
) -> Result<ClassicalEnsembleState<T>> {
    if !(dt > T::zero()) {
        return usage("time step must be positive");
    }
    let span = t_end - state.t;
    let steps = (span / dt).ceil().to_usize().unwrap_or(0).max(1);
    let step = span / T::count(steps);
    let mut cur = state.clone();
    for _ in 0..steps {
        cur = hj_step(h, &cur, step)?;
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::field::Axis;
    use crate::quantizer::EmParticle;

    fn periodic(n: usize) -> Arc<Grid<f64>> {
        Arc::new(Grid::<f64>::line(n, -8.0, 8.0, Boundary::Periodic).unwrap())
    }

    fn gaussian(g: &Arc<Grid<f64>>, c: f64, s: f64) -> RealField<f64> {
        RealField::from_fn(g.clone(), |q| {
            (-(q[0] - c).powi(2) / (2.0 * s * s)).exp() / (2.0 * std::f64::consts::PI * s * s).sqrt()
        })
        .unwrap()
    }

    #[test]
    fn zero_velocity_leaves_density_alone() {
        let g = periodic(64);
        let rho = gaussian(&g, 0.0, 1.0);
        let out = continuity_step(&[RealField::zeros(g)], &rho, 0.1).unwrap();
        assert_eq!(out, rho);
    }

    #[test]
    fn uniform_advection_translates_and_conserves_mass() {
        let g = periodic(256);
        let rho0 = gaussian(&g, -1.0, 1.0);
        let v = vec![RealField::from_fn(g.clone(), |_| 0.8).unwrap()];
        let dt = 0.02;
        let mut rho = rho0.clone();
        for _ in 0..100 {
            rho = continuity_step(&v, &rho, dt).unwrap();
            assert!((rho.integrate() - 1.0).abs() < 1e-10);
        }
        let want = gaussian(&g, 0.6, 1.0);
        assert!(rho.sub(&want).unwrap().sup_norm() < 1e-5);
    }

    #[test]
    fn oversized_step_is_a_stability_error() {
        let g = periodic(64);
        let v = vec![RealField::from_fn(g.clone(), |_| 10.0).unwrap()];
        let r = continuity_step(&v, &gaussian(&g, 0.0, 1.0), 0.1);
        assert!(matches!(r, Err(Error::Stability { .. })));
    }

    #[test]
    fn free_plane_wave_action_is_exact() {
        let g = Arc::new(Grid::<f64>::line(64, -5.0, 5.0, Boundary::Dirichlet).unwrap());
        let p0 = 1.3;
        let s = RealField::from_fn(g.clone(), |q| p0 * q[0]).unwrap();
        let rho = RealField::from_fn(g.clone(), |q| (-(q[0] * q[0]) * 2.0).exp()).unwrap();
        let rho = rho.scale(1.0 / rho.integrate());
        let st = ClassicalEnsembleState::new(s, rho, 0.0).unwrap();
        let h = ClassicalHamiltonian::EmParticle(EmParticle::free(1.0));
        let out = hj_evolve(&h, &st, 0.5, 0.01).unwrap();
        for i in 0..g.len() {
            let x = g.axis(0).coord(i);
            assert!((out.s.data()[i] - (p0 * x - p0 * p0 / 2.0 * 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn position_measurement_advects_action() {
        let g = Arc::new(
            Grid::new(vec![Axis::<f64>::dirichlet(32, -2.0, 2.0).unwrap(), Axis::<f64>::periodic(128, -8.0, 8.0).unwrap()]).unwrap(),
        );
        let s0 = |q1: f64, q2: f64| 0.3 * q1 + (-(q2 * q2) / 2.0).exp();
        let s = RealField::from_fn(g.clone(), |q| s0(q[0], q[1])).unwrap();
        let rho = RealField::from_fn(g.clone(), |_| 1.0 / 64.0).unwrap();
        let st = ClassicalEnsembleState::new(s, rho, 0.0).unwrap();
        let gc = 0.5;
        let out = hj_evolve(&ClassicalHamiltonian::<f64>::measure_position(gc), &st, 1.0, 0.02).unwrap();
        for i in 0..g.len() {
            let q = g.point(i);
            assert!((out.s.data()[i] - s0(q[0], q[1] - gc * q[0])).abs() < 2e-4);
        }
    }
}
