use super::hamiltonian::ClassicalHamiltonian;
use crate::error::{usage, Result};
use crate::field::{gradient, RealField};
use crate::scalar::Real;

/// The velocity field `f(q, dS/dq, t) = dH/dp` of a classical Hamiltonian.
#[derive(Clone, Debug)]
pub struct VelocityFunctional<T: Real> {
    hamiltonian: ClassicalHamiltonian<T>,
}

/// Builds the velocity functional of `h`.
pub fn velocity_functional<T: Real>(h: &ClassicalHamiltonian<T>) -> Result<VelocityFunctional<T>> {
    if let ClassicalHamiltonian::Sum(terms) = h {
        if terms.is_empty() {
            return usage("empty Hamiltonian sum");
        }
    }
    Ok(VelocityFunctional { hamiltonian: h.clone() })
}

impl<T: Real> VelocityFunctional<T> {
    pub fn hamiltonian(&self) -> &ClassicalHamiltonian<T> {
        &self.hamiltonian
    }

    /// Velocity at a single phase-space point.
    pub fn at(&self, q: &[T], p: &[T], t: T, out: &mut [T]) {
        out.iter_mut().for_each(|v| *v = T::zero());
        self.hamiltonian.accumulate_velocity(q, p, t, T::one(), out);
    }

    /// Whether `f` reads the action gradient at all.
    pub fn depends_on_action(&self) -> bool {
        self.hamiltonian.depends_on_momentum()
    }

    /// Velocity fields for given momentum fields `p_k(q)`.
    pub fn from_momentum(&self, p: &[RealField<T>], t: T) -> Result<Vec<RealField<T>>> {
        let first = p.first().ok_or_else(|| crate::Error::Usage("no momentum fields".into()))?;
        let grid = first.grid().clone();
        let rank = grid.rank();
        if p.len() != rank {
            return usage(format!("{} momentum fields for a rank-{rank} grid", p.len()));
        }
        for pk in p {
            first.check_grid(pk)?;
        }
        let mut out: Vec<Vec<T>> = vec![vec![T::zero(); grid.len()]; rank];
        let mut q = Vec::with_capacity(rank);
        let mut pv = vec![T::zero(); rank];
        let mut v = vec![T::zero(); rank];
        for i in 0..grid.len() {
            grid.point_into(i, &mut q);
            for k in 0..rank {
                pv[k] = p[k].data()[i];
            }
            self.at(&q, &pv, t, &mut v);
            for k in 0..rank {
                out[k][i] = v[k];
            }
        }
        out.into_iter().map(|d| RealField::new(grid.clone(), d)).collect()
    }

    /// `f(q, dS/dq, t)` with one-sided differences at dirichlet edges.
    pub fn eval(&self, s: &RealField<T>, t: T) -> Result<Vec<RealField<T>>> {
        let p = (0..s.grid().rank()).map(|k| gradient(s, k)).collect::<Result<Vec<_>>>()?;
        self.from_momentum(&p, t)
    }

    /// `sum_k d f_k / d q_k` evaluated on `S`.
    pub fn divergence(&self, s: &RealField<T>, t: T) -> Result<RealField<T>> {
        let v = self.eval(s, t)?;
        let mut acc = RealField::zeros(s.grid().clone());
        for (k, vk) in v.iter().enumerate() {
            acc = acc.add(&gradient(vk, k)?)?;
        }
        Ok(acc)
    }

    /// `H(q, dS/dq, t)` at every node.
    pub fn hamiltonian_field(&self, s: &RealField<T>, t: T) -> Result<RealField<T>> {
        let grid = s.grid().clone();
        let p = (0..grid.rank()).map(|k| gradient(s, k)).collect::<Result<Vec<_>>>()?;
        let mut pv = vec![T::zero(); grid.rank()];
        let mut q = Vec::with_capacity(grid.rank());
        let data = (0..grid.len())
            .map(|i| {
                grid.point_into(i, &mut q);
                for (k, pk) in p.iter().enumerate() {
                    pv[k] = pk.data()[i];
                }
                self.hamiltonian.value(&q, &pv, t)
            })
            .collect();
        RealField::new(grid, data)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::analytic::AnalyticFn;
    use crate::field::{Axis, Boundary, Grid};
    use crate::quantizer::EmParticle;

    fn line() -> Arc<Grid<f64>> {
        Arc::new(Grid::line(64, -4.0, 4.0, Boundary::Dirichlet).unwrap())
    }

    #[test]
    fn free_particle_plane_wave_velocity() {
        let s = RealField::from_fn(line(), |q| 1.7 * q[0]).unwrap();
        let f = velocity_functional(&ClassicalHamiltonian::EmParticle(EmParticle::free(2.0))).unwrap();
        let v = f.eval(&s, 0.0).unwrap();
        assert!(v[0].data().iter().all(|&x| (x - 0.85).abs() < 1e-12));
        let pdm = velocity_functional(&ClassicalHamiltonian::pdm(AnalyticFn::constant(0.25))).unwrap();
        let w = pdm.eval(&s, 0.0).unwrap();
        assert!(w[0].data().iter().all(|&x| (x - 0.85).abs() < 1e-12));
    }

    #[test]
    fn position_measurement_ignores_action() {
        let g = Arc::new(
            Grid::new(vec![Axis::dirichlet(16, -1.0, 1.0).unwrap(), Axis::dirichlet(17, -2.0, 2.0).unwrap()]).unwrap(),
        );
        let s = RealField::from_fn(g, |q| q[0] * q[0] * q[1]).unwrap();
        let f = velocity_functional(&ClassicalHamiltonian::measure_position(3.0)).unwrap();
        assert!(!f.depends_on_action());
        let v = f.eval(&s, 0.0).unwrap();
        for i in 0..s.len() {
            let q = s.grid().point(i);
            assert_eq!(v[0].data()[i], 0.0);
            assert_eq!(v[1].data()[i], 3.0 * q[0]);
        }
    }

    #[test]
    fn sum_is_weighted_sum_of_members() {
        let a = ClassicalHamiltonian::EmParticle(EmParticle::free(1.0));
        let b = ClassicalHamiltonian::linear_drift(AnalyticFn::polynomial(0, vec![0.5, 1.0]));
        let sum = ClassicalHamiltonian::Sum(vec![(0.3, a.clone()), (-2.0, b.clone())]);
        let s = RealField::from_fn(line(), |q| (q[0]).sin()).unwrap();
        let vs = velocity_functional(&sum).unwrap().eval(&s, 0.0).unwrap();
        let va = velocity_functional(&a).unwrap().eval(&s, 0.0).unwrap();
        let vb = velocity_functional(&b).unwrap().eval(&s, 0.0).unwrap();
        for i in 0..s.len() {
            let want = 0.3 * va[0].data()[i] - 2.0 * vb[0].data()[i];
            assert!((vs[0].data()[i] - want).abs() < 1e-14);
        }
    }
}
