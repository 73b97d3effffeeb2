use crate::analytic::AnalyticFn;
use crate::error::{usage, Result};
use crate::scalar::Real;

/// Charged particle `|p - kappa A|^2 / 2m + e V` with `kappa = e / c`.
#[derive(Clone, Debug)]
pub struct EmParticle<T> {
    pub mass: T,
    pub charge: T,
    pub c_light: T,
    /// One component per configuration axis; empty means `A = 0`.
    pub vector_potential: Vec<AnalyticFn<T>>,
    pub scalar_potential: Option<AnalyticFn<T>>,
}

impl<T: Real> EmParticle<T> {
    pub fn free(mass: T) -> Self {
        Self {
            mass,
            charge: T::one(),
            c_light: T::one(),
            vector_potential: Vec::new(),
            scalar_potential: None,
        }
    }

    /// Unit-charge particle in the potential `V`.
    pub fn in_potential(mass: T, v: AnalyticFn<T>) -> Self {
        Self { scalar_potential: Some(v), ..Self::free(mass) }
    }

    /// Harmonic oscillator `p^2/2m + m w^2 |q - center|^2 / 2`.
    pub fn harmonic(mass: T, omega: T, center: Vec<T>) -> Self {
        Self::in_potential(mass, AnalyticFn::harmonic(mass * omega * omega, center))
    }

    #[inline]
    pub fn kappa(&self) -> T {
        self.charge / self.c_light
    }

    pub fn has_vector_potential(&self) -> bool {
        !self.vector_potential.is_empty()
    }

    fn potential_energy(&self, q: &[T], t: T) -> T {
        self.scalar_potential.as_ref().map_or(T::zero(), |v| self.charge * v.value(q, t))
    }

    fn kinetic_momentum(&self, q: &[T], p: &[T], t: T, k: usize) -> T {
        match self.vector_potential.get(k) {
            Some(a) => p[k] - self.kappa() * a.value(q, t),
            None => p[k],
        }
    }
}

/// Catalog of classical Hamiltonians `H(q, p, t)`.
///
/// Axis fields name the configuration coordinates each term acts on, so the
/// measurement couplings can be placed on any pair of axes of a larger grid.
#[derive(Clone, Debug)]
pub enum ClassicalHamiltonian<T> {
    EmParticle(EmParticle<T>),
    /// `B(q) p_axis^2`.
    PdmQuadratic { b: AnalyticFn<T>, axis: usize },
    /// `B(q) p_axis`.
    LinearDrift { b: AnalyticFn<T>, axis: usize },
    /// `c(q) p_axis^power`; only powers up to two have a quantization.
    MomentumPower { c: AnalyticFn<T>, power: u32, axis: usize },
    /// Pure potential `V(q, t)`.
    Potential { v: AnalyticFn<T> },
    /// `g p_system p_pointer`.
    MeasureMomentum { g: T, system: usize, pointer: usize },
    /// `g q_system p_pointer`.
    MeasurePosition { g: T, system: usize, pointer: usize },
    /// `g (x p_y - y p_x) p_pointer`.
    MeasureAngularZ { g: T, x: usize, y: usize, pointer: usize },
    /// `g B(q_system) p_system p_pointer`.
    MeasureLinearObservable { g: T, b: AnalyticFn<T>, system: usize, pointer: usize },
    Sum(Vec<(T, ClassicalHamiltonian<T>)>),
}

impl<T: Real> ClassicalHamiltonian<T> {
    pub fn measure_momentum(g: T) -> Self {
        Self::MeasureMomentum { g, system: 0, pointer: 1 }
    }

    pub fn measure_position(g: T) -> Self {
        Self::MeasurePosition { g, system: 0, pointer: 1 }
    }

    pub fn measure_angular_z(g: T) -> Self {
        Self::MeasureAngularZ { g, x: 0, y: 1, pointer: 2 }
    }

    pub fn measure_linear_observable(g: T, b: AnalyticFn<T>) -> Self {
        Self::MeasureLinearObservable { g, b, system: 0, pointer: 1 }
    }

    pub fn pdm(b: AnalyticFn<T>) -> Self {
        Self::PdmQuadratic { b, axis: 0 }
    }

    pub fn linear_drift(b: AnalyticFn<T>) -> Self {
        Self::LinearDrift { b, axis: 0 }
    }

    /// Short name of the catalog entry.
    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::EmParticle(_) => "em-particle",
            Self::PdmQuadratic { .. } => "pdm-quadratic",
            Self::LinearDrift { .. } => "linear-drift",
            Self::MomentumPower { .. } => "momentum-power",
            Self::Potential { .. } => "potential",
            Self::MeasureMomentum { .. } => "measure-momentum",
            Self::MeasurePosition { .. } => "measure-position",
            Self::MeasureAngularZ { .. } => "measure-angular-z",
            Self::MeasureLinearObservable { .. } => "measure-linear-observable",
            Self::Sum(_) => "sum",
        }
    }

    /// Number of configuration axes the Hamiltonian refers to, or `None` when
    /// it works on any rank (EM particle without vector potential, potentials).
    pub fn min_rank(&self) -> usize {
        match self {
            Self::EmParticle(em) => em.vector_potential.len().max(1),
            Self::PdmQuadratic { axis, .. } | Self::LinearDrift { axis, .. } | Self::MomentumPower { axis, .. } => {
                axis + 1
            }
            Self::Potential { .. } => 1,
            Self::MeasureMomentum { system, pointer, .. }
            | Self::MeasurePosition { system, pointer, .. }
            | Self::MeasureLinearObservable { system, pointer, .. } => system.max(pointer) + 1,
            Self::MeasureAngularZ { x, y, pointer, .. } => x.max(y).max(pointer) + 1,
            Self::Sum(terms) => terms.iter().map(|(_, h)| h.min_rank()).max().unwrap_or(1),
        }
    }

    pub fn validate(&self, rank: usize) -> Result<()> {
        match self {
            Self::EmParticle(em) => {
                if !(em.mass > T::zero()) {
                    return usage("mass must be positive");
                }
                if !(em.c_light > T::zero()) {
                    return usage("speed of light must be positive");
                }
                if em.has_vector_potential() && em.vector_potential.len() != rank {
                    return usage(format!(
                        "vector potential has {} components for a rank-{rank} grid",
                        em.vector_potential.len()
                    ));
                }
            }
            Self::MeasureMomentum { g, system, pointer }
            | Self::MeasurePosition { g, system, pointer }
            | Self::MeasureLinearObservable { g, system, pointer, .. } => {
                if system == pointer {
                    return usage("system and pointer axes must differ");
                }
                if !g.is_finite() {
                    return usage("coupling must be finite");
                }
            }
            Self::MeasureAngularZ { x, y, pointer, .. } => {
                if x == y || x == pointer || y == pointer {
                    return usage("angular coupling needs three distinct axes");
                }
            }
            Self::Sum(terms) => {
                if terms.is_empty() {
                    return usage("empty Hamiltonian sum");
                }
                for (c, h) in terms {
                    if !c.is_finite() {
                        return usage("sum coefficients must be finite reals");
                    }
                    h.validate(rank)?;
                }
            }
            _ => {}
        }
        if self.min_rank() > rank {
            return usage(format!(
                "{} Hamiltonian needs at least {} axes, grid has {rank}",
                self.kind_name(),
                self.min_rank()
            ));
        }
        Ok(())
    }

    /// `H(q, p, t)`.
    pub fn value(&self, q: &[T], p: &[T], t: T) -> T {
        match self {
            Self::EmParticle(em) => {
                let two_m = em.mass + em.mass;
                let kin: T = (0..q.len())
                    .map(|k| {
                        let pk = em.kinetic_momentum(q, p, t, k);
                        pk * pk
                    })
                    .sum();
                kin / two_m + em.potential_energy(q, t)
            }
            Self::PdmQuadratic { b, axis } => b.value(q, t) * p[*axis] * p[*axis],
            Self::LinearDrift { b, axis } => b.value(q, t) * p[*axis],
            Self::MomentumPower { c, power, axis } => c.value(q, t) * p[*axis].powi(*power as i32),
            Self::Potential { v } => v.value(q, t),
            Self::MeasureMomentum { g, system, pointer } => *g * p[*system] * p[*pointer],
            Self::MeasurePosition { g, system, pointer } => *g * q[*system] * p[*pointer],
            Self::MeasureAngularZ { g, x, y, pointer } => *g * (q[*x] * p[*y] - q[*y] * p[*x]) * p[*pointer],
            Self::MeasureLinearObservable { g, b, system, pointer } => *g * b.value(q, t) * p[*system] * p[*pointer],
            Self::Sum(terms) => terms.iter().map(|(c, h)| *c * h.value(q, p, t)).sum(),
        }
    }

    /// Velocity `dH/dp` at `(q, p, t)`, accumulated into `out` with weight `w`.
    pub fn accumulate_velocity(&self, q: &[T], p: &[T], t: T, w: T, out: &mut [T]) {
        match self {
            Self::EmParticle(em) => {
                for (k, o) in out.iter_mut().enumerate() {
                    *o += w * em.kinetic_momentum(q, p, t, k) / em.mass;
                }
            }
            Self::PdmQuadratic { b, axis } => out[*axis] += w * T::lit(2.0) * b.value(q, t) * p[*axis],
            Self::LinearDrift { b, axis } => out[*axis] += w * b.value(q, t),
            Self::MomentumPower { c, power, axis } => {
                if *power > 0 {
                    out[*axis] += w * c.value(q, t) * T::count(*power as usize) * p[*axis].powi(*power as i32 - 1);
                }
            }
            Self::Potential { .. } => {}
            Self::MeasureMomentum { g, system, pointer } => {
                out[*system] += w * *g * p[*pointer];
                out[*pointer] += w * *g * p[*system];
            }
            Self::MeasurePosition { g, system, pointer } => out[*pointer] += w * *g * q[*system],
            Self::MeasureAngularZ { g, x, y, pointer } => {
                let lz = q[*x] * p[*y] - q[*y] * p[*x];
                out[*x] -= w * *g * q[*y] * p[*pointer];
                out[*y] += w * *g * q[*x] * p[*pointer];
                out[*pointer] += w * *g * lz;
            }
            Self::MeasureLinearObservable { g, b, system, pointer } => {
                let gb = *g * b.value(q, t);
                out[*system] += w * gb * p[*pointer];
                out[*pointer] += w * gb * p[*system];
            }
            Self::Sum(terms) => {
                for (c, h) in terms {
                    h.accumulate_velocity(q, p, t, w * *c, out);
                }
            }
        }
    }

    /// Whether the velocity depends on the momentum (and hence on `S`).
    pub fn depends_on_momentum(&self) -> bool {
        match self {
            Self::EmParticle(_) | Self::PdmQuadratic { .. } | Self::MeasureMomentum { .. } => true,
            Self::MeasureAngularZ { .. } | Self::MeasureLinearObservable { .. } => true,
            Self::MomentumPower { power, .. } => *power >= 2,
            Self::LinearDrift { .. } | Self::Potential { .. } | Self::MeasurePosition { .. } => false,
            Self::Sum(terms) => terms.iter().any(|(c, h)| *c != T::zero() && h.depends_on_momentum()),
        }
    }

    /// Largest mass-like denominator for diffusive step limits: returns `m` for
    /// EM particles, `None` otherwise.
    pub fn mass(&self) -> Option<T> {
        match self {
            Self::EmParticle(em) => Some(em.mass),
            Self::Sum(terms) => terms.iter().find_map(|(_, h)| h.mass()),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn em_value_and_velocity() {
        let mut em = EmParticle::in_potential(2.0, AnalyticFn::constant(0.5));
        em.charge = 3.0;
        em.c_light = 1.5;
        em.vector_potential = vec![AnalyticFn::constant(1.0)];
        let h = ClassicalHamiltonian::EmParticle(em);
        let (q, p) = ([0.0], [4.0]);
        // kappa = 2, kinetic momentum = 2
        assert_eq!(h.value(&q, &p, 0.0), 4.0 / 4.0 + 1.5);
        let mut v = [0.0];
        h.accumulate_velocity(&q, &p, 0.0, 1.0, &mut v);
        assert_eq!(v, [1.0]);
    }

    #[test]
    fn angular_velocity_is_derivative_of_value() {
        let h = ClassicalHamiltonian::<f64>::measure_angular_z(0.7);
        let q = [0.3, -1.1, 0.4];
        let p = [0.9, 0.2, -1.3];
        let mut v = [0.0; 3];
        h.accumulate_velocity(&q, &p, 0.0, 1.0, &mut v);
        for k in 0..3 {
            let mut pp = p;
            let e = 1e-6_f64;
            pp[k] += e;
            let up = h.value(&q, &pp, 0.0);
            pp[k] -= 2.0 * e;
            let down = h.value(&q, &pp, 0.0);
            assert!(((up - down) / (2.0 * e) - v[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn rank_and_axis_validation() {
        assert!(ClassicalHamiltonian::<f64>::measure_angular_z(1.0).validate(2).is_err());
        assert!(ClassicalHamiltonian::<f64>::measure_position(1.0).validate(2).is_ok());
        let bad = ClassicalHamiltonian::<f64>::MeasurePosition { g: 1.0, system: 1, pointer: 1 };
        assert!(bad.validate(2).is_err());
        assert!(ClassicalHamiltonian::EmParticle(EmParticle::free(-1.0)).validate(1).is_err());
    }
}
