use std::borrow::Cow;
use std::fmt;
use std::sync::Arc;

use num_traits::Zero;

use super::hamiltonian::{ClassicalHamiltonian, EmParticle};
use crate::analytic::AnalyticFn;
use crate::error::{usage, Error, Result};
use crate::field::{gradient_with, Boundary, ComplexField, EdgeRule, Grid};
use crate::scalar::{Cplx, Real};

type ApplyFn<T> = dyn Fn(&ComplexField<T>, T) -> ComplexField<T> + Send + Sync;

/// Discretized Hermitian operator acting on complex fields over one grid.
///
/// Momentum is `-i hbar D` with `D` the zero-ghost fourth-order difference;
/// outputs vanish on dirichlet boundary nodes. On the interior nodes every
/// catalog operator is then an exactly Hermitian matrix.
#[derive(Clone)]
pub struct QuantumOperator<T: Real> {
    descriptor: String,
    hermitian: bool,
    time_dependent: bool,
    grid: Arc<Grid<T>>,
    apply: Arc<ApplyFn<T>>,
}

impl<T: Real> fmt::Debug for QuantumOperator<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QuantumOperator")
            .field("descriptor", &self.descriptor)
            .field("hermitian", &self.hermitian)
            .finish()
    }
}

impl<T: Real> QuantumOperator<T> {
    pub fn from_fn(
        descriptor: impl Into<String>,
        hermitian: bool,
        time_dependent: bool,
        grid: Arc<Grid<T>>,
        apply: impl Fn(&ComplexField<T>, T) -> ComplexField<T> + Send + Sync + 'static,
    ) -> Self {
        Self { descriptor: descriptor.into(), hermitian, time_dependent, grid, apply: Arc::new(apply) }
    }

    /// Normal-form ordering string, e.g. `p·B(q)·p`.
    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn is_time_dependent(&self) -> bool {
        self.time_dependent
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn apply(&self, psi: &ComplexField<T>) -> Result<ComplexField<T>> {
        self.apply_at(psi, T::zero())
    }

    pub fn apply_at(&self, psi: &ComplexField<T>, t: T) -> Result<ComplexField<T>> {
        if *psi.grid().as_ref() != *self.grid {
            return usage("operator and field live on different grids");
        }
        Ok((self.apply)(psi, t))
    }

    pub(crate) fn apply_unchecked(&self, psi: &ComplexField<T>, t: T) -> ComplexField<T> {
        (self.apply)(psi, t)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        let (a, b) = (self.apply.clone(), other.apply.clone());
        Self::from_fn(
            format!("{}·{}", self.descriptor, other.descriptor),
            false,
            self.time_dependent || other.time_dependent,
            self.grid.clone(),
            move |psi, t| a(&b(psi, t), t),
        )
    }

    pub fn plus(&self, other: &Self) -> Self {
        let (a, b) = (self.apply.clone(), other.apply.clone());
        Self::from_fn(
            format!("{} + {}", self.descriptor, other.descriptor),
            self.hermitian && other.hermitian,
            self.time_dependent || other.time_dependent,
            self.grid.clone(),
            move |psi, t| add(&a(psi, t), &b(psi, t)),
        )
    }

    pub fn scaled(&self, s: T) -> Self {
        let a = self.apply.clone();
        Self::from_fn(
            format!("{s}·({})", self.descriptor),
            self.hermitian,
            self.time_dependent,
            self.grid.clone(),
            move |psi, t| a(psi, t).scale(s),
        )
    }
}

fn add<T: Real>(a: &ComplexField<T>, b: &ComplexField<T>) -> ComplexField<T> {
    a.add(b).expect("same grid")
}

/// `-i hbar D_axis psi` with zero-ghost edges.
pub fn momentum<T: Real>(psi: &ComplexField<T>, axis: usize, hbar: T) -> ComplexField<T> {
    gradient_with(psi, axis, EdgeRule::ZeroGhost)
        .expect("axis validated")
        .map(|z| Cplx::new(z.im * hbar, -z.re * hbar))
}

/// Pointwise real coefficient, sampled once when it does not depend on time.
#[derive(Clone)]
pub(crate) enum Coeff<T: Real> {
    Static(Arc<Vec<T>>),
    Dynamic(AnalyticFn<T>, Arc<Grid<T>>),
}

impl<T: Real> Coeff<T> {
    pub(crate) fn new(f: &AnalyticFn<T>, grid: &Arc<Grid<T>>) -> Self {
        if f.is_time_dependent() {
            Coeff::Dynamic(f.clone(), grid.clone())
        } else {
            Coeff::Static(Arc::new(sample(f, grid, T::zero())))
        }
    }

    pub(crate) fn values(&self, t: T) -> Cow<'_, [T]> {
        match self {
            Coeff::Static(v) => Cow::Borrowed(v.as_slice()),
            Coeff::Dynamic(f, grid) => Cow::Owned(sample(f, grid, t)),
        }
    }
}

fn sample<T: Real>(f: &AnalyticFn<T>, grid: &Grid<T>, t: T) -> Vec<T> {
    let mut q = Vec::with_capacity(grid.rank());
    (0..grid.len())
        .map(|i| {
            grid.point_into(i, &mut q);
            f.value(&q, t)
        })
        .collect()
}

fn coordinate<T: Real>(grid: &Grid<T>, axis: usize) -> Vec<T> {
    (0..grid.len()).map(|i| grid.axis(axis).coord((i / grid.strides()[axis]) % grid.axis(axis).len())).collect()
}

fn times<T: Real>(psi: &ComplexField<T>, c: &[T]) -> ComplexField<T> {
    let data = psi.data().iter().zip(c).map(|(z, &v)| z * v).collect();
    ComplexField::from_parts(psi.grid().clone(), data)
}

/// Indices of dirichlet boundary nodes of `grid`.
pub(crate) fn boundary_nodes<T: Real>(grid: &Grid<T>) -> Vec<usize> {
    (0..grid.len())
        .filter(|&i| {
            grid.axes().iter().zip(grid.strides()).any(|(a, s)| {
                let j = (i / s) % a.len();
                a.boundary() == Boundary::Dirichlet && (j == 0 || j + 1 == a.len())
            })
        })
        .collect()
}

fn project<T: Real>(mut psi: ComplexField<T>, boundary: &[usize]) -> ComplexField<T> {
    let data = psi.data_mut();
    for &i in boundary {
        data[i] = Cplx::zero();
    }
    psi
}

struct Built<T: Real> {
    descriptor: String,
    time_dependent: bool,
    apply: Arc<ApplyFn<T>>,
}

const CUBIC_CAVEAT: &str = "momentum dependence beyond quadratic order has no unique Hermitian ordering under the \
     replacement rules; the hidden-variable scheme does not quantize B(q)p^n for n >= 3";

fn build<T: Real>(h: &ClassicalHamiltonian<T>, grid: &Arc<Grid<T>>, hbar: T) -> Result<Built<T>> {
    use ClassicalHamiltonian as H;
    let built = match h {
        H::EmParticle(em) => build_em(em, grid, hbar),
        H::PdmQuadratic { b, axis } => {
            let axis = *axis;
            let descriptor = if b.as_constant().is_some() { "p²/2m".to_string() } else { "p·B(q)·p".to_string() };
            let c = Coeff::new(b, grid);
            Built {
                descriptor,
                time_dependent: b.is_time_dependent(),
                apply: Arc::new(move |psi: &ComplexField<T>, t| {
                    let inner = times(&momentum(psi, axis, hbar), &c.values(t));
                    momentum(&inner, axis, hbar)
                }),
            }
        }
        H::LinearDrift { b, axis } => {
            let axis = *axis;
            let descriptor = match b.as_constant() {
                Some(c) if c == T::one() => "p".to_string(),
                Some(_) => "B·p".to_string(),
                None => "(B(q)·p+p·B(q))/2".to_string(),
            };
            let c = Coeff::new(b, grid);
            Built {
                descriptor,
                time_dependent: b.is_time_dependent(),
                apply: Arc::new(move |psi: &ComplexField<T>, t| symmetric_drift(psi, &c.values(t), axis, hbar)),
            }
        }
        H::MomentumPower { c, power, axis } => match power {
            0 => build(&H::Potential { v: c.clone() }, grid, hbar)?,
            1 => build(&H::LinearDrift { b: c.clone(), axis: *axis }, grid, hbar)?,
            2 => build(&H::PdmQuadratic { b: c.clone(), axis: *axis }, grid, hbar)?,
            n => return Err(Error::UnsupportedHamiltonian(format!("c(q)·p^{n}: {CUBIC_CAVEAT}"))),
        },
        H::Potential { v } => {
            let c = Coeff::new(v, grid);
            Built {
                descriptor: "V(q)".into(),
                time_dependent: v.is_time_dependent(),
                apply: Arc::new(move |psi: &ComplexField<T>, t| times(psi, &c.values(t))),
            }
        }
        H::MeasureMomentum { g, system, pointer } => {
            let (g, s, p) = (*g, *system, *pointer);
            Built {
                descriptor: "g·p₁·p₂".into(),
                time_dependent: false,
                apply: Arc::new(move |psi: &ComplexField<T>, _| {
                    momentum(&momentum(psi, p, hbar), s, hbar).scale(g)
                }),
            }
        }
        H::MeasurePosition { g, system, pointer } => {
            let (g, p) = (*g, *pointer);
            let q1 = coordinate(grid, *system);
            Built {
                descriptor: "g·q₁·p₂".into(),
                time_dependent: false,
                apply: Arc::new(move |psi: &ComplexField<T>, _| times(&momentum(psi, p, hbar), &q1).scale(g)),
            }
        }
        H::MeasureAngularZ { g, x, y, pointer } => {
            let (g, xa, ya, p) = (*g, *x, *y, *pointer);
            let (qx, qy) = (coordinate(grid, xa), coordinate(grid, ya));
            Built {
                descriptor: "g·L_z·p₂".into(),
                time_dependent: false,
                apply: Arc::new(move |psi: &ComplexField<T>, _| {
                    let phi = momentum(psi, p, hbar);
                    let lz = times(&momentum(&phi, ya, hbar), &qx)
                        .sub(&times(&momentum(&phi, xa, hbar), &qy))
                        .expect("same grid");
                    lz.scale(g)
                }),
            }
        }
        H::MeasureLinearObservable { g, b, system, pointer } => {
            let (g, s, p) = (*g, *system, *pointer);
            let c = Coeff::new(b, grid);
            Built {
                descriptor: "g·(B(q₁)·p₁+p₁·B(q₁))/2·p₂".into(),
                time_dependent: b.is_time_dependent(),
                apply: Arc::new(move |psi: &ComplexField<T>, t| {
                    symmetric_drift(&momentum(psi, p, hbar), &c.values(t), s, hbar).scale(g)
                }),
            }
        }
        H::Sum(terms) => {
            let parts = terms
                .iter()
                .map(|(c, h)| build(h, grid, hbar).map(|b| (*c, b)))
                .collect::<Result<Vec<_>>>()?;
            let descriptor = parts
                .iter()
                .map(|(c, b)| if *c == T::one() { b.descriptor.clone() } else { format!("{c}·({})", b.descriptor) })
                .collect::<Vec<_>>()
                .join(" + ");
            let time_dependent = parts.iter().any(|(_, b)| b.time_dependent);
            let applies: Vec<(T, Arc<ApplyFn<T>>)> = parts.into_iter().map(|(c, b)| (c, b.apply)).collect();
            let grid = grid.clone();
            Built {
                descriptor,
                time_dependent,
                apply: Arc::new(move |psi: &ComplexField<T>, t| {
                    let mut acc = ComplexField::zeros(grid.clone());
                    for (c, f) in &applies {
                        acc = acc.axpy(*c, &f(psi, t)).expect("same grid");
                    }
                    acc
                }),
            }
        }
    };
    Ok(built)
}

/// `(B p + p B) / 2` applied to `psi`.
fn symmetric_drift<T: Real>(psi: &ComplexField<T>, b: &[T], axis: usize, hbar: T) -> ComplexField<T> {
    let left = times(&momentum(psi, axis, hbar), b);
    let right = momentum(&times(psi, b), axis, hbar);
    left.add(&right).expect("same grid").scale(T::lit(0.5))
}

fn build_em<T: Real>(em: &EmParticle<T>, grid: &Arc<Grid<T>>, hbar: T) -> Built<T> {
    let rank = grid.rank();
    let kappa = em.kappa();
    let inv_2m = (em.mass + em.mass).recip();
    let a: Vec<Coeff<T>> = em.vector_potential.iter().map(|f| Coeff::new(f, grid)).collect();
    let v = em.scalar_potential.as_ref().map(|f| (Coeff::new(f, grid), em.charge));
    let mut descriptor = if a.is_empty() { "p²/2m".to_string() } else { "(p−κA)²/2m".to_string() };
    if v.is_some() {
        descriptor.push_str(" + eV(q)");
    }
    let time_dependent = em.vector_potential.iter().any(AnalyticFn::is_time_dependent)
        || em.scalar_potential.as_ref().is_some_and(AnalyticFn::is_time_dependent);
    let apply = move |psi: &ComplexField<T>, t: T| {
        let mut acc = ComplexField::zeros(psi.grid().clone());
        for k in 0..rank {
            let ak = a.get(k).map(|c| c.values(t));
            let pi = |f: &ComplexField<T>| {
                let pf = momentum(f, k, hbar);
                match &ak {
                    Some(ak) => pf.axpy(-kappa, &times(f, ak)).expect("same grid"),
                    None => pf,
                }
            };
            acc = acc.axpy(inv_2m, &pi(&pi(psi))).expect("same grid");
        }
        if let Some((vc, e)) = &v {
            acc = acc.axpy(*e, &times(psi, &vc.values(t))).expect("same grid");
        }
        acc
    };
    Built { descriptor, time_dependent, apply: Arc::new(apply) }
}

/// Maps a catalog Hamiltonian to its unique Hermitian operator on `grid`.
pub fn quantize<T: Real>(h: &ClassicalHamiltonian<T>, grid: &Arc<Grid<T>>, hbar: T) -> Result<QuantumOperator<T>> {
    if !(hbar > T::zero()) {
        return usage("hbar must be positive");
    }
    h.validate(grid.rank())?;
    let built = build(h, grid, hbar)?;
    let boundary = Arc::new(boundary_nodes(grid));
    let inner = built.apply;
    Ok(QuantumOperator::from_fn(built.descriptor, true, built.time_dependent, grid.clone(), move |psi, t| {
        project(inner(psi, t), &boundary)
    }))
}

/// Normalization tolerance accepted by [`expectation`].
pub const NORM_TOLERANCE: f64 = 1e-6;
/// Largest imaginary part of an expectation value accepted as round-off.
pub const HERMITICITY_TOLERANCE: f64 = 1e-8;

/// `Re <psi, H psi>` at `t = 0`.
pub fn expectation<T: Real>(op: &QuantumOperator<T>, psi: &ComplexField<T>) -> Result<T> {
    expectation_at(op, psi, T::zero())
}

pub fn expectation_at<T: Real>(op: &QuantumOperator<T>, psi: &ComplexField<T>, t: T) -> Result<T> {
    let norm2 = psi.norm_sqr().integrate();
    if (norm2 - T::one()).abs().as_f64() > NORM_TOLERANCE {
        return usage(format!("wavefunction norm² is {norm2}, expected 1"));
    }
    let z = psi.inner(&op.apply_at(psi, t)?)?;
    if z.im.abs().as_f64() > HERMITICITY_TOLERANCE {
        return Err(Error::HermiticityViolation { imaginary: z.im.as_f64() });
    }
    Ok(z.re)
}

/// `|<phi, H psi> - <H phi, psi>| / (|phi| |psi|)`.
pub fn hermiticity_defect<T: Real>(op: &QuantumOperator<T>, phi: &ComplexField<T>, psi: &ComplexField<T>) -> Result<T> {
    let lhs = phi.inner(&op.apply(psi)?)?;
    let rhs = op.apply(phi)?.inner(psi)?;
    Ok((lhs - rhs).norm() / (phi.norm() * psi.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Arc<Grid<f64>> {
        Arc::new(Grid::line(n, -6.0, 6.0, Boundary::Dirichlet).unwrap())
    }

    fn packet(g: &Arc<Grid<f64>>, k0: f64, sigma: f64) -> ComplexField<f64> {
        ComplexField::from_fn(g.clone(), |q| {
            Cplx::new(0.0, k0 * q[0]).exp() * (-(q[0] * q[0]) / (4.0 * sigma * sigma)).exp()
        })
        .unwrap()
        .normalized()
        .unwrap()
    }

    #[test]
    fn constant_mass_descriptor_and_identity() {
        let op = quantize(&ClassicalHamiltonian::pdm(AnalyticFn::constant(0.5)), &grid(64), 1.0).unwrap();
        assert_eq!(op.descriptor(), "p²/2m");
        let lin = quantize(&ClassicalHamiltonian::linear_drift(AnalyticFn::constant(1.0)), &grid(64), 1.0).unwrap();
        assert_eq!(lin.descriptor(), "p");
    }

    #[test]
    fn cubic_momentum_is_rejected() {
        let h = ClassicalHamiltonian::MomentumPower { c: AnalyticFn::polynomial(0, vec![0.0, 1.0]), power: 3, axis: 0 };
        match quantize(&h, &grid(32), 1.0) {
            Err(Error::UnsupportedHamiltonian(msg)) => assert!(msg.contains("n >= 3")),
            other => panic!("expected unsupported hamiltonian, got {other:?}"),
        }
    }

    #[test]
    fn free_packet_energy() {
        let g = grid(1024);
        let (k0, sigma) = (1.5, 0.8);
        let op = quantize(&ClassicalHamiltonian::EmParticle(EmParticle::free(1.0)), &g, 1.0).unwrap();
        let e = expectation(&op, &packet(&g, k0, sigma)).unwrap();
        // <p^2>/2 for a Gaussian with position width sigma
        let want = (k0 * k0 + 1.0 / (4.0 * sigma * sigma)) / 2.0;
        assert!((e - want).abs() < 1e-6, "{e} vs {want}");
    }

    #[test]
    fn real_gaussian_has_zero_mean_momentum() {
        let g = grid(256);
        let op = quantize(&ClassicalHamiltonian::linear_drift(AnalyticFn::constant(1.0)), &g, 1.0).unwrap();
        assert!(expectation(&op, &packet(&g, 0.0, 0.7)).unwrap().abs() < 1e-14);
    }

    #[test]
    fn rejects_unnormalized_input() {
        let g = grid(64);
        let op = quantize(&ClassicalHamiltonian::pdm(AnalyticFn::constant(0.5)), &g, 1.0).unwrap();
        let psi = packet(&g, 0.0, 1.0).scale(2.0);
        assert!(matches!(expectation(&op, &psi), Err(Error::Usage(_))));
    }
}
