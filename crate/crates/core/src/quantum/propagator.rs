use std::sync::{Arc, Mutex};

use num_traits::Zero;

use super::linsolve::{bicgstab, probe_band, BandedLu};
use crate::error::{usage, Error, Result};
use crate::field::{Boundary, ComplexField, Grid};
use crate::quantizer::{quantize, ClassicalHamiltonian, QuantumOperator, NORM_TOLERANCE};
use crate::scalar::{Cplx, Real};
use crate::spectral::AxisFft;

/// Half bandwidth probed for 1-D operators: `D∘D` with a fourth-order `D`
/// couples nodes up to four apart.
const PROBE_BANDWIDTH: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PropagatorKind {
    CrankNicolson,
    ExactSpectral,
}

/// One-step time evolution `psi(t) -> psi(t + dt)` for a fixed Hamiltonian.
#[derive(Debug)]
pub struct Propagator<T: Real> {
    grid: Arc<Grid<T>>,
    hbar: T,
    engine: Engine<T>,
}

#[derive(Debug)]
enum Engine<T: Real> {
    Cn(CrankNicolson<T>),
    Spectral { fft: AxisFft<T>, phase: Phase<T> },
}

#[derive(Debug)]
struct CrankNicolson<T: Real> {
    op: QuantumOperator<T>,
    band: Option<Vec<Cplx<T>>>,
    lu: Mutex<Option<(T, Arc<BandedLu<T>>)>>,
}

/// Diagonal phase tables in the Fourier basis.
#[derive(Clone, Copy, Debug)]
enum Phase<T> {
    /// `exp(-i hbar |k|^2 t / 2m)`.
    Free { mass: T },
    /// `exp(-i g hbar k_a k_b t)` for `g p_a p_b`.
    Product { g: T, a: usize, b: usize },
    /// `exp(-i g q_s k_p t)` for `g q_s p_p`.
    Shear { g: T, system: usize, pointer: usize },
}

impl<T: Real> Propagator<T> {
    /// Crank-Nicolson propagator for any quantized operator.
    pub fn crank_nicolson(op: QuantumOperator<T>, hbar: T) -> Result<Self> {
        if !op.is_hermitian() {
            return usage(format!("operator {} is not Hermitian", op.descriptor()));
        }
        let grid = op.grid().clone();
        let band = if grid.rank() == 1
            && grid.axis(0).boundary() == Boundary::Dirichlet
            && !op.is_time_dependent()
            && grid.len() > 2 * PROBE_BANDWIDTH
        {
            let g = grid.clone();
            let o = op.clone();
            probe_band(grid.len(), PROBE_BANDWIDTH, move |x| {
                o.apply_unchecked(&ComplexField::from_parts(g.clone(), x.to_vec()), T::zero()).into_data()
            })
        } else {
            None
        };
        Ok(Self { grid, hbar, engine: Engine::Cn(CrankNicolson { op, band, lu: Mutex::new(None) }) })
    }

    /// Builds a propagator of the requested kind for a catalog Hamiltonian.
    /// Exact-spectral propagation covers the free particle and the momentum
    /// and position couplings on periodic axes.
    pub fn new(h: &ClassicalHamiltonian<T>, grid: &Arc<Grid<T>>, hbar: T, kind: PropagatorKind) -> Result<Self> {
        h.validate(grid.rank())?;
        if kind == PropagatorKind::CrankNicolson {
            return Self::crank_nicolson(quantize(h, grid, hbar)?, hbar);
        }
        let periodic = |axis: usize| grid.axis(axis).boundary() == Boundary::Periodic;
        let phase = match h {
            ClassicalHamiltonian::EmParticle(em)
                if em.scalar_potential.is_none() && !em.has_vector_potential() =>
            {
                if !(0..grid.rank()).all(periodic) {
                    return usage("exact free propagation needs periodic axes");
                }
                Phase::Free { mass: em.mass }
            }
            ClassicalHamiltonian::MeasureMomentum { g, system, pointer } => {
                if !periodic(*system) || !periodic(*pointer) {
                    return usage("exact momentum-coupling propagation needs periodic system and pointer axes");
                }
                Phase::Product { g: *g, a: *system, b: *pointer }
            }
            ClassicalHamiltonian::MeasurePosition { g, system, pointer } => {
                if !periodic(*pointer) {
                    return usage("exact position-coupling propagation needs a periodic pointer axis");
                }
                Phase::Shear { g: *g, system: *system, pointer: *pointer }
            }
            ClassicalHamiltonian::MeasureAngularZ { .. } => {
                return Err(Error::UnsupportedHamiltonian(
                    "angular coupling is diagonalized on a polar grid; use Propagator::angular_modes".into(),
                ))
            }
            other => {
                return Err(Error::UnsupportedHamiltonian(format!(
                    "no exact spectral propagator for {}",
                    other.kind_name()
                )))
            }
        };
        Ok(Self { grid: grid.clone(), hbar, engine: Engine::Spectral { fft: AxisFft::new(grid), phase } })
    }

    /// Exact propagator for `g L_z p_pointer` on a grid whose `angle` axis is
    /// the periodic polar angle on `[0, 2π)`. Angular mode `m` is an `L_z`
    /// eigenstate with eigenvalue `m hbar`, so each mode shifts the pointer by
    /// `g m hbar t`.
    pub fn angular_modes(grid: &Arc<Grid<T>>, g: T, angle: usize, pointer: usize, hbar: T) -> Result<Self> {
        grid.check_axis(angle)?;
        grid.check_axis(pointer)?;
        if angle == pointer {
            return usage("angle and pointer axes must differ");
        }
        let ax = grid.axis(angle);
        let two_pi = T::TAU();
        if ax.boundary() != Boundary::Periodic || (ax.extent() - two_pi).abs() > T::lit(1e-12) * two_pi {
            return usage("angular axis must be periodic with extent 2π");
        }
        if grid.axis(pointer).boundary() != Boundary::Periodic {
            return usage("exact angular propagation needs a periodic pointer axis");
        }
        Ok(Self {
            grid: grid.clone(),
            hbar,
            engine: Engine::Spectral { fft: AxisFft::new(grid), phase: Phase::Product { g, a: angle, b: pointer } },
        })
    }

    pub fn kind(&self) -> PropagatorKind {
        match self.engine {
            Engine::Cn(_) => PropagatorKind::CrankNicolson,
            Engine::Spectral { .. } => PropagatorKind::ExactSpectral,
        }
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn hbar(&self) -> T {
        self.hbar
    }

    /// The discretized operator behind a Crank-Nicolson propagator.
    pub fn operator(&self) -> Option<&QuantumOperator<T>> {
        match &self.engine {
            Engine::Cn(cn) => Some(&cn.op),
            Engine::Spectral { .. } => None,
        }
    }

    /// Whether Crank-Nicolson steps use a cached banded factorization.
    pub fn is_banded(&self) -> bool {
        matches!(&self.engine, Engine::Cn(cn) if cn.band.is_some())
    }

    pub fn propagate(&self, psi: &ComplexField<T>, dt: T) -> Result<ComplexField<T>> {
        self.propagate_at(psi, T::zero(), dt)
    }

    /// One step starting at time `t`; time-dependent operators are sampled at
    /// the midpoint `t + dt/2`.
    pub fn propagate_at(&self, psi: &ComplexField<T>, t: T, dt: T) -> Result<ComplexField<T>> {
        self.check_input(psi)?;
        if !dt.is_finite() {
            return usage("time step must be finite");
        }
        match &self.engine {
            Engine::Cn(cn) => self.cn_step(cn, psi, t, dt),
            Engine::Spectral { fft, phase } => Ok(self.spectral(fft, *phase, psi, dt)),
        }
    }

    /// Evolves from `t = 0` to `t_end` in steps no longer than `dt`. Spectral
    /// propagators jump straight to `t_end`.
    pub fn evolve(&self, psi: &ComplexField<T>, t_end: T, dt: T) -> Result<ComplexField<T>> {
        if let Engine::Spectral { .. } = self.engine {
            return self.evolve_to(psi, t_end);
        }
        if !(dt > T::zero()) || t_end < T::zero() {
            return usage("evolve needs dt > 0 and t_end >= 0");
        }
        let steps = step_count(t_end, dt);
        let h = if steps == 0 { T::zero() } else { t_end / T::count(steps) };
        let mut out = psi.clone();
        for n in 0..steps {
            out = self.propagate_at(&out, T::count(n) * h, h)?;
        }
        Ok(out)
    }

    /// `psi(t)` in a single application of the exact propagator.
    pub fn evolve_to(&self, psi: &ComplexField<T>, t: T) -> Result<ComplexField<T>> {
        match &self.engine {
            Engine::Spectral { fft, phase } => {
                self.check_input(psi)?;
                Ok(self.spectral(fft, *phase, psi, t))
            }
            Engine::Cn(_) => usage("evolve_to needs an exact spectral propagator"),
        }
    }

    fn check_input(&self, psi: &ComplexField<T>) -> Result<()> {
        if **psi.grid() != *self.grid {
            return usage("wavefunction grid differs from the propagator grid");
        }
        let norm = psi.norm();
        if (norm - T::one()).abs().as_f64() > NORM_TOLERANCE {
            return usage(format!("wavefunction is not normalized (norm {norm})"));
        }
        Ok(())
    }

    fn cn_step(&self, cn: &CrankNicolson<T>, psi: &ComplexField<T>, t: T, dt: T) -> Result<ComplexField<T>> {
        let c = dt / (self.hbar + self.hbar);
        let mid = t + dt * T::lit(0.5);
        let i_c = Cplx::new(T::zero(), c);
        let h_psi = cn.op.apply_unchecked(psi, mid);
        let rhs: Vec<Cplx<T>> = psi.data().iter().zip(h_psi.data()).map(|(p, hp)| p - i_c * hp).collect();
        if let Some(band) = &cn.band {
            let lu = self.factor(cn, band, dt, c);
            let mut x = rhs;
            lu.solve(&mut x);
            return Ok(ComplexField::from_parts(self.grid.clone(), x));
        }
        let grid = self.grid.clone();
        let apply = |x: &[Cplx<T>]| {
            let hx = cn.op.apply_unchecked(&ComplexField::from_parts(grid.clone(), x.to_vec()), mid);
            x.iter().zip(hx.data()).map(|(xi, hi)| xi + i_c * hi).collect::<Vec<_>>()
        };
        let (x, _) = bicgstab(apply, &rhs, psi.data().to_vec())?;
        Ok(ComplexField::from_parts(self.grid.clone(), x))
    }

    fn factor(&self, cn: &CrankNicolson<T>, band: &[Cplx<T>], dt: T, c: T) -> Arc<BandedLu<T>> {
        let mut cache = cn.lu.lock().expect("factorization cache poisoned");
        if let Some((cached_dt, lu)) = cache.as_ref() {
            if *cached_dt == dt {
                return lu.clone();
            }
        }
        let width = 2 * PROBE_BANDWIDTH + 1;
        let i_c = Cplx::new(T::zero(), c);
        let a: Vec<Cplx<T>> = band
            .iter()
            .enumerate()
            .map(|(idx, h)| {
                let diagonal = idx % width == PROBE_BANDWIDTH;
                let one = if diagonal { Cplx::new(T::one(), T::zero()) } else { Cplx::zero() };
                one + i_c * h
            })
            .collect();
        let lu = Arc::new(
            BandedLu::factor(self.grid.len(), PROBE_BANDWIDTH, a)
                .expect("1 + iK with Hermitian K has nonzero pivots"),
        );
        *cache = Some((dt, lu.clone()));
        lu
    }

    fn spectral(&self, fft: &AxisFft<T>, phase: Phase<T>, psi: &ComplexField<T>, t: T) -> ComplexField<T> {
        let grid = &self.grid;
        let mut data = psi.data().to_vec();
        let axes: Vec<usize> = match phase {
            Phase::Free { .. } => (0..grid.rank()).collect(),
            Phase::Product { a, b, .. } => vec![a, b],
            Phase::Shear { pointer, .. } => vec![pointer],
        };
        for &axis in &axes {
            fft.forward(grid, &mut data, axis);
        }
        let k: Vec<Vec<T>> = grid.axes().iter().map(|a| a.wavenumbers()).collect();
        let strides = grid.strides();
        let idx = |flat: usize, axis: usize| (flat / strides[axis]) % grid.axis(axis).len();
        let hbar = self.hbar;
        for (flat, z) in data.iter_mut().enumerate() {
            let angle = match phase {
                Phase::Free { mass } => {
                    let k2 = (0..grid.rank()).map(|ax| k[ax][idx(flat, ax)].powi(2)).sum::<T>();
                    -hbar * k2 * t / (mass + mass)
                }
                Phase::Product { g, a, b } => -g * hbar * k[a][idx(flat, a)] * k[b][idx(flat, b)] * t,
                Phase::Shear { g, system, pointer } => {
                    -g * grid.axis(system).coord(idx(flat, system)) * k[pointer][idx(flat, pointer)] * t
                }
            };
            *z *= Cplx::from_polar(T::one(), angle);
        }
        for &axis in &axes {
            fft.inverse(grid, &mut data, axis);
        }
        ComplexField::from_parts(grid.clone(), data)
    }
}

/// Number of equal steps of length at most `dt` covering `t`.
pub(crate) fn step_count<T: Real>(t: T, dt: T) -> usize {
    let raw = (t / dt).as_f64();
    let n = raw.round();
    let n = if (raw - n).abs() < 1e-9 { n } else { raw.ceil() };
    n.max(0.0) as usize
}

#[cfg(test)]
pub(crate) fn propagate_steps<T: Real>(p: &Propagator<T>, psi: &ComplexField<T>, dt: T, n: usize) -> Result<ComplexField<T>> {
    let mut out = psi.clone();
    for k in 0..n {
        out = p.propagate_at(&out, T::count(k) * dt, dt)?;
    }
    Ok(out)
}
