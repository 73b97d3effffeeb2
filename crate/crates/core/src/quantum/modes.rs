use std::sync::{Arc, Mutex};

use num_traits::Zero;
use rayon::prelude::*;

use super::linsolve::{bicgstab, probe_band, BandedLu};
use super::propagator::step_count;
use crate::analytic::AnalyticFn;
use crate::error::{usage, Result};
use crate::field::{ComplexField, Grid};
use crate::quantizer::{quantize, ClassicalHamiltonian, QuantumOperator, NORM_TOLERANCE};
use crate::scalar::{Cplx, Real};
use crate::spectral::AxisFft;

const BANDWIDTH: usize = 2;

type ModeFactors<T> = Arc<Vec<Option<BandedLu<T>>>>;

/// Crank-Nicolson propagation of `g (B(q_s) p_s + p_s B(q_s))/2 · p_p`
/// mode by mode: the pointer momentum is diagonal in the pointer Fourier
/// basis, so each wavenumber `k` leaves a 1-D problem
/// `H_k = g hbar k · (B p + p B)/2` on the system axis.
#[derive(Debug)]
pub struct ModePropagator<T: Real> {
    grid: Arc<Grid<T>>,
    hbar: T,
    g: T,
    system: usize,
    pointer: usize,
    sym: QuantumOperator<T>,
    band: Option<Vec<Cplx<T>>>,
    fft: AxisFft<T>,
    factors: Mutex<Option<(T, ModeFactors<T>)>>,
}

impl<T: Real> ModePropagator<T> {
    pub fn new(h: &ClassicalHamiltonian<T>, grid: &Arc<Grid<T>>, hbar: T) -> Result<Self> {
        let ClassicalHamiltonian::MeasureLinearObservable { g, b, system, pointer } = h else {
            return usage("mode propagation needs a linear-observable coupling");
        };
        if grid.rank() != 2 {
            return usage("mode propagation runs on a 2-D (system, pointer) grid");
        }
        h.validate(2)?;
        if b.is_time_dependent() {
            return usage("mode propagation needs a time-independent B(q)");
        }
        let (system, pointer) = (*system, *pointer);
        let line = Arc::new(Grid::new(vec![grid.axis(system).clone()])?);
        let rank = grid.rank();
        let (bv, bg) = (b.clone(), b.clone());
        let embed = move |q: &[T]| {
            let mut full = vec![T::zero(); rank];
            full[system] = q[0];
            full
        };
        let embed2 = embed;
        let b_line = AnalyticFn::new(
            b.label(),
            false,
            move |q, t| bv.value(&embed(q), t),
            move |q, t, k| if k == 0 { bg.derivative(&embed2(q), t, system) } else { T::zero() },
        );
        let sym = quantize(&ClassicalHamiltonian::LinearDrift { b: b_line, axis: 0 }, &line, hbar)?;
        let band = if line.len() > 2 * BANDWIDTH {
            let (l, o) = (line.clone(), sym.clone());
            probe_band(line.len(), BANDWIDTH, move |x| {
                o.apply_unchecked(&ComplexField::from_parts(l.clone(), x.to_vec()), T::zero()).into_data()
            })
        } else {
            None
        };
        Ok(Self {
            grid: grid.clone(),
            hbar,
            g: *g,
            system,
            pointer,
            sym,
            band,
            fft: AxisFft::new(grid),
            factors: Mutex::new(None),
        })
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    /// The symmetrized `(B p + p B)/2` on the 1-D system grid.
    pub fn system_operator(&self) -> &QuantumOperator<T> {
        &self.sym
    }

    pub fn is_banded(&self) -> bool {
        self.band.is_some()
    }

    pub fn propagate(&self, psi: &ComplexField<T>, dt: T) -> Result<ComplexField<T>> {
        self.run(psi, dt, 1)
    }

    /// Evolves from 0 to `t_end` with steps no longer than `dt`, staying in
    /// the pointer Fourier basis throughout.
    pub fn evolve(&self, psi: &ComplexField<T>, t_end: T, dt: T) -> Result<ComplexField<T>> {
        if !(dt > T::zero()) || t_end < T::zero() {
            return usage("evolve needs dt > 0 and t_end >= 0");
        }
        let steps = step_count(t_end, dt);
        if steps == 0 {
            return Ok(psi.clone());
        }
        self.run(psi, t_end / T::count(steps), steps)
    }

    fn run(&self, psi: &ComplexField<T>, dt: T, steps: usize) -> Result<ComplexField<T>> {
        if **psi.grid() != *self.grid {
            return usage("wavefunction grid differs from the propagator grid");
        }
        if (psi.norm() - T::one()).abs().as_f64() > NORM_TOLERANCE {
            return usage("wavefunction is not normalized");
        }
        let grid = &self.grid;
        let mut data = psi.data().to_vec();
        self.fft.forward(grid, &mut data, self.pointer);
        let k = grid.axis(self.pointer).wavenumbers();
        let (ss, ps) = (grid.strides()[self.system], grid.strides()[self.pointer]);
        let n_sys = grid.axis(self.system).len();
        let mut lines: Vec<Vec<Cplx<T>>> =
            (0..k.len()).map(|j| (0..n_sys).map(|i| data[j * ps + i * ss]).collect()).collect();
        let factors = self.band.as_ref().map(|band| self.factors(band, &k, dt));
        lines.par_iter_mut().enumerate().try_for_each(|(j, line)| -> Result<()> {
            let c = self.g * k[j] * dt * T::lit(0.5);
            for _ in 0..steps {
                *line = self.mode_step(line, c, factors.as_ref().and_then(|f| f[j].as_ref()))?;
            }
            Ok(())
        })?;
        for (j, line) in lines.iter().enumerate() {
            for (i, z) in line.iter().enumerate() {
                data[j * ps + i * ss] = *z;
            }
        }
        self.fft.inverse(grid, &mut data, self.pointer);
        Ok(ComplexField::from_parts(grid.clone(), data))
    }

    /// One CN step of `(1 + i c M) x = (1 - i c M) y`, where `c = g k dt / 2`
    /// absorbs the `hbar` of the pointer momentum.
    fn mode_step(&self, y: &[Cplx<T>], c: T, lu: Option<&BandedLu<T>>) -> Result<Vec<Cplx<T>>> {
        if c == T::zero() {
            return Ok(y.to_vec());
        }
        let line = self.sym.grid().clone();
        let i_c = Cplx::new(T::zero(), c);
        let apply_m = |x: &[Cplx<T>]| self.sym.apply_unchecked(&ComplexField::from_parts(line.clone(), x.to_vec()), T::zero());
        let my = apply_m(y);
        let mut rhs: Vec<Cplx<T>> = y.iter().zip(my.data()).map(|(a, b)| a - i_c * b).collect();
        if let Some(lu) = lu {
            lu.solve(&mut rhs);
            return Ok(rhs);
        }
        let apply = |x: &[Cplx<T>]| {
            let mx = apply_m(x);
            x.iter().zip(mx.data()).map(|(a, b)| a + i_c * b).collect::<Vec<_>>()
        };
        Ok(bicgstab(apply, &rhs, y.to_vec())?.0)
    }

    fn factors(&self, band: &[Cplx<T>], k: &[T], dt: T) -> ModeFactors<T> {
        let mut cache = self.factors.lock().expect("factor cache poisoned");
        if let Some((cached, f)) = cache.as_ref() {
            if *cached == dt {
                return f.clone();
            }
        }
        let width = 2 * BANDWIDTH + 1;
        let n = self.sym.grid().len();
        let f: Vec<Option<BandedLu<T>>> = k
            .par_iter()
            .map(|&kj| {
                let i_c = Cplx::new(T::zero(), self.g * kj * dt * T::lit(0.5));
                let a = band
                    .iter()
                    .enumerate()
                    .map(|(idx, m)| {
                        let one = if idx % width == BANDWIDTH { Cplx::new(T::one(), T::zero()) } else { Cplx::zero() };
                        one + i_c * m
                    })
                    .collect();
                BandedLu::factor(n, BANDWIDTH, a)
            })
            .collect();
        let f = Arc::new(f);
        *cache = Some((dt, f.clone()));
        f
    }

    pub fn hbar(&self) -> T {
        self.hbar
    }
}
