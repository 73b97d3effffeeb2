use std::io::Write;

use super::madelung::{quantum_potential, MadelungState};
use crate::error::Result;
use crate::field::{gradient_with, ComplexField, EdgeRule, RealField};
use crate::quantizer::{expectation_at, quantize, ClassicalHamiltonian, EmParticle};
use crate::scalar::Real;
use crate::spectral::AxisFft;

/// `<psi| H |psi>` for the quantized Hamiltonian at time `t`.
pub fn energy<T: Real>(h: &ClassicalHamiltonian<T>, psi: &ComplexField<T>, hbar: T, t: T) -> Result<T> {
    let op = quantize(h, psi.grid(), hbar)?;
    expectation_at(&op, psi, t)
}

/// `∫ rho (-d_t S)` with the action equation right-hand side:
/// `-d_t S = |dS - kappa A|^2/2m + eV - (hbar²/2m) d²R/R`. The quantum term is
/// dropped on cells under the node threshold.
pub fn madelung_energy<T: Real>(em: &EmParticle<T>, state: &MadelungState<T>, hbar: T) -> Result<T> {
    let grid = state.grid().clone();
    let t = state.t;
    let mut e = quantum_potential(em, &state.rho, hbar)?;
    let inv_2m = (em.mass + em.mass).recip();
    for k in 0..grid.rank() {
        let mut ds = gradient_with(&state.s, k, EdgeRule::OneSided)?;
        if let Some(a) = em.vector_potential.get(k) {
            ds = ds.axpy(-em.kappa(), &a.sample(&grid, t)?)?;
        }
        e = e.axpy(inv_2m, &ds.mul(&ds)?)?;
    }
    if let Some(v) = &em.scalar_potential {
        e = e.axpy(em.charge, &v.sample(&grid, t)?)?;
    }
    Ok(e.mul(&state.rho)?.integrate())
}

/// Position and momentum spreads along one axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Uncertainty<T> {
    pub sigma_q: T,
    pub sigma_p: T,
    pub product: T,
}

/// `sigma_q` from quadrature moments of `|psi|^2`, `sigma_p = hbar sigma_k`
/// from moments of the discrete spectrum along `axis`.
pub fn uncertainty_product<T: Real>(psi: &ComplexField<T>, axis: usize, hbar: T) -> Result<Uncertainty<T>> {
    let grid = psi.grid().clone();
    grid.check_axis(axis)?;
    let rho = psi.norm_sqr();
    let ax = grid.axis(axis);
    let stride = grid.strides()[axis];
    let coord = |flat: usize| ax.coord((flat / stride) % ax.len());
    let x = RealField::from_parts(grid.clone(), (0..grid.len()).map(coord).collect());
    let mass = rho.integrate();
    let mean = rho.mul(&x)?.integrate() / mass;
    let centered = x.map(|q| (q - mean) * (q - mean));
    let sigma_q = (rho.mul(&centered)?.integrate() / mass).sqrt();

    let mut data = psi.data().to_vec();
    AxisFft::new(&grid).forward(&grid, &mut data, axis);
    let k = ax.wavenumbers();
    let mut power = vec![T::zero(); k.len()];
    for (flat, z) in data.iter().enumerate() {
        power[(flat / stride) % ax.len()] += z.norm_sqr();
    }
    let total: T = power.iter().copied().sum();
    let mean_k = power.iter().zip(&k).map(|(p, k)| *p * *k).sum::<T>() / total;
    let var_k = power.iter().zip(&k).map(|(p, k)| *p * (*k - mean_k).powi(2)).sum::<T>() / total;
    let sigma_p = hbar * var_k.sqrt();
    Ok(Uncertainty { sigma_q, sigma_p, product: sigma_q * sigma_p })
}

/// One row of the observable time series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObservableRow<T> {
    pub t: T,
    pub norm: T,
    pub energy: T,
    pub sigma_q: T,
    pub sigma_p: T,
}

/// Observable time series written as `t,norm,energy,sigma_q,sigma_p`.
#[derive(Clone, Debug, Default)]
pub struct ObservableSeries<T> {
    pub rows: Vec<ObservableRow<T>>,
}

impl<T: Real> ObservableSeries<T> {
    pub fn new() -> Self {
        Self { rows: Vec::new() }
    }

    /// Records `psi` at time `t`, with spreads measured along `axis`.
    pub fn record(
        &mut self,
        h: &ClassicalHamiltonian<T>,
        psi: &ComplexField<T>,
        t: T,
        axis: usize,
        hbar: T,
    ) -> Result<&ObservableRow<T>> {
        let u = uncertainty_product(psi, axis, hbar)?;
        self.rows.push(ObservableRow { t, norm: psi.norm(), energy: energy(h, psi, hbar, t)?, sigma_q: u.sigma_q, sigma_p: u.sigma_p });
        Ok(self.rows.last().expect("just pushed"))
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "t,norm,energy,sigma_q,sigma_p")?;
        for r in &self.rows {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.t.as_f64(),
                r.norm.as_f64(),
                r.energy.as_f64(),
                r.sigma_q.as_f64(),
                r.sigma_p.as_f64()
            )?;
        }
        Ok(())
    }
}
