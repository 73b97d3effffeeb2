use super::ensemble::ClassicalEnsembleState;
use crate::error::{usage, Result};
use crate::field::{Boundary, RealField};
use crate::quantizer::ClassicalHamiltonian;
use crate::scalar::{Cplx, Real};
use crate::spectral::AxisFft;

/// Shifts every line along `pointer` by `rate(q) * t` using a Fourier phase.
/// `rate` is evaluated at the node and must not vary along the pointer axis.
pub(crate) fn shift_along<T: Real>(
    f: &RealField<T>,
    pointer: usize,
    t: T,
    rate: impl Fn(&[T]) -> T,
) -> Result<RealField<T>> {
    let grid = f.grid().clone();
    if grid.axis(pointer).boundary() != Boundary::Periodic {
        return usage("exact shear transport needs a periodic pointer axis");
    }
    let mut data: Vec<Cplx<T>> = f.data().iter().map(|&v| Cplx::new(v, T::zero())).collect();
    let shifts: Vec<T> = (0..grid.len()).map(|i| rate(&grid.point(i)) * t).collect();
    AxisFft::new(&grid).filter_axis(&grid, &mut data, pointer, |flat, k| {
        let s = shifts[flat];
        if s.is_zero() {
            Cplx::new(T::one(), T::zero())
        } else {
            Cplx::new(T::zero(), -k * s).exp()
        }
    });
    RealField::new(grid, data.into_iter().map(|z| z.re).collect())
}

/// Exact solution of the classical pair for the position-measurement
/// Hamiltonian `g q_s p_p`: both `rho` and `S` are carried along
/// `q_p -> q_p + g q_s t`.
pub fn shear_transport<T: Real>(
    h: &ClassicalHamiltonian<T>,
    state: &ClassicalEnsembleState<T>,
    t: T,
) -> Result<ClassicalEnsembleState<T>> {
    let ClassicalHamiltonian::MeasurePosition { g, system, pointer } = h else {
        return usage("shear transport applies to the position-measurement Hamiltonian only");
    };
    h.validate(state.s.grid().rank())?;
    let (g, system, pointer) = (*g, *system, *pointer);
    let rate = |q: &[T]| g * q[system];
    Ok(ClassicalEnsembleState {
        s: shift_along(&state.s, pointer, t, rate)?,
        rho: shift_along(&state.rho, pointer, t, rate)?,
        t: state.t + t,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::field::{Axis, Grid};

    #[test]
    fn marginal_over_pointer_is_invariant() {
        let g = Arc::new(
            Grid::new(vec![Axis::<f64>::dirichlet(33, -2.0, 2.0).unwrap(), Axis::<f64>::periodic(128, -8.0, 8.0).unwrap()]).unwrap(),
        );
        let rho = RealField::from_fn(g.clone(), |q| {
            (-(q[0] * q[0]) - (q[1] - 1.0).powi(2) * 2.0).exp()
        })
        .unwrap();
        let rho = rho.scale(1.0 / rho.integrate());
        let st = ClassicalEnsembleState::new(RealField::zeros(g.clone()), rho.clone(), 0.0).unwrap();
        let out = shear_transport(&ClassicalHamiltonian::<f64>::measure_position(1.5), &st, 1.0).unwrap();
        let h2 = g.axis(1).spacing();
        for i in 0..33 {
            let m0: f64 = (0..128).map(|j| rho.at(&[i, j])).sum::<f64>() * h2;
            let m1: f64 = (0..128).map(|j| out.rho.at(&[i, j])).sum::<f64>() * h2;
            assert!((m0 - m1).abs() < 1e-12);
        }
        // the packet centred at q1 = 1 moved by g q1 t = 1.5
        let x = g.axis(0).coord(24);
        assert!((x - 1.0).abs() < 1e-12);
        let peak = (0..128).max_by(|&a, &b| out.rho.at(&[24, a]).total_cmp(&out.rho.at(&[24, b]))).unwrap();
        assert!((g.axis(1).coord(peak) - 2.5).abs() < 1e-12);
    }
}
