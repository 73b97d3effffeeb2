//! FFT helpers along single grid axes.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::field::Grid;
use crate::scalar::{Cplx, Real};

/// Forward and inverse plans for every axis of a grid.
pub struct AxisFft<T: Real> {
    forward: Vec<Arc<dyn Fft<T>>>,
    inverse: Vec<Arc<dyn Fft<T>>>,
}

impl<T: Real> std::fmt::Debug for AxisFft<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AxisFft").field("axes", &self.forward.len()).finish()
    }
}

impl<T: Real> AxisFft<T> {
    pub fn new(grid: &Grid<T>) -> Self {
        let mut planner = FftPlanner::new();
        let forward = grid.axes().iter().map(|a| planner.plan_fft_forward(a.len())).collect();
        let inverse = grid.axes().iter().map(|a| planner.plan_fft_inverse(a.len())).collect();
        Self { forward, inverse }
    }

    /// Unnormalized forward transform along `axis`, in place.
    pub fn forward(&self, grid: &Grid<T>, data: &mut [Cplx<T>], axis: usize) {
        run(&self.forward[axis], grid, data, axis, None);
    }

    /// Inverse transform along `axis` scaled by `1/n`, in place.
    pub fn inverse(&self, grid: &Grid<T>, data: &mut [Cplx<T>], axis: usize) {
        let scale = T::count(grid.axis(axis).len()).recip();
        run(&self.inverse[axis], grid, data, axis, Some(scale));
    }

    /// Transforms along `axis`, multiplies sample `flat` with wavenumber `k` by
    /// `phase(flat, k)`, and transforms back.
    pub fn filter_axis(
        &self,
        grid: &Grid<T>,
        data: &mut [Cplx<T>],
        axis: usize,
        phase: impl Fn(usize, T) -> Cplx<T>,
    ) {
        self.forward(grid, data, axis);
        let k = grid.axis(axis).wavenumbers();
        let stride = grid.strides()[axis];
        let n = grid.axis(axis).len();
        for (flat, v) in data.iter_mut().enumerate() {
            let j = (flat / stride) % n;
            *v *= phase(flat, k[j]);
        }
        self.inverse(grid, data, axis);
    }
}

fn run<T: Real>(plan: &Arc<dyn Fft<T>>, grid: &Grid<T>, data: &mut [Cplx<T>], axis: usize, scale: Option<T>) {
    let n = grid.axis(axis).len();
    let stride = grid.strides()[axis];
    let mut scratch = vec![Cplx::new(T::zero(), T::zero()); plan.get_inplace_scratch_len()];
    if stride == 1 {
        plan.process_with_scratch(data, &mut scratch);
    } else {
        let mut line = vec![Cplx::new(T::zero(), T::zero()); n];
        grid.for_each_line(axis, |base| {
            for (i, l) in line.iter_mut().enumerate() {
                *l = data[base + i * stride];
            }
            plan.process_with_scratch(&mut line, &mut scratch);
            for (i, l) in line.iter().enumerate() {
                data[base + i * stride] = *l;
            }
        });
    }
    if let Some(s) = scale {
        for v in data.iter_mut() {
            *v *= s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Axis;

    #[test]
    fn round_trip_on_middle_axis() {
        let g = Grid::new(vec![
            Axis::<f64>::periodic(8, 0.0, 1.0).unwrap(),
            Axis::periodic(16, 0.0, 1.0).unwrap(),
            Axis::periodic(10, 0.0, 1.0).unwrap(),
        ])
        .unwrap();
        let orig: Vec<Cplx<f64>> = (0..g.len()).map(|i| Cplx::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let mut d = orig.clone();
        let plans = AxisFft::new(&g);
        plans.forward(&g, &mut d, 1);
        plans.inverse(&g, &mut d, 1);
        for (a, b) in d.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn phase_filter_shifts_plane_wave() {
        let g = Grid::new(vec![Axis::<f64>::periodic(32, 0.0, 2.0 * std::f64::consts::PI).unwrap()]).unwrap();
        let mut d: Vec<Cplx<f64>> = g.axis(0).coords().iter().map(|x| Cplx::new(0.0, 3.0 * x).exp()).collect();
        let s = 0.37;
        AxisFft::new(&g).filter_axis(&g, &mut d, 0, |_, k| Cplx::new(0.0, -k * s).exp());
        for (x, v) in g.axis(0).coords().iter().zip(&d) {
            assert!((v - Cplx::new(0.0, 3.0 * (x - s)).exp()).norm() < 1e-12);
        }
    }
}
