use std::sync::Arc;

use num_traits::Zero;

use super::grid::Grid;
use super::sample::Sample;
use crate::error::{usage, Error, Result};
use crate::scalar::{Cplx, Real};

/// Samples of type `V` over a shared grid, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T: Real, V> {
    grid: Arc<Grid<T>>,
    data: Vec<V>,
}

pub type RealField<T> = Field<T, T>;
pub type ComplexField<T> = Field<T, Cplx<T>>;

impl<T: Real, V: Sample<T>> Field<T, V> {
    /// Wraps `data`, checking its length and that every sample is finite.
    pub fn new(grid: Arc<Grid<T>>, data: Vec<V>) -> Result<Self> {
        if data.len() != grid.len() {
            return usage(format!("field has {} samples but grid has {}", data.len(), grid.len()));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite_sample()) {
            return Err(Error::Format(format!("non-finite sample at flat index {i}")));
        }
        Ok(Self { grid, data })
    }

    pub(crate) fn from_parts(grid: Arc<Grid<T>>, data: Vec<V>) -> Self {
        debug_assert_eq!(data.len(), grid.len());
        Self { grid, data }
    }

    pub fn zeros(grid: Arc<Grid<T>>) -> Self {
        let data = vec![V::zero(); grid.len()];
        Self { grid, data }
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: Arc<Grid<T>>, mut f: impl FnMut(&[T]) -> V) -> Result<Self> {
        let mut q = Vec::with_capacity(grid.rank());
        let data = (0..grid.len())
            .map(|i| {
                grid.point_into(i, &mut q);
                f(&q)
            })
            .collect();
        Self::new(grid, data)
    }

    #[inline]
    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    #[inline]
    pub fn data(&self) -> &[V] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [V] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<V> {
        self.data
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn at(&self, multi: &[usize]) -> V {
        self.data[self.grid.index(multi)]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(Sample::is_finite_sample)
    }

    pub fn same_grid<W>(&self, other: &Field<T, W>) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub(crate) fn check_grid<W>(&self, other: &Field<T, W>) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            usage("fields live on different grids")
        }
    }

    pub fn map<W: Sample<T>>(&self, f: impl Fn(V) -> W) -> Field<T, W> {
        Field::from_parts(self.grid.clone(), self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map<U: Sample<T>, W: Sample<T>>(
        &self,
        other: &Field<T, U>,
        f: impl Fn(V, U) -> W,
    ) -> Result<Field<T, W>> {
        self.check_grid(other)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Field::from_parts(self.grid.clone(), data))
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: T, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b * s)
    }

    /// Largest sample magnitude.
    pub fn sup_norm(&self) -> T {
        self.data.iter().map(Sample::magnitude).fold(T::zero(), T::max)
    }

    /// Samples weighted pointwise by a real field.
    pub fn weighted(&self, w: &RealField<T>) -> Result<Self> {
        self.zip_map(w, |a, b| a * b)
    }
}

impl<T: Real> Field<T, T> {
    /// Quadrature over the grid (trapezoid on dirichlet axes, rectangle on periodic axes).
    pub fn integrate(&self) -> T {
        self.data.iter().zip(self.grid.weights()).map(|(&v, &w)| v * w).sum()
    }

    pub fn max(&self) -> T {
        self.data.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn min(&self) -> T {
        self.data.iter().copied().fold(T::infinity(), T::min)
    }

    /// Flat index of the largest sample.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v > self.data[best] {
                best = i;
            }
        }
        best
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn to_complex(&self) -> ComplexField<T> {
        self.map(|v| Cplx::new(v, T::zero()))
    }

    /// Weighted L2 norm `sqrt(integral of f^2)`.
    pub fn l2_norm(&self) -> T {
        self.map(|v| v * v).integrate().sqrt()
    }
}

impl<T: Real> Field<T, Cplx<T>> {
    pub fn norm_sqr(&self) -> RealField<T> {
        self.map(|z| z.norm_sqr())
    }

    pub fn re(&self) -> RealField<T> {
        self.map(|z| z.re)
    }

    pub fn im(&self) -> RealField<T> {
        self.map(|z| z.im)
    }

    /// `integral of conj(self) * other`.
    pub fn inner(&self, other: &Self) -> Result<Cplx<T>> {
        self.check_grid(other)?;
        let mut acc = Cplx::zero();
        for ((a, b), &w) in self.data.iter().zip(&other.data).zip(self.grid.weights()) {
            acc += a.conj() * b * w;
        }
        Ok(acc)
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().integrate().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n <= T::zero() {
            return usage("cannot normalize a zero wavefunction");
        }
        Ok(self.scale(n.recip()))
    }

    pub fn mul_complex(&self, z: Cplx<T>) -> Self {
        self.map(|v| v * z)
    }

    pub fn mul_pointwise(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }
}

/// Free-function form of [`Field::integrate`].
pub fn integrate<T: Real>(f: &RealField<T>) -> T {
    f.integrate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::grid::{Axis, Boundary};

    fn line(n: usize, lo: f64, hi: f64, b: Boundary) -> Arc<Grid<f64>> {
        Arc::new(Grid::<f64>::line(n, lo, hi, b).unwrap())
    }

    #[test]
    fn rejects_wrong_length_and_non_finite() {
        let g = line(8, 0.0, 1.0, Boundary::Periodic);
        assert!(RealField::new(g.clone(), vec![0.0; 7]).is_err());
        let mut d = vec![0.0; 8];
        d[3] = f64::NAN;
        assert!(RealField::new(g, d).is_err());
    }

    #[test]
    fn normalized_gaussian_integrates_to_one() {
        let g = line(801, -20.0, 20.0, Boundary::Dirichlet);
        let s = 1.3;
        let f = RealField::from_fn(g, |q| {
            (-(q[0] * q[0]) / (2.0 * s * s)).exp() / (2.0 * std::f64::consts::PI * s * s).sqrt()
        })
        .unwrap();
        assert!((f.integrate() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn zero_field_integrates_to_zero() {
        let g = line(16, 0.0, 1.0, Boundary::Periodic);
        assert_eq!(RealField::zeros(g).integrate(), 0.0);
    }

    #[test]
    fn bump_mass_matches_refined_grid() {
        // Smooth compact bump; the finer grid serves as the reference mass.
        let bump = |x: f64| {
            if x.abs() < 1.0 {
                (-1.0 / (1.0 - x * x)).exp()
            } else {
                0.0
            }
        };
        let coarse = RealField::from_fn(line(201, -2.0, 2.0, Boundary::Dirichlet), |q| bump(q[0])).unwrap();
        let fine = RealField::from_fn(line(2001, -2.0, 2.0, Boundary::Dirichlet), |q| bump(q[0])).unwrap();
        let (mc, mf) = (coarse.integrate(), fine.integrate());
        assert!((mc - mf).abs() < 1e-6 * mf, "{mc} vs {mf}");
    }

    #[test]
    fn rank2_quadrature_is_a_tensor_product() {
        let g = Arc::new(
            Grid::new(vec![
                Axis::<f64>::periodic(64, -8.0, 8.0).unwrap(),
                Axis::<f64>::dirichlet(129, -8.0, 8.0).unwrap(),
            ])
            .unwrap(),
        );
        let f = RealField::from_fn(g, |q| (-(q[0] * q[0] + q[1] * q[1])).exp() / std::f64::consts::PI).unwrap();
        assert!((f.integrate() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn inner_product_is_conjugate_linear_in_first_slot() {
        let g = line(32, 0.0, 1.0, Boundary::Periodic);
        let a = ComplexField::from_fn(g.clone(), |q| Cplx::new(q[0], 1.0)).unwrap();
        let b = ComplexField::from_fn(g, |q| Cplx::new(1.0, -q[0])).unwrap();
        let z = Cplx::new(0.3, 0.7);
        let lhs = a.mul_complex(z).inner(&b).unwrap();
        let rhs = z.conj() * a.inner(&b).unwrap();
        assert!((lhs - rhs).norm() < 1e-14);
    }
}
