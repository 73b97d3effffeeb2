//! Fourth-order finite-difference operators along grid axes.
//!
//! Every stencil is written as a weighted sum of differences `f[j] - f[i]`,
//! so constant fields map to exactly zero.

use super::field::Field;
use super::grid::{Boundary, Grid};
use super::sample::Sample;
use crate::error::Result;
use crate::scalar::Real;

/// How stencils treat dirichlet edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EdgeRule {
    /// Biased fourth-order stencils on the two outermost nodes of each edge.
    #[default]
    OneSided,
    /// Boundary nodes and everything beyond them read as zero and the result
    /// is zero there. The first-derivative matrix is then exactly
    /// skew-symmetric, which keeps derived operators Hermitian.
    ZeroGhost,
}

#[inline]
fn w<T: Real>(x: f64) -> T {
    T::lit(x)
}

fn first_line<T: Real, V: Sample<T>>(f: &[V], out: &mut [V], h: T, boundary: Boundary, rule: EdgeRule) {
    let n = f.len();
    let c = (w::<T>(12.0) * h).recip();
    let central = |fm2: V, fm1: V, fp1: V, fp2: V| ((fp1 - fm1) * w(8.0) - (fp2 - fm2)) * c;
    match (boundary, rule) {
        (Boundary::Periodic, _) => {
            for i in 0..n {
                let at = |d: isize| f[(i as isize + d).rem_euclid(n as isize) as usize];
                out[i] = central(at(-2), at(-1), at(1), at(2));
            }
        }
        (Boundary::Dirichlet, EdgeRule::ZeroGhost) => {
            let at = |j: isize| {
                if j >= 1 && j <= n as isize - 2 {
                    f[j as usize]
                } else {
                    V::zero()
                }
            };
            out[0] = V::zero();
            out[n - 1] = V::zero();
            for i in 1..n - 1 {
                let i = i as isize;
                out[i as usize] = central(at(i - 2), at(i - 1), at(i + 1), at(i + 2));
            }
        }
        (Boundary::Dirichlet, EdgeRule::OneSided) => {
            for i in 2..n - 2 {
                out[i] = central(f[i - 2], f[i - 1], f[i + 1], f[i + 2]);
            }
            let edge0 = |g: &dyn Fn(usize) -> V| {
                let f0 = g(0);
                ((g(1) - f0) * w(48.0) - (g(2) - f0) * w(36.0) + (g(3) - f0) * w(16.0) - (g(4) - f0) * w(3.0)) * c
            };
            let edge1 = |g: &dyn Fn(usize) -> V| {
                let f1 = g(1);
                ((g(0) - f1) * w(-3.0) + (g(2) - f1) * w(18.0) - (g(3) - f1) * w(6.0) + (g(4) - f1)) * c
            };
            let fwd = |j: usize| f[j];
            let bwd = |j: usize| f[n - 1 - j];
            out[0] = edge0(&fwd);
            out[1] = edge1(&fwd);
            out[n - 1] = -edge0(&bwd);
            out[n - 2] = -edge1(&bwd);
        }
    }
}

fn second_line<T: Real, V: Sample<T>>(f: &[V], out: &mut [V], h: T, boundary: Boundary, rule: EdgeRule) {
    let n = f.len();
    let c = (w::<T>(12.0) * h * h).recip();
    let central =
        |fm2: V, fm1: V, f0: V, fp1: V, fp2: V| (((fm1 - f0) + (fp1 - f0)) * w(16.0) - ((fm2 - f0) + (fp2 - f0))) * c;
    match (boundary, rule) {
        (Boundary::Periodic, _) => {
            for i in 0..n {
                let at = |d: isize| f[(i as isize + d).rem_euclid(n as isize) as usize];
                out[i] = central(at(-2), at(-1), at(0), at(1), at(2));
            }
        }
        (Boundary::Dirichlet, EdgeRule::ZeroGhost) => {
            let at = |j: isize| {
                if j >= 1 && j <= n as isize - 2 {
                    f[j as usize]
                } else {
                    V::zero()
                }
            };
            out[0] = V::zero();
            out[n - 1] = V::zero();
            for i in 1..n - 1 {
                let i = i as isize;
                out[i as usize] = central(at(i - 2), at(i - 1), at(i), at(i + 1), at(i + 2));
            }
        }
        (Boundary::Dirichlet, EdgeRule::OneSided) => {
            for i in 2..n - 2 {
                out[i] = central(f[i - 2], f[i - 1], f[i], f[i + 1], f[i + 2]);
            }
            let edge0 = |g: &dyn Fn(usize) -> V| {
                let f0 = g(0);
                ((g(1) - f0) * w(-154.0) + (g(2) - f0) * w(214.0) - (g(3) - f0) * w(156.0)
                    + (g(4) - f0) * w(61.0)
                    - (g(5) - f0) * w(10.0))
                    * c
            };
            let edge1 = |g: &dyn Fn(usize) -> V| {
                let f1 = g(1);
                ((g(0) - f1) * w(10.0) - (g(2) - f1) * w(4.0) + (g(3) - f1) * w(14.0) - (g(4) - f1) * w(6.0)
                    + (g(5) - f1))
                    * c
            };
            let fwd = |j: usize| f[j];
            let bwd = |j: usize| f[n - 1 - j];
            out[0] = edge0(&fwd);
            out[1] = edge1(&fwd);
            out[n - 1] = edge0(&bwd);
            out[n - 2] = edge1(&bwd);
        }
    }
}

type LineKernel<T, V> = fn(&[V], &mut [V], T, Boundary, EdgeRule);

fn along_axis<T: Real, V: Sample<T>>(
    f: &Field<T, V>,
    axis: usize,
    rule: EdgeRule,
    kernel: LineKernel<T, V>,
    out: &mut [V],
) {
    let grid: &Grid<T> = f.grid();
    let ax = grid.axis(axis);
    let (n, h, boundary) = (ax.len(), ax.spacing(), ax.boundary());
    let stride = grid.strides()[axis];
    let src = f.data();
    if stride == 1 {
        for (line_in, line_out) in src.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
            kernel(line_in, line_out, h, boundary, rule);
        }
        return;
    }
    let mut buf_in = vec![V::zero(); n];
    let mut buf_out = vec![V::zero(); n];
    grid.for_each_line(axis, |base| {
        for (i, b) in buf_in.iter_mut().enumerate() {
            *b = src[base + i * stride];
        }
        kernel(&buf_in, &mut buf_out, h, boundary, rule);
        for (i, b) in buf_out.iter().enumerate() {
            out[base + i * stride] = *b;
        }
    });
}

/// First derivative along `axis` with one-sided edge stencils.
pub fn gradient<T: Real, V: Sample<T>>(f: &Field<T, V>, axis: usize) -> Result<Field<T, V>> {
    gradient_with(f, axis, EdgeRule::OneSided)
}

pub fn gradient_with<T: Real, V: Sample<T>>(f: &Field<T, V>, axis: usize, rule: EdgeRule) -> Result<Field<T, V>> {
    f.grid().check_axis(axis)?;
    let mut out = vec![V::zero(); f.len()];
    along_axis(f, axis, rule, first_line::<T, V>, &mut out);
    Ok(Field::from_parts(f.grid().clone(), out))
}

/// Second derivative along `axis`.
pub fn second_derivative_with<T: Real, V: Sample<T>>(
    f: &Field<T, V>,
    axis: usize,
    rule: EdgeRule,
) -> Result<Field<T, V>> {
    f.grid().check_axis(axis)?;
    let mut out = vec![V::zero(); f.len()];
    along_axis(f, axis, rule, second_line::<T, V>, &mut out);
    Ok(Field::from_parts(f.grid().clone(), out))
}

/// Sum of second derivatives over all axes, one-sided at dirichlet edges.
pub fn laplacian<T: Real, V: Sample<T>>(f: &Field<T, V>) -> Field<T, V> {
    laplacian_with(f, EdgeRule::OneSided)
}

pub fn laplacian_with<T: Real, V: Sample<T>>(f: &Field<T, V>, rule: EdgeRule) -> Field<T, V> {
    let mut acc = vec![V::zero(); f.len()];
    let mut tmp = vec![V::zero(); f.len()];
    for axis in 0..f.grid().rank() {
        along_axis(f, axis, rule, second_line::<T, V>, &mut tmp);
        for (a, t) in acc.iter_mut().zip(&tmp) {
            *a += *t;
        }
    }
    Field::from_parts(f.grid().clone(), acc)
}

/// All first derivatives, one field per axis.
pub fn gradients<T: Real, V: Sample<T>>(f: &Field<T, V>, rule: EdgeRule) -> Vec<Field<T, V>> {
    (0..f.grid().rank())
        .map(|k| gradient_with(f, k, rule).expect("axis in range"))
        .collect()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use super::*;
    use crate::field::field::{ComplexField, RealField};
    use crate::field::grid::Axis;
    use crate::scalar::Cplx;

    fn line(n: usize, lo: f64, hi: f64, b: Boundary) -> Arc<Grid<f64>> {
        Arc::new(Grid::line(n, lo, hi, b).unwrap())
    }

    fn max_err(a: &RealField<f64>, b: impl Fn(f64) -> f64) -> f64 {
        a.data()
            .iter()
            .enumerate()
            .map(|(i, v)| (v - b(a.grid().point(i)[0])).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn constants_map_to_exact_zero() {
        for b in [Boundary::Periodic, Boundary::Dirichlet] {
            let f = RealField::from_fn(line(33, -1.3, 2.9, b), |_| 0.7317).unwrap();
            for rule in [EdgeRule::OneSided, EdgeRule::ZeroGhost] {
                if rule == EdgeRule::OneSided || b == Boundary::Periodic {
                    assert!(gradient_with(&f, 0, rule).unwrap().data().iter().all(|&v| v == 0.0));
                    assert!(laplacian_with(&f, rule).data().iter().all(|&v| v == 0.0));
                }
            }
        }
    }

    #[test]
    fn axis_out_of_range_is_usage_error() {
        let f = RealField::zeros(line(16, 0.0, 1.0, Boundary::Periodic));
        assert!(matches!(gradient(&f, 1), Err(crate::Error::Usage(_))));
    }

    #[test]
    fn periodic_sine_derivatives() {
        let k = 3.0;
        let f = RealField::from_fn(line(128, 0.0, 2.0 * PI, Boundary::Periodic), |q| (k * q[0]).sin()).unwrap();
        let d = gradient(&f, 0).unwrap();
        let l = laplacian(&f);
        let h = 2.0 * PI / 128.0;
        assert!(max_err(&d, |x| k * (k * x).cos()) < 2.0 * k.powi(5) * h.powi(4) / 30.0);
        assert!(max_err(&l, |x| -k * k * (k * x).sin()) < 2.0 * k.powi(6) * h.powi(4) / 90.0);
    }

    #[test]
    fn polynomials_up_to_quartic_are_exact_with_one_sided_edges() {
        let g = line(21, -2.0, 3.0, Boundary::Dirichlet);
        for p in 0..=4 {
            let f = RealField::from_fn(g.clone(), |q| q[0].powi(p)).unwrap();
            let d = gradient(&f, 0).unwrap();
            let dd = laplacian(&f);
            let pf = p as f64;
            assert!(max_err(&d, |x| if p == 0 { 0.0 } else { pf * x.powi(p - 1) }) < 1e-10, "p={p}");
            assert!(max_err(&dd, |x| if p < 2 { 0.0 } else { pf * (pf - 1.0) * x.powi(p - 2) }) < 1e-9, "p={p}");
        }
        let sq = RealField::from_fn(line(41, -2.0, 2.0, Boundary::Dirichlet), |q| q[0] * q[0]).unwrap();
        let d = gradient(&sq, 0).unwrap();
        assert!((d.at(&[30]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_curvature_at_origin() {
        let f = RealField::from_fn(line(401, -10.0, 10.0, Boundary::Dirichlet), |q| (-q[0] * q[0] / 2.0).exp()).unwrap();
        let l = laplacian(&f);
        assert!((l.at(&[200]) + 1.0).abs() < 1e-5);
    }

    #[test]
    fn fourth_order_convergence_on_plane_wave() {
        let err = |n: usize| {
            let f = RealField::from_fn(line(n, 0.0, 2.0 * PI, Boundary::Periodic), |q| (2.0 * q[0]).cos()).unwrap();
            max_err(&gradient(&f, 0).unwrap(), |x| -2.0 * (2.0 * x).sin())
        };
        let (e1, e2) = (err(32), err(64));
        assert!(e2 <= e1 / 15.0, "{e1} {e2}");
    }

    #[test]
    fn zero_ghost_first_derivative_is_skew() {
        let g = line(12, 0.0, 1.0, Boundary::Dirichlet);
        let n = 12;
        let mut m = vec![vec![0.0; n]; n];
        for j in 0..n {
            let e = RealField::from_fn(g.clone(), |q| if (q[0] * 11.0).round() as usize == j { 1.0 } else { 0.0 })
                .unwrap();
            let d = gradient_with(&e, 0, EdgeRule::ZeroGhost).unwrap();
            for i in 0..n {
                m[i][j] = d.data()[i];
            }
        }
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                assert!((m[i][j] + m[j][i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn multi_axis_gradient_and_laplacian() {
        let g = Arc::new(
            Grid::new(vec![
                Axis::periodic(32, 0.0, 2.0 * PI).unwrap(),
                Axis::dirichlet(33, -1.0, 1.0).unwrap(),
            ])
            .unwrap(),
        );
        let f = ComplexField::from_fn(g, |q| Cplx::new(q[0].sin() * q[1] * q[1], q[1])).unwrap();
        let d1 = gradient(&f, 1).unwrap();
        let l = laplacian(&f);
        for i in 0..f.len() {
            let q = f.grid().point(i);
            let want = Cplx::new(2.0 * q[0].sin() * q[1], 1.0);
            assert!((d1.data()[i] - want).norm() < 1e-10);
            let lap = Cplx::new(-q[0].sin() * q[1] * q[1] + 2.0 * q[0].sin(), 0.0);
            assert!((l.data()[i] - lap).norm() < 1e-3);
        }
    }
}
