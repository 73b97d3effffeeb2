use super::field::Field;
use super::grid::{Axis, Boundary};
use super::sample::Sample;
use crate::error::{usage, Error, Result};
use crate::scalar::Real;

/// Bracketing nodes and fractional offset of `x` along `axis`.
pub(crate) fn locate<T: Real>(axis: &Axis<T>, x: T) -> Option<(usize, usize, T)> {
    let n = axis.len();
    let s = (x - axis.lower()) / axis.spacing();
    match axis.boundary() {
        Boundary::Periodic => {
            let nn = T::count(n);
            let mut s = s % nn;
            if s < T::zero() {
                s += nn;
            }
            let i0 = s.floor().to_usize()?.min(n - 1);
            let frac = s - T::count(i0);
            Some((i0, (i0 + 1) % n, frac))
        }
        Boundary::Dirichlet => {
            let last = T::count(n - 1);
            let slack = T::epsilon() * T::lit(64.0) * (last + T::one());
            if !(s >= -slack && s <= last + slack) {
                return None;
            }
            let s = s.max(T::zero()).min(last);
            let i0 = s.floor().to_usize()?.min(n - 2);
            Some((i0, i0 + 1, s - T::count(i0)))
        }
    }
}

/// Multilinear interpolation; exact at nodes, periodic axes wrap.
pub fn interpolate<T: Real, V: Sample<T>>(f: &Field<T, V>, point: &[T]) -> Result<V> {
    let grid = f.grid();
    if point.len() != grid.rank() {
        return usage(format!("point has {} coordinates, grid rank is {}", point.len(), grid.rank()));
    }
    let mut brackets = Vec::with_capacity(grid.rank());
    for (axis, &x) in grid.axes().iter().zip(point) {
        match locate(axis, x) {
            Some(b) => brackets.push(b),
            None => {
                return Err(Error::OutOfDomain { point: point.iter().map(|v| v.as_f64()).collect() });
            }
        }
    }
    let strides = grid.strides();
    let data = f.data();
    let mut acc = V::zero();
    for corner in 0..(1usize << brackets.len()) {
        let mut weight = T::one();
        let mut idx = 0;
        for (k, &(i0, i1, frac)) in brackets.iter().enumerate() {
            if corner >> k & 1 == 0 {
                weight *= T::one() - frac;
                idx += i0 * strides[k];
            } else {
                if frac == T::zero() {
                    weight = T::zero();
                    break;
                }
                weight *= frac;
                idx += i1 * strides[k];
            }
        }
        if weight != T::zero() {
            acc += data[idx] * weight;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::field::field::RealField;
    use crate::field::grid::Grid;

    #[test]
    fn exact_at_nodes() {
        let g = Arc::new(Grid::<f64>::line(17, -1.0, 3.0, Boundary::Dirichlet).unwrap());
        let f = RealField::from_fn(g.clone(), |q| (q[0] * 1.7).sin()).unwrap();
        for i in 0..17 {
            let x = g.axis(0).coord(i);
            assert_eq!(interpolate(&f, &[x]).unwrap(), f.data()[i]);
        }
    }

    #[test]
    fn linear_field_is_reproduced() {
        let g = Arc::new(
            Grid::new(vec![Axis::<f64>::dirichlet(9, 0.0, 1.0).unwrap(), Axis::<f64>::dirichlet(11, -1.0, 1.0).unwrap()]).unwrap(),
        );
        let f = RealField::from_fn(g, |q| 2.0 * q[0] - 0.5 * q[1] + 0.25).unwrap();
        let v = interpolate(&f, &[0.3, 0.17]).unwrap();
        assert!((v - (0.6 - 0.085 + 0.25)).abs() < 1e-14);
    }

    #[test]
    fn gaussian_off_node_is_second_order() {
        let err = |n: usize| {
            let g = Arc::new(Grid::<f64>::line(n, -5.0, 5.0, Boundary::Dirichlet).unwrap());
            let f = RealField::from_fn(g, |q| (-q[0] * q[0]).exp()).unwrap();
            let x = 0.3217;
            (interpolate(&f, &[x]).unwrap() - (-x * x).exp()).abs()
        };
        let h = 10.0 / 100.0;
        assert!(err(101) < h * h);
        assert!(err(201) < err(101));
    }

    #[test]
    fn periodic_axes_wrap_and_dirichlet_rejects() {
        let g = Arc::new(Grid::<f64>::line(16, 0.0, 1.0, Boundary::Periodic).unwrap());
        let f = RealField::from_fn(g, |q| q[0]).unwrap();
        assert!((interpolate(&f, &[2.25]).unwrap() - 0.25).abs() < 1e-14);
        let gd = Arc::new(Grid::<f64>::line(16, 0.0, 1.0, Boundary::Dirichlet).unwrap());
        let fd = RealField::zeros(gd);
        assert!(matches!(interpolate(&fd, &[1.01]), Err(Error::OutOfDomain { .. })));
        assert!(interpolate(&fd, &[1.0]).is_ok());
    }
}
