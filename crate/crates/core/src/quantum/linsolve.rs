//! Linear solvers for the Crank-Nicolson systems `(1 + i H dt / 2 hbar) x = b`.

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::scalar::{Cplx, Real};

/// Relative residual the iterative solver aims for.
pub const SOLVER_TARGET: f64 = 1e-13;
/// Relative residual above which a solve is reported as failed.
pub const SOLVER_ACCEPT: f64 = 1e-10;
const MAX_ITERATIONS: usize = 1000;

fn dot<T: Real>(a: &[Cplx<T>], b: &[Cplx<T>]) -> Cplx<T> {
    a.iter().zip(b).fold(Cplx::zero(), |acc, (x, y)| acc + x.conj() * y)
}

fn norm<T: Real>(a: &[Cplx<T>]) -> T {
    a.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
}

/// Complex BiCGSTAB started from `x`. Returns the solution and the final
/// relative residual.
pub(crate) fn bicgstab<T: Real>(
    apply: impl Fn(&[Cplx<T>]) -> Vec<Cplx<T>>,
    b: &[Cplx<T>],
    mut x: Vec<Cplx<T>>,
) -> Result<(Vec<Cplx<T>>, T)> {
    let bnorm = norm(b);
    if bnorm == T::zero() {
        return Ok((vec![Cplx::zero(); b.len()], T::zero()));
    }
    let target = T::lit(SOLVER_TARGET) * bnorm;
    let ax = apply(&x);
    let mut r: Vec<Cplx<T>> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut rnorm = norm(&r);
    let mut iterations = 0;
    if rnorm > target {
        let r_hat = r.clone();
        let one = Cplx::new(T::one(), T::zero());
        let (mut rho, mut alpha, mut omega) = (one, one, one);
        let mut v = vec![Cplx::zero(); b.len()];
        let mut p = vec![Cplx::zero(); b.len()];
        while iterations < MAX_ITERATIONS {
            iterations += 1;
            let rho_next = dot(&r_hat, &r);
            if rho_next.norm() == T::zero() {
                break;
            }
            let beta = (rho_next / rho) * (alpha / omega);
            for i in 0..p.len() {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            v = apply(&p);
            let denom = dot(&r_hat, &v);
            if denom.norm() == T::zero() {
                break;
            }
            alpha = rho_next / denom;
            let s: Vec<Cplx<T>> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
            if norm(&s) <= target {
                for i in 0..x.len() {
                    x[i] += alpha * p[i];
                }
                break;
            }
            let t = apply(&s);
            let tt = dot(&t, &t);
            omega = if tt.norm() == T::zero() { Cplx::zero() } else { dot(&t, &s) / tt };
            for i in 0..x.len() {
                x[i] += alpha * p[i] + omega * s[i];
                r[i] = s[i] - omega * t[i];
            }
            rho = rho_next;
            if norm(&r) <= target || omega.norm() == T::zero() {
                break;
            }
        }
        let ax = apply(&x);
        r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        rnorm = norm(&r);
    }
    let rel = rnorm / bnorm;
    if rel.as_f64() > SOLVER_ACCEPT || !rel.is_finite() {
        return Err(Error::Solver { residual: rel.as_f64(), iterations });
    }
    Ok((x, rel))
}

/// LU factors of a banded matrix without pivoting. Matrices of the form
/// `1 + i K` with Hermitian `K` have a positive definite Hermitian part, which
/// keeps elimination without pivoting stable.
#[derive(Clone, Debug)]
pub(crate) struct BandedLu<T> {
    n: usize,
    bw: usize,
    a: Vec<Cplx<T>>,
}

impl<T: Real> BandedLu<T> {
    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * (2 * self.bw + 1) + (j + self.bw - i)
    }

    /// Factors the matrix whose band entries are given in `band` (row-major,
    /// `2 bw + 1` entries per row, column offset `j - i + bw`).
    pub(crate) fn factor(n: usize, bw: usize, band: Vec<Cplx<T>>) -> Option<Self> {
        let mut lu = Self { n, bw, a: band };
        for k in 0..n {
            let pivot = lu.a[lu.at(k, k)];
            if pivot.norm() == T::zero() {
                return None;
            }
            for i in k + 1..(k + bw + 1).min(n) {
                let l = lu.a[lu.at(i, k)] / pivot;
                let ik = lu.at(i, k);
                lu.a[ik] = l;
                for j in k + 1..(k + bw + 1).min(n) {
                    let kj = lu.a[lu.at(k, j)];
                    let ij = lu.at(i, j);
                    lu.a[ij] -= l * kj;
                }
            }
        }
        Some(lu)
    }

    pub(crate) fn solve(&self, x: &mut [Cplx<T>]) {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let mut acc = x[i];
            for j in i.saturating_sub(bw)..i {
                acc -= self.a[self.at(i, j)] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..(i + bw + 1).min(n) {
                acc -= self.a[self.at(i, j)] * x[j];
            }
            x[i] = acc / self.a[self.at(i, i)];
        }
    }
}

/// Band of a linear map found by probing with `2 bw + 1` comb vectors, then
/// checked against a dense-looking test vector. Returns `None` when the map
/// has entries outside the band (e.g. periodic wrap-around).
pub(crate) fn probe_band<T: Real>(
    n: usize,
    bw: usize,
    apply: impl Fn(&[Cplx<T>]) -> Vec<Cplx<T>>,
) -> Option<Vec<Cplx<T>>> {
    let width = 2 * bw + 1;
    let mut band = vec![Cplx::zero(); n * width];
    for color in 0..width.min(n) {
        let probe: Vec<Cplx<T>> = (0..n)
            .map(|j| if j % width == color { Cplx::new(T::one(), T::zero()) } else { Cplx::zero() })
            .collect();
        let col = apply(&probe);
        for i in 0..n {
            // the unique probed column within reach of row i
            let lo = i.saturating_sub(bw);
            let hi = (i + bw).min(n - 1);
            if let Some(j) = (lo..=hi).find(|j| j % width == color) {
                band[i * width + (j + bw - i)] = col[i];
            }
        }
    }
    let test: Vec<Cplx<T>> = (0..n)
        .map(|j| {
            let x = T::count(j) * T::lit(0.7548776662466927);
            Cplx::new(x.sin() + T::lit(0.3), (x * T::lit(1.3)).cos())
        })
        .collect();
    let want = apply(&test);
    let mut err = T::zero();
    for i in 0..n {
        let mut acc: Cplx<T> = Cplx::zero();
        for j in i.saturating_sub(bw)..=(i + bw).min(n - 1) {
            acc += band[i * width + (j + bw - i)] * test[j];
        }
        err = err.max((acc - want[i]).norm());
    }
    let scale = want.iter().map(|z| z.norm()).fold(T::zero(), T::max) + T::one();
    (err <= T::lit(1e-11) * scale).then_some(band)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(x: &[Cplx<f64>]) -> Vec<Cplx<f64>> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let mut acc = x[i] * Cplx::new(1.0, 0.4);
                if i > 0 {
                    acc += x[i - 1] * Cplx::new(0.0, -0.2);
                }
                if i + 1 < n {
                    acc += x[i + 1] * Cplx::new(0.0, -0.2);
                }
                acc
            })
            .collect()
    }

    #[test]
    fn banded_lu_inverts_probed_operator() {
        let n = 40;
        let band = probe_band(n, 2, tridiag).unwrap();
        let lu = BandedLu::factor(n, 2, band).unwrap();
        let b: Vec<Cplx<f64>> = (0..n).map(|i| Cplx::new(i as f64, 1.0)).collect();
        let mut x = b.clone();
        lu.solve(&mut x);
        let back = tridiag(&x);
        for (u, v) in back.iter().zip(&b) {
            assert!((u - v).norm() < 1e-12);
        }
    }

    #[test]
    fn probe_detects_wraparound() {
        let wrap = |x: &[Cplx<f64>]| {
            let n = x.len();
            (0..n).map(|i| x[i] + x[(i + n - 1) % n]).collect::<Vec<_>>()
        };
        assert!(probe_band(16, 2, wrap).is_none());
    }

    #[test]
    fn bicgstab_converges_on_shifted_skew_system() {
        let n = 50;
        let b: Vec<Cplx<f64>> = (0..n).map(|i| Cplx::new((i as f64).sin(), 0.0)).collect();
        let (x, rel) = bicgstab(tridiag, &b, b.clone()).unwrap();
        assert!(rel < 1e-12);
        let back = tridiag(&x);
        for (u, v) in back.iter().zip(&b) {
            assert!((u - v).norm() < 1e-11);
        }
    }
}
