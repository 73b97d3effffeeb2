use rand::Rng;

use crate::classical::MASS_TOLERANCE;
use crate::error::{usage, Result};
use crate::field::{interpolate, Axis, Boundary, RealField};
use crate::hv::replica_rng;
use crate::scalar::Real;

/// Extent of the quadrature cell around node `i`: half a spacing each side,
/// cut at dirichlet ends.
fn cell<T: Real>(axis: &Axis<T>, i: usize) -> (T, T) {
    let h = axis.spacing();
    let x = axis.coord(i);
    let half = h * T::lit(0.5);
    match axis.boundary() {
        Boundary::Periodic => (x - half, x + half),
        Boundary::Dirichlet => ((x - half).max(axis.lower()), (x + half).min(axis.upper())),
    }
}

fn wrap<T: Real>(axis: &Axis<T>, x: T) -> T {
    match axis.boundary() {
        Boundary::Periodic => {
            let l = axis.extent();
            let mut y = x - axis.lower();
            y = y - l * (y / l).floor();
            axis.lower() + y
        }
        Boundary::Dirichlet => x,
    }
}

fn pick<T: Real, R: Rng + ?Sized>(cdf: &[T], rng: &mut R) -> usize {
    let total = *cdf.last().expect("non-empty");
    let u = T::lit(rng.random::<f64>()) * total;
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

fn cumulative<T: Real>(mass: impl Iterator<Item = T>) -> Vec<T> {
    let mut acc = T::zero();
    mass.map(|m| {
        acc += m;
        acc
    })
    .collect()
}

fn jitter<T: Real, R: Rng + ?Sized>(axis: &Axis<T>, i: usize, rng: &mut R) -> T {
    let (a, b) = cell(axis, i);
    wrap(axis, a + (b - a) * T::lit(rng.random::<f64>()))
}

/// `n` points distributed per `rho`, deterministic in `seed`.
///
/// Ranks 1 and 2 use inverse-CDF sampling of the quadrature-cell masses
/// (marginal, then conditional) with uniform jitter inside the chosen cell.
/// Rank 3 uses rejection against the multilinear interpolant.
pub fn sample_density<T: Real>(rho: &RealField<T>, n: usize, seed: u64) -> Result<Vec<Vec<T>>> {
    if n == 0 {
        return usage("sample count must be positive");
    }
    if rho.min() < T::zero() {
        return usage("density must be non-negative");
    }
    let mass = rho.integrate();
    if (mass - T::one()).abs().as_f64() > MASS_TOLERANCE {
        return usage(format!("density integrates to {mass}, expected 1"));
    }
    let grid = rho.grid();
    let w = grid.weights();
    let cellmass: Vec<T> = rho.data().iter().zip(w).map(|(r, w)| *r * *w).collect();
    let mut rng = replica_rng(seed, 0);
    match grid.rank() {
        1 => {
            let cdf = cumulative(cellmass.iter().copied());
            Ok((0..n).map(|_| vec![jitter(grid.axis(0), pick(&cdf, &mut rng), &mut rng)]).collect())
        }
        2 => {
            let (n0, n1) = (grid.axis(0).len(), grid.axis(1).len());
            let marginal: Vec<T> = cumulative((0..n0).map(|i| cellmass[i * n1..(i + 1) * n1].iter().copied().sum()));
            let rows: Vec<Vec<T>> = (0..n0).map(|i| cumulative(cellmass[i * n1..(i + 1) * n1].iter().copied())).collect();
            Ok((0..n)
                .map(|_| {
                    let i = pick(&marginal, &mut rng);
                    let j = pick(&rows[i], &mut rng);
                    vec![jitter(grid.axis(0), i, &mut rng), jitter(grid.axis(1), j, &mut rng)]
                })
                .collect())
        }
        _ => {
            let top = rho.max();
            let mut out = Vec::with_capacity(n);
            let mut q = vec![T::zero(); grid.rank()];
            while out.len() < n {
                for (k, ax) in grid.axes().iter().enumerate() {
                    let (lo, len) = (ax.lower(), ax.extent());
                    q[k] = lo + len * T::lit(rng.random::<f64>());
                }
                let r = interpolate(rho, &q)?;
                if T::lit(rng.random::<f64>()) * top < r {
                    out.push(q.clone());
                }
            }
            Ok(out)
        }
    }
}

/// Cell masses of `rho` grouped into blocks of `factor` nodes per axis.
pub(crate) fn binned_mass<T: Real>(rho: &RealField<T>, factor: usize) -> (Vec<usize>, Vec<T>) {
    let grid = rho.grid();
    let dims: Vec<usize> = grid.axes().iter().map(|a| a.len().div_ceil(factor)).collect();
    let mut mass = vec![T::zero(); dims.iter().product()];
    for (flat, (r, w)) in rho.data().iter().zip(grid.weights()).enumerate() {
        let multi = grid.multi_index(flat);
        mass[bin_of(&multi, &dims, factor)] += *r * *w;
    }
    (dims, mass)
}

fn bin_of(multi: &[usize], dims: &[usize], factor: usize) -> usize {
    multi.iter().zip(dims).fold(0, |acc, (i, d)| acc * d + i / factor)
}

/// Node whose quadrature cell holds `x`.
fn node_of<T: Real>(axis: &Axis<T>, x: T) -> usize {
    let n = axis.len();
    let j = ((x - axis.lower()) / axis.spacing()).round().to_i64().unwrap_or(0);
    match axis.boundary() {
        Boundary::Periodic => j.rem_euclid(n as i64) as usize,
        Boundary::Dirichlet => j.clamp(0, n as i64 - 1) as usize,
    }
}

/// `sum_bins |count/n - P(bin)|` with bins of `factor` grid cells per axis.
pub fn binned_l1<T: Real>(points: &[Vec<T>], rho: &RealField<T>, factor: usize) -> Result<T> {
    if factor == 0 {
        return usage("bin factor must be positive");
    }
    if points.is_empty() {
        return usage("no points to histogram");
    }
    let grid = rho.grid();
    let (dims, mass) = binned_mass(rho, factor);
    let total: T = mass.iter().copied().sum();
    let mut counts = vec![0usize; mass.len()];
    for p in points {
        if p.len() != grid.rank() {
            return usage("point rank differs from the grid rank");
        }
        let multi: Vec<usize> = grid.axes().iter().zip(p).map(|(a, &x)| node_of(a, x)).collect();
        counts[bin_of(&multi, &dims, factor)] += 1;
    }
    let n = T::count(points.len());
    Ok(counts.iter().zip(&mass).map(|(&c, &m)| (T::count(c) / n - m / total).abs()).sum())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::field::Grid;

    #[test]
    fn samples_stay_in_domain_and_repeat() {
        let grid = Arc::new(Grid::<f64>::line(33, -1.0, 1.0, Boundary::Dirichlet).unwrap());
        let rho = RealField::from_fn(grid.clone(), |_| 0.5).unwrap();
        let a = sample_density(&rho, 500, 4).unwrap();
        assert_eq!(a, sample_density(&rho, 500, 4).unwrap());
        assert!(a.iter().all(|p| p[0] >= -1.0 && p[0] <= 1.0));
    }

    #[test]
    fn exact_histogram_has_zero_distance() {
        let grid = Arc::new(Grid::<f64>::line(8, 0.0, 8.0, Boundary::Periodic).unwrap());
        let rho = RealField::from_fn(grid.clone(), |_| 0.125).unwrap();
        let pts: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 + 0.1]).collect();
        assert!(binned_l1(&pts, &rho, 1).unwrap() < 1e-15);
        assert!(binned_l1(&pts, &rho, 2).unwrap() < 1e-15);
    }

    #[test]
    fn zero_samples_is_usage_error() {
        let grid = Arc::new(Grid::<f64>::line(8, 0.0, 8.0, Boundary::Periodic).unwrap());
        let rho = RealField::from_fn(grid.clone(), |_| 0.125).unwrap();
        assert!(sample_density(&rho, 0, 1).is_err());
    }
}
