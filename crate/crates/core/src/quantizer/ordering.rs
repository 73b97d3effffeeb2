use std::ops::Range;
use std::sync::Arc;

use super::hamiltonian::ClassicalHamiltonian;
use super::operator::quantize;
use crate::analytic::AnalyticFn;
use crate::error::{usage, Error, Result};
use crate::field::{Boundary, ComplexField, Grid, RealField};
use crate::scalar::{Cplx, Real};

/// Nodes this close to a dirichlet edge see the zero ghosts of two stacked
/// first-derivative stencils and are excluded from the gap.
pub const ORDERING_GAP_MARGIN: usize = 5;

/// Node range where the ordering gap is meaningful.
pub fn ordering_gap_interior<T: Real>(grid: &Grid<T>) -> Range<usize> {
    let n = grid.axis(0).len();
    match grid.axis(0).boundary() {
        Boundary::Periodic => 0..n,
        Boundary::Dirichlet => ORDERING_GAP_MARGIN..n.saturating_sub(ORDERING_GAP_MARGIN),
    }
}

/// `(p B p - (p² B + B p²)/2) psi / psi` on a centred Gaussian test field of
/// width a quarter of the domain. Nodes outside [`ordering_gap_interior`] are 0.
pub fn ordering_gap<T: Real>(b: &AnalyticFn<T>, grid: &Arc<Grid<T>>, hbar: T) -> Result<RealField<T>> {
    if grid.rank() != 1 {
        return usage("ordering gap needs a one-dimensional grid");
    }
    let ax = grid.axis(0);
    let center = (ax.lower() + ax.upper()) * T::lit(0.5);
    let sigma = ax.extent() * T::lit(0.25);
    let psi = ComplexField::from_fn(grid.clone(), |q| {
        let x = (q[0] - center) / sigma;
        Cplx::new((-(x * x) * T::lit(0.5)).exp(), T::zero())
    })?;
    ordering_gap_with(b, &psi, hbar)
}

/// Ordering gap evaluated on a caller-supplied nodeless test field.
pub fn ordering_gap_with<T: Real>(b: &AnalyticFn<T>, psi: &ComplexField<T>, hbar: T) -> Result<RealField<T>> {
    let grid = psi.grid().clone();
    if grid.rank() != 1 {
        return usage("ordering gap needs a one-dimensional grid");
    }
    let interior = ordering_gap_interior(&grid);
    let peak = psi.sup_norm();
    let floor = peak * T::lit(1e-8);
    if let Some(i) = interior.clone().find(|&i| psi.data()[i].norm() < floor) {
        return Err(Error::DegenerateTest(format!("test field nearly vanishes at node {i}")));
    }
    let pbp = quantize(&ClassicalHamiltonian::pdm(b.clone()), &grid, hbar)?;
    let p2 = quantize(&ClassicalHamiltonian::pdm(AnalyticFn::constant(T::one())), &grid, hbar)?;
    let bvals = b.sample(&grid, T::zero())?;
    let b_psi = psi.weighted(&bvals)?;
    let lhs = pbp.apply(psi)?;
    let sym = p2.apply(&b_psi)?.add(&p2.apply(psi)?.weighted(&bvals)?)?.scale(T::lit(0.5));
    let diff = lhs.sub(&sym)?;
    let mut out = vec![T::zero(); grid.len()];
    for i in interior {
        out[i] = (diff.data()[i] / psi.data()[i]).re;
    }
    RealField::new(grid, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_mass_has_no_gap() {
        let g = Arc::new(Grid::line(128, -5.0, 5.0, Boundary::Dirichlet).unwrap());
        let gap = ordering_gap(&AnalyticFn::constant(0.5), &g, 1.0).unwrap();
        assert!(gap.sup_norm() < 1e-9, "{}", gap.sup_norm());
    }

    #[test]
    fn rejects_rank_two_and_nodal_test_fields() {
        let g2 = Arc::new(
            Grid::new(vec![
                crate::field::Axis::dirichlet(16, -1.0, 1.0).unwrap(),
                crate::field::Axis::dirichlet(16, -1.0, 1.0).unwrap(),
            ])
            .unwrap(),
        );
        assert!(matches!(ordering_gap(&AnalyticFn::constant(1.0), &g2, 1.0), Err(Error::Usage(_))));
        let g1 = Arc::new(Grid::line(33, -1.0, 1.0, Boundary::Dirichlet).unwrap());
        let psi = ComplexField::from_fn(g1, |q| Cplx::new(q[0], 0.0)).unwrap();
        assert!(matches!(
            ordering_gap_with(&AnalyticFn::constant(1.0), &psi, 1.0),
            Err(Error::DegenerateTest(_))
        ));
    }
}
