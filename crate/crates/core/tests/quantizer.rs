use std::sync::Arc;

use hvq_core::analytic::AnalyticFn;
use hvq_core::field::{Axis, Boundary, ComplexField, Grid};
use hvq_core::quantizer::{
    expectation, hermiticity_defect, ordering_gap, ordering_gap_interior, quantize, ClassicalHamiltonian, EmParticle,
};
use hvq_core::Cplx;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn line(n: usize, lo: f64, hi: f64) -> Arc<Grid<f64>> {
    Arc::new(Grid::line(n, lo, hi, Boundary::Dirichlet).unwrap())
}

fn random_field(grid: &Arc<Grid<f64>>, seed: &[(f64, f64)]) -> ComplexField<f64> {
    let n = seed.len();
    let mut i = 0;
    ComplexField::from_fn(grid.clone(), |_| {
        let (a, b) = seed[i % n];
        i += 1;
        Cplx::new(a, b * (i as f64 * 0.37).cos())
    })
    .unwrap()
}

#[test]
fn quadratic_mass_gap_is_hbar_squared() {
    for hbar in [1.0, 0.5] {
        let g = line(512, -10.0, 10.0);
        let gap = ordering_gap(&AnalyticFn::polynomial(0, vec![0.0, 0.0, 1.0]), &g, hbar).unwrap();
        let worst = ordering_gap_interior(&g)
            .map(|i| ((gap.data()[i] - hbar * hbar) / (hbar * hbar)).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-3, "hbar={hbar}: relative deviation {worst}");
    }
}

/// Independently assembled matrices: D has the central fourth-order weights
/// on interior nodes and reads boundary nodes as zero.
fn dense_momentum(n: usize, h: f64, hbar: f64) -> DMatrix<Cplx<f64>> {
    let mut p = DMatrix::from_element(n, n, Cplx::new(0.0, 0.0));
    let w = [(-2isize, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0)];
    for i in 1..n - 1 {
        for (off, c) in w {
            let j = i as isize + off;
            if j >= 1 && j <= n as isize - 2 {
                p[(i, j as usize)] = Cplx::new(0.0, -hbar * c / (12.0 * h));
            }
        }
    }
    p
}

#[test]
fn linear_mass_gap_matches_dense_commutator_algebra() {
    let n = 64;
    let g = line(n, -4.0, 4.0);
    let h = g.axis(0).spacing();
    let hbar = 1.0;
    let x = g.axis(0).coords();
    let p = dense_momentum(n, h, hbar);
    let b = DMatrix::from_diagonal(&DVector::from_iterator(n, x.iter().map(|&v| Cplx::new(v, 0.0))));
    let m = &p * &b * &p - (&p * &p * &b + &b * &p * &p).scale(0.5);
    let sigma = 8.0 / 4.0;
    let psi = DVector::from_iterator(n, x.iter().map(|&v| Cplx::new((-(v / sigma).powi(2) / 2.0).exp(), 0.0)));
    let want = &m * &psi;
    let gap = ordering_gap(&AnalyticFn::polynomial(0, vec![0.0, 1.0]), &g, hbar).unwrap();
    for i in ordering_gap_interior(&g) {
        let oracle = (want[i] / psi[i]).re;
        assert!((gap.data()[i] - oracle).abs() < 1e-10, "node {i}: {} vs {oracle}", gap.data()[i]);
        // [p, [p, q]] = 0, so the gap vanishes for linear B
        assert!(oracle.abs() < 1e-9);
    }
}

#[test]
fn discrete_eigenvector_expectation_is_eigenvalue() {
    let n = 64;
    let g = line(n, -6.0, 6.0);
    let h = g.axis(0).spacing();
    let op = quantize(&ClassicalHamiltonian::EmParticle(EmParticle::harmonic(1.0, 1.0, vec![0.0])), &g, 1.0).unwrap();
    let m = n - 2;
    let mut mat = DMatrix::zeros(m, m);
    for j in 0..m {
        let e = ComplexField::from_fn(g.clone(), {
            let mut k = 0;
            move |_| {
                k += 1;
                Cplx::new(if k - 1 == j + 1 { 1.0 } else { 0.0 }, 0.0)
            }
        })
        .unwrap();
        let col = op.apply(&e).unwrap();
        for i in 0..m {
            mat[(i, j)] = col.data()[i + 1].re;
        }
    }
    let eig = nalgebra::SymmetricEigen::new(mat.clone());
    let (idx, lambda) = eig.eigenvalues.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &v)| {
        if v < acc.1 {
            (i, v)
        } else {
            acc
        }
    });
    let v = eig.eigenvectors.column(idx);
    let mut data = vec![Cplx::new(0.0, 0.0); n];
    for i in 0..m {
        data[i + 1] = Cplx::new(v[i] / h.sqrt(), 0.0);
    }
    let psi = ComplexField::new(g, data).unwrap();
    let e = expectation(&op, &psi).unwrap();
    assert!((e - lambda).abs() < 1e-10);
    assert!((lambda - 0.5).abs() < 1e-4, "ground level {lambda}");
}

#[test]
fn em_operator_equals_expanded_ordering() {
    let g = line(200, -5.0, 5.0);
    let (m, e, c) = (1.5, 2.0, 0.8);
    let kappa = e / c;
    let a = AnalyticFn::polynomial(0, vec![0.3, 0.2]);
    let v = AnalyticFn::polynomial(0, vec![0.0, 0.0, 1.0]);
    let em = EmParticle {
        mass: m,
        charge: e,
        c_light: c,
        vector_potential: vec![a.clone()],
        scalar_potential: Some(v.clone()),
    };
    let full = quantize(&ClassicalHamiltonian::EmParticle(em), &g, 1.0).unwrap();
    let expanded = ClassicalHamiltonian::Sum(vec![
        (1.0, ClassicalHamiltonian::pdm(AnalyticFn::constant(1.0 / (2.0 * m)))),
        (1.0, ClassicalHamiltonian::linear_drift(a.times(-kappa / m))),
        (1.0, ClassicalHamiltonian::Potential { v: a.product(&a).times(kappa * kappa / (2.0 * m)).plus(&v.times(e)) }),
    ]);
    let exp_op = quantize(&expanded, &g, 1.0).unwrap();
    let psi = random_field(&g, &[(0.3, -1.0), (0.9, 0.2), (-0.4, 0.7)]);
    let lhs = full.apply(&psi).unwrap();
    let rhs = exp_op.apply(&psi).unwrap();
    let diff = lhs.sub(&rhs).unwrap().sup_norm();
    assert!(diff < 1e-9 * lhs.sup_norm(), "{diff}");
}

fn catalog() -> Vec<(ClassicalHamiltonian<f64>, Arc<Grid<f64>>)> {
    let g1 = line(48, -3.0, 3.0);
    let g2 = Arc::new(
        Grid::new(vec![Axis::dirichlet(16, -2.0, 2.0).unwrap(), Axis::periodic(16, -2.0, 2.0).unwrap()]).unwrap(),
    );
    let g3 = Arc::new(
        Grid::new(vec![
            Axis::dirichlet(10, -2.0, 2.0).unwrap(),
            Axis::dirichlet(10, -2.0, 2.0).unwrap(),
            Axis::periodic(8, -2.0, 2.0).unwrap(),
        ])
        .unwrap(),
    );
    let b = AnalyticFn::polynomial(0, vec![1.0, 0.2, 0.3]);
    let em = EmParticle {
        mass: 1.2,
        charge: 1.0,
        c_light: 0.7,
        vector_potential: vec![AnalyticFn::polynomial(0, vec![0.1, -0.5])],
        scalar_potential: Some(AnalyticFn::harmonic(2.0, vec![0.3])),
    };
    vec![
        (ClassicalHamiltonian::EmParticle(em), g1.clone()),
        (ClassicalHamiltonian::pdm(b.clone()), g1.clone()),
        (ClassicalHamiltonian::linear_drift(b.clone()), g1.clone()),
        (ClassicalHamiltonian::measure_momentum(0.9), g2.clone()),
        (ClassicalHamiltonian::measure_position(1.3), g2.clone()),
        (ClassicalHamiltonian::measure_linear_observable(0.6, b), g2),
        (ClassicalHamiltonian::measure_angular_z(0.8), g3),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_catalog_operator_is_hermitian(
        a in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 7..13),
        b in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 5..11),
    ) {
        for (h, g) in catalog() {
            let op = quantize(&h, &g, 1.0).unwrap();
            let phi = random_field(&g, &a);
            let psi = random_field(&g, &b);
            let defect = hermiticity_defect(&op, &phi, &psi).unwrap();
            prop_assert!(defect < 1e-8, "{}: {defect}", op.descriptor());
        }
    }

    #[test]
    fn quantize_is_linear_in_sums(
        ca in -3.0f64..3.0,
        cb in -3.0f64..3.0,
        seed in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3..9),
    ) {
        let g = line(64, -3.0, 3.0);
        let h1 = ClassicalHamiltonian::pdm(AnalyticFn::polynomial(0, vec![0.5, 0.0, 0.1]));
        let h2 = ClassicalHamiltonian::EmParticle(EmParticle::harmonic(1.0, 2.0, vec![0.0]));
        let sum = quantize(&ClassicalHamiltonian::Sum(vec![(ca, h1.clone()), (cb, h2.clone())]), &g, 1.0).unwrap();
        let psi = random_field(&g, &seed);
        let lhs = sum.apply(&psi).unwrap();
        let rhs = quantize(&h1, &g, 1.0).unwrap().apply(&psi).unwrap().scale(ca)
            .add(&quantize(&h2, &g, 1.0).unwrap().apply(&psi).unwrap().scale(cb)).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().sup_norm() <= 1e-12 * (1.0 + lhs.sup_norm()));
    }
}
