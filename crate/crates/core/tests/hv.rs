use std::sync::Arc;

use hvq_core::field::{Boundary, ComplexField, Grid, RealField};
use hvq_core::hv::{
    antithetic_step, average_branches, branch_continuity_rhs, branch_rhs, branch_step, check_phase_symmetry,
    evolve_branches, fluctuation_identity_residual, madelung_continuity_rhs, sample_lambdas, BranchMode,
    BranchState, LambdaDistribution,
};
use hvq_core::quantizer::EmParticle;
use hvq_core::quantum::{evolve_madelung, madelung_evolve_to, madelung_step_with, to_madelung, MadelungState};
use hvq_core::Cplx;
use proptest::prelude::*;

fn line(n: usize, lo: f64, hi: f64, bc: Boundary) -> Arc<Grid<f64>> {
    Arc::new(Grid::line(n, lo, hi, bc).unwrap())
}

fn coherent(grid: &Arc<Grid<f64>>, x0: f64, k0: f64) -> MadelungState<f64> {
    let psi = ComplexField::from_fn(grid.clone(), |q| Cplx::from_polar((-(q[0] - x0).powi(2) / 2.0).exp(), k0 * q[0]))
        .unwrap()
        .normalized()
        .unwrap();
    to_madelung(&psi, 1.0).unwrap()
}

fn l2(a: &RealField<f64>, b: &RealField<f64>) -> f64 {
    let d = a.sub(b).unwrap();
    d.mul(&d).unwrap().integrate().sqrt()
}

#[test]
fn two_point_sampler_is_unbiased() {
    let n = 10_000;
    let draws = sample_lambdas(&LambdaDistribution::TwoPoint { hbar: 1.0 }, n, 11);
    let plus = draws.iter().filter(|&&l| l > 0.0).count() as f64 / n as f64;
    assert!((plus - 0.5).abs() < 0.02);
    let mean = draws.iter().sum::<f64>() / n as f64;
    assert!(mean.abs() < 3.0 / (n as f64).sqrt());
}

#[test]
fn ball_surface_sampler_statistics() {
    let n = 10_000;
    let hbar = 0.7_f64;
    let draws = sample_lambdas(&LambdaDistribution::BallSurface { hbar }, n, 2024);
    assert!(draws.iter().all(|l| l.abs() == hbar));
    let plus = draws.iter().filter(|&&l| l > 0.0).count() as f64 / n as f64;
    assert!((plus - 0.5).abs() < 1.5 / (n as f64).sqrt());
    let mean = draws.iter().sum::<f64>() / n as f64;
    assert!(mean.abs() < 3.0 * hbar / (n as f64).sqrt());
}

#[test]
fn generalized_two_point_mean() {
    let d = LambdaDistribution::GeneralizedTwoPoint { a: 2.0, w: 0.8 };
    let n = 20_000;
    let mean = sample_lambdas(&d, n, 5).iter().sum::<f64>() / n as f64;
    let sd = 2.0 * (1.0 - 0.6f64 * 0.6).sqrt() / (n as f64).sqrt();
    assert!((mean - d.mean()).abs() < 4.0 * sd);
}

#[test]
fn opposite_branches_share_action_rate_and_mirror_diffusion() {
    let grid = line(128, -4.5, 4.5, Boundary::Dirichlet);
    let em = EmParticle::harmonic(1.0, 1.0, vec![0.0]);
    let st = coherent(&grid, 0.4, 0.7);
    let (rp, sp) = branch_rhs(&em, &BranchState::from_madelung(&st, 1.0)).unwrap();
    let (rm, sm) = branch_rhs(&em, &BranchState::from_madelung(&st, -1.0)).unwrap();
    let (r0, _) = branch_rhs(&em, &BranchState::from_madelung(&st, 0.0)).unwrap();
    assert_eq!(sp.data(), sm.data());
    let up = rp.sub(&r0).unwrap();
    let down = rm.sub(&r0).unwrap();
    assert!(up.add(&down).unwrap().sup_norm() < 1e-10 * up.sup_norm());
    assert!(up.sup_norm() > 1e-3);
}

#[test]
fn zero_lambda_is_the_classical_pair() {
    let grid = line(128, -4.5, 4.5, Boundary::Dirichlet);
    let em = EmParticle::harmonic(1.0, 1.0, vec![0.0]);
    let st = coherent(&grid, 0.4, 0.7);
    let b = branch_step(&em, &BranchState::from_madelung(&st, 0.0), 1e-3).unwrap();
    let c = madelung_step_with(&em, &st, 1e-3, 1.0, false).unwrap();
    assert_eq!(b.rho.data(), c.rho.data());
    assert_eq!(b.s.data(), c.s.data());
}

#[test]
fn frozen_eigenstate_density_gives_minus_energy() {
    let grid = line(128, -4.5, 4.5, Boundary::Dirichlet);
    let em = EmParticle::harmonic(1.0, 1.0, vec![0.0]);
    let st = coherent(&grid, 0.0, 0.0);
    for lambda in [1.0, -1.0] {
        let (_, ds) = branch_rhs(&em, &BranchState::from_madelung(&st, lambda)).unwrap();
        assert!(ds.data().iter().all(|v| (v + 0.5).abs() < 1e-9));
    }
}

#[test]
fn lambda_average_of_continuity_is_madelung() {
    let grid = line(256, -6.0, 6.0, Boundary::Dirichlet);
    let em = EmParticle::harmonic(1.0, 1.0, vec![0.0]);
    let st = coherent(&grid, 0.3, 1.2);
    let plus = branch_continuity_rhs(&em, 1.0, &st.rho, &st.s, 0.0).unwrap();
    let minus = branch_continuity_rhs(&em, -1.0, &st.rho, &st.s, 0.0).unwrap();
    let avg = plus.add(&minus).unwrap().scale(0.5);
    let mad = madelung_continuity_rhs(&em, &st.rho, &st.s, 0.0).unwrap();
    assert!(avg.sub(&mad).unwrap().sup_norm() < 1e-12);
}

#[test]
fn shared_rho_preserves_phase_symmetry() {
    let grid = line(128, -4.5, 4.5, Boundary::Dirichlet);
    let em = EmParticle::harmonic(1.0, 1.0, vec![0.0]);
    let st = coherent(&grid, 0.5, 0.0);
    let run = evolve_branches(&em, &st, 1.0, 2e-4, 200, BranchMode::SharedRho).unwrap();
    assert_eq!(run.discrepancy[0], 0.0);
    assert!(check_phase_symmetry(&run) < 1e-8);
    // the shared density follows the Madelung pair
    let mad = madelung_evolve_to(&em, &st, run.plus.t, 2e-4, 1.0).unwrap();
    assert!(run.plus.rho.sub(&mad.rho).unwrap().sup_norm() < 1e-12);
    let indep = evolve_branches(&em, &st, 1.0, 2e-4, 200, BranchMode::IndependentRho).unwrap();
    assert_eq!(indep.discrepancy[0], 0.0);
    assert!(check_phase_symmetry(&indep) > 0.0);
}

#[test]
fn averaging_rules() {
    let grid = line(64, -4.5, 4.5, Boundary::Dirichlet);
    let st = coherent(&grid, 0.0, 0.5);
    let p = BranchState::from_madelung(&st, 1.0);
    let m = BranchState::from_madelung(&st, -1.0);
    let avg = average_branches(&p, &m).unwrap();
    assert_eq!(avg.rho.data(), st.rho.data());
    assert_eq!(avg.s.data(), st.s.data());
    assert!(average_branches(&p, &p).is_err());
}

#[test]
fn averaged_branches_continue_as_madelung() {
    let grid = line(128, -4.5, 4.5, Boundary::Dirichlet);
    let em = EmParticle::harmonic(1.0, 1.0, vec![0.0]);
    let st = coherent(&grid, 0.5, 0.3);
    let dt = 2e-4;
    let p = branch_step(&em, &BranchState::from_madelung(&st, 1.0), dt).unwrap();
    let m = branch_step(&em, &BranchState::from_madelung(&st, -1.0), dt).unwrap();
    let avg = average_branches(&p, &m).unwrap();
    let mad = evolve_madelung(&em, &st, dt, 1.0).unwrap();
    // first-order lambda terms cancel; what is left is second order in dt
    assert!(avg.rho.sub(&mad.rho).unwrap().sup_norm() < 1e-6);
}

#[test]
fn antithetic_pair_is_second_order() {
    let grid = line(128, -4.5, 4.5, Boundary::Dirichlet);
    let em = EmParticle::harmonic(1.0, 1.0, vec![0.0]);
    let st = coherent(&grid, 0.5, 0.3);
    let err = |dt: f64| {
        let a = antithetic_step(&em, &st, 1.0, dt).unwrap();
        let b = madelung_evolve_to(&em, &st, 2.0 * dt, 2e-4, 1.0).unwrap();
        l2(&a.rho, &b.rho)
    };
    let (e1, e2) = (err(0.02), err(0.01));
    assert!((e1 / e2).log2() > 1.8, "{e1} {e2}");
}

#[test]
fn stationary_gaussian_returns_after_antithetic_pair() {
    let grid = line(128, -4.5, 4.5, Boundary::Dirichlet);
    let em = EmParticle::free(1.0);
    let st = coherent(&grid, 0.0, 0.0);
    let dt = 0.01;
    let back = antithetic_step(&em, &st, 1.0, dt).unwrap();
    let d = back.rho.sub(&st.rho).unwrap().sup_norm();
    assert!(d < 10.0 * dt * dt, "{d}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fluctuation_identity_holds(
        a1 in -0.5..0.5f64, a2 in -0.4..0.4f64, a3 in -0.3..0.3f64,
        p1 in 0.0..6.3f64, p2 in 0.0..6.3f64, p3 in 0.0..6.3f64,
    ) {
        let grid = line(1024, 0.0, std::f64::consts::TAU, Boundary::Periodic);
        let rho = RealField::from_fn(grid.clone(), |q| {
            let x = q[0];
            (a1 * (x + p1).cos() + a2 * (2.0 * x + p2).cos() + a3 * (3.0 * x + p3).cos()).exp()
        }).unwrap();
        let r = fluctuation_identity_residual(&rho).unwrap();
        prop_assert!(r.sup_norm() < 1e-6);
    }
}
