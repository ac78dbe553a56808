use nalgebra::DMatrix;

use super::*;
use crate::pencil::{ball_pencil, disk_pencil};
use crate::sdpcore::{solve, SolverOptions, Status};

fn disks(nu: f64) -> ContainmentProblem {
    ContainmentProblem::new(ball_pencil(2, nu).unwrap(), disk_pencil(1.0).unwrap()).unwrap()
}

fn interval() -> PolyMatrix {
    PolyMatrix::scalar(Poly::constant(1, 1.0).add(&Poly::var(1, 0).mul(&Poly::var(1, 0)).scale(-1.0)))
}

fn pmi_value(f: &Poly, g: &PolyMatrix, t: usize) -> f64 {
    let relax = build_pmi_relaxation(f, g, t).unwrap();
    let sol = solve(&relax.problem, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    relax.value(&sol)
}

#[test]
fn scalar_lasserre_examples() {
    let x = Poly::var(1, 0);
    assert!(pmi_value(&x.mul(&x), &interval(), 1).abs() < 1e-7);
    assert!((pmi_value(&x.scale(-1.0), &interval(), 1) + 1.0).abs() < 1e-7);
}

#[test]
fn order_below_initial_is_rejected() {
    let x = Poly::var(1, 0);
    let cube = x.mul(&x).mul(&x);
    assert!(matches!(build_pmi_relaxation(&cube, &interval(), 1), Err(crate::Error::OrderTooSmall { order: 1, min: 2 })));
    assert!(matches!(build_containment_relaxation(&disks(0.5), 1), Err(crate::Error::OrderTooSmall { order: 1, min: 2 })));
}

#[test]
fn disk_relaxation_sizes() {
    let relax = build_containment_relaxation(&disks(0.7), 2).unwrap();
    assert_eq!(relax.moment_size, 15);
    assert_eq!(relax.localizing_sizes, vec![25]);
    assert_eq!(relaxation_sizes(2, 3, 2, 2), (15, 25));
    // Even-z moments of degree ≤ 4 in 4 variables, minus y_0.
    let even = MonomialBasis::new(4, 4).monomials().iter().filter(|e| (e[2] + e[3]) % 2 == 0).count();
    assert_eq!(relax.num_moments(), even - 1);
}

#[test]
fn point_moments_are_feasible() {
    let cp = disks(0.8);
    let relax = build_containment_relaxation(&cp, 2).unwrap();
    for (x, z) in [([0.3, -0.2], [1.2, 0.5]), ([0.0, 0.8], [0.0, -2.0]), ([-0.5, 0.1], [0.6, 0.8])] {
        let pt: Vec<f64> = x.iter().chain(z.iter()).copied().collect();
        let y = relax.full.evaluate(&pt);
        let mut slack: Vec<DMatrix<f64>> = relax.problem.blocks.iter().map(|b| DMatrix::zeros(b.size(), b.size())).collect();
        relax.problem.c.add_to_dense(1.0, &mut slack);
        for (a, &pos) in relax.problem.constraints.iter().zip(&relax.unknowns) {
            a.add_to_dense(-y[pos], &mut slack);
        }
        for m in &slack {
            let e = m.clone().symmetric_eigen().eigenvalues.min();
            assert!(e >= -1e-9 * (1.0 + m.amax()), "{e}");
        }
        // The objective at the point moments equals zᵀB(x)z.
        let obj: f64 = relax.offset - relax.problem.b.iter().zip(&relax.unknowns).map(|(b, &pos)| b * y[pos]).sum::<f64>();
        assert!((obj - containment_objective(&cp.b).evaluate(&pt)).abs() < 1e-12);
    }
}

#[test]
fn disk_order_two_matches_oracle() {
    let opts = CheckOptions::default();
    let out = solve_mu_mom(&disks(0.7), 2, &opts).unwrap();
    assert!((out.value - 0.010051).abs() < 1e-4, "{}", out.value);
    assert_eq!(out.verdict, Verdict::Certified);
    let out = solve_mu_mom(&disks(std::f64::consts::FRAC_1_SQRT_2), 2, &opts).unwrap();
    assert!(out.value.abs() < 1e-5, "{}", out.value);
}

#[test]
fn negative_bound_without_violation_is_inconclusive() {
    // ν = 0.8 is contained, but the order-2 bound is negative.
    let out = solve_mu_mom(&disks(0.8), 2, &CheckOptions::default()).unwrap();
    assert!((out.value + 0.26274).abs() < 1e-3, "{}", out.value);
    assert_eq!(out.verdict, Verdict::Inconclusive);
    assert!(out.witness.is_none());
}

#[test]
fn violated_containment_is_refuted() {
    let cp = disks(1.1);
    let out = solve_mu_mom(&cp, 2, &CheckOptions::default()).unwrap();
    assert_eq!(out.verdict, Verdict::Refuted);
    let w = out.witness.unwrap();
    assert!(cp.a.evaluate(&w).unwrap().min_eigenvalue().unwrap() >= 0.0);
    assert!(cp.b.evaluate(&w).unwrap().min_eigenvalue().unwrap() < 0.0);
}

#[test]
fn empty_inner_set_is_vacuously_certified() {
    // diag(−1) is never PSD.
    let a = crate::pencil::polytope_pencil(&DMatrix::zeros(1, 2), &[-1.0]).unwrap();
    let cp = ContainmentProblem::new(a, disk_pencil(1.0).unwrap()).unwrap();
    let out = solve_mu_mom(&cp, 2, &CheckOptions::default()).unwrap();
    assert_eq!(out.verdict, Verdict::Certified);
}

#[test]
fn radii_are_validated() {
    assert!(ContainmentProblem::with_radii(ball_pencil(2, 1.0).unwrap(), disk_pencil(1.0).unwrap(), 2.0, 1.0).is_err());
    assert!(ContainmentProblem::new(ball_pencil(3, 1.0).unwrap(), disk_pencil(1.0).unwrap()).is_err());
}
