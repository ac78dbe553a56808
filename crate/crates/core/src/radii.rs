//! Upper bounds on the circumradius of a spectrahedron from the moment hierarchy.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::momrelax::{build_pmi_relaxation, linearize, CheckOptions, Poly, PolyMatrix};
use crate::pencil::LinearPencil;
use crate::sdpcore::{solve, Block, Residuals, Status};

/// Cap on `L_y(‖x − c‖²)`. Without it an unbounded relaxation is typically only
/// weakly infeasible on the sos side, which no interior-point ray certifies.
/// A bound at the cap is reported as [`Error::Unbounded`].
pub const RADIUS_CAP_SQ: f64 = 1e6;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RadiusOutcome {
    pub order: usize,
    /// Upper bound on `max ‖x − center‖²` over `S_A`.
    pub radius_sq: f64,
    pub status: Status,
    pub residuals: Residuals,
    pub iterations: usize,
}

/// `ν²(t)`: the order-`t` moment bound on `max ‖x − c‖²` subject to `A(x) ⪰ 0`.
///
/// For a centrally symmetric `S_A` centered at `c` this bounds the squared
/// circumradius; otherwise it bounds the squared radius of the smallest ball
/// centered at `c`. An unbounded relaxation gives [`Error::Unbounded`].
pub fn circumradius_sq(p: &LinearPencil, center: &[f64], t: usize, opts: &CheckOptions) -> Result<RadiusOutcome> {
    let n = p.n();
    if center.len() != n {
        return Err(invalid(format!("center has length {}, the pencil has {n} variables", center.len())));
    }
    let mut dist = Poly::zero(n);
    for (i, &c) in center.iter().enumerate() {
        let d = Poly::var(n, i).add(&Poly::constant(n, -c));
        dist = dist.add(&d.mul(&d));
    }
    let mut relax = build_pmi_relaxation(&dist.scale(-1.0), &PolyMatrix::from_pencil(p, n), t)?;
    // RADIUS_CAP_SQ − L_y(dist) ≥ 0 as a 1×1 diagonal block.
    let blk = relax.problem.blocks.len();
    relax.problem.blocks.push(Block::Diag(1));
    let mut constant = 0.0;
    for (pos, coef) in linearize(&dist, &relax.full)? {
        if pos == 0 {
            constant += coef;
        } else {
            let k = relax.unknowns.iter().position(|&u| u == pos).expect("every moment is an unknown");
            relax.problem.constraints[k].push(blk, 0, 0, coef);
        }
    }
    relax.problem.c.push(blk, 0, 0, RADIUS_CAP_SQ - constant);
    let sol = solve(&relax.problem, &opts.solver)?;
    match sol.status {
        Status::PrimalInfeasible => return Err(Error::Unbounded),
        Status::DualInfeasible => return Err(invalid("the spectrahedron is empty")),
        _ if !sol.usable(opts.accept_residual) => {
            return Err(Error::NumericalFailure(format!(
                "circumradius relaxation t={t}: status {:?}, residuals {:?}",
                sol.status, sol.residuals
            )));
        }
        _ => {}
    }
    let radius_sq = -relax.value(&sol);
    if radius_sq >= RADIUS_CAP_SQ * (1.0 - 1e-6) {
        return Err(Error::Unbounded);
    }
    Ok(RadiusOutcome {
        order: t,
        radius_sq,
        status: sol.status,
        residuals: sol.residuals,
        iterations: sol.iterations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundedness {
    /// `N − ‖x‖² ≥ 0` on `S_A`, certified at the given order.
    Bounded(u64),
    /// No finite bound at this order. This does not show that `S_A` is unbounded.
    Unknown,
}

/// Smallest integer `N` with `ν²(t) ≤ N` about the origin, when the relaxation is finite.
pub fn boundedness_certificate(p: &LinearPencil, t: usize, opts: &CheckOptions) -> Result<Boundedness> {
    match circumradius_sq(p, &vec![0.0; p.n()], t, opts) {
        // Absorb solver noise around integers such as the elliptope's n.
        Ok(out) => Ok(Boundedness::Bounded((out.radius_sq - 1e-6).ceil().max(0.0) as u64)),
        Err(Error::Unbounded) => Ok(Boundedness::Unknown),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pencil::{ball_pencil, elliptope_pencil, polytope_pencil};
    use crate::search::sampled_radius_sq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn opts() -> CheckOptions {
        CheckOptions::default()
    }

    fn unit_square() -> LinearPencil {
        // [-1, 1]² as 1 ± x_i ≥ 0.
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
        polytope_pencil(&a, &[1.0; 4]).unwrap()
    }

    #[test]
    fn elliptope_three() {
        let out = circumradius_sq(&elliptope_pencil(3).unwrap(), &[0.0; 3], 2, &opts()).unwrap();
        assert!((out.radius_sq - 3.0).abs() < 1e-3, "{}", out.radius_sq);
        assert_eq!(boundedness_certificate(&elliptope_pencil(3).unwrap(), 2, &opts()).unwrap(), Boundedness::Bounded(3));
    }

    #[test]
    fn ball_radius() {
        // Order 1 only sees first moments through the pencil, so ‖x‖² is free.
        assert!(matches!(circumradius_sq(&ball_pencil(3, 1.7).unwrap(), &[0.0; 3], 1, &opts()), Err(Error::Unbounded)));
        let out = circumradius_sq(&ball_pencil(3, 1.7).unwrap(), &[0.0; 3], 2, &opts()).unwrap();
        assert!((out.radius_sq - 1.7 * 1.7).abs() < 1e-6, "{}", out.radius_sq);
    }

    #[test]
    fn halfline_is_unknown() {
        let a = polytope_pencil(&DMatrix::from_element(1, 1, 1.0), &[0.0]).unwrap();
        for t in [1, 2] {
            assert_eq!(boundedness_certificate(&a, t, &opts()).unwrap(), Boundedness::Unknown);
        }
    }

    #[test]
    fn square_corners() {
        // The square [-1, 1]² has its vertices at squared distance 2.
        let out = circumradius_sq(&unit_square(), &[0.0; 2], 2, &opts()).unwrap();
        assert!((out.radius_sq - 2.0).abs() < 1e-6, "{}", out.radius_sq);
        assert_eq!(boundedness_certificate(&unit_square(), 2, &opts()).unwrap(), Boundedness::Bounded(2));
    }

    #[test]
    fn wrong_center_length() {
        assert!(circumradius_sq(&unit_square(), &[0.0], 1, &opts()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]

        #[test]
        fn bounds_are_monotone_and_valid(cx in -0.5f64..0.5, cy in -0.5f64..0.5, nu in 0.3f64..2.0) {
            let p = ball_pencil(2, nu).unwrap();
            let c = [cx, cy];
            let r2 = circumradius_sq(&p, &c, 2, &opts()).unwrap().radius_sq;
            let r3 = circumradius_sq(&p, &c, 3, &opts()).unwrap().radius_sq;
            prop_assert!(r3 <= r2 + 1e-6);
            let sampled = sampled_radius_sq(&p, &c, 200, 7).unwrap();
            prop_assert!(r3 >= sampled - 1e-6);
        }
    }
}
