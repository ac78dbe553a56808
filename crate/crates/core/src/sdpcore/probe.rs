use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::hsd::solve;
use super::problem::{Block, BlockSparse, SdpProblem, Sense, SolverOptions};
use crate::pencil::LinearPencil;
use crate::reduce::lineality_space;
use crate::symcore::{nullspace, orthogonal_complement, SymMatrix};

/// Radius of the ball the probe searches in; only matters when no interior
/// point exists inside it.
const PROBE_RADIUS: f64 = 1e4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ProbeResult {
    /// `x ∈ S_A` with `λ_min(A(x)) = margin` (capped at 1).
    NonEmpty { x: Vec<f64>, margin: f64 },
    Empty,
    Unknown,
}

/// Decides whether `S_A` is nonempty by maximizing `s` subject to
/// `A(x) − s I ⪰ 0`, `s ≤ 1`. A vanishing optimum triggers facial reduction,
/// which also settles weakly infeasible pencils.
pub fn feasibility_probe(p: &LinearPencil) -> ProbeResult {
    probe_rec(p, 0)
}

fn tol_for(p: &LinearPencil) -> f64 {
    1e-7 * (1.0 + p.max_norm())
}

fn probe_rec(p: &LinearPencil, depth: usize) -> ProbeResult {
    if depth > p.k() + 1 {
        return ProbeResult::Unknown;
    }
    let tol = tol_for(p);
    let Ok(lin) = lineality_space(p) else { return ProbeResult::Unknown };
    let n = p.n();
    let (q, v) = if lin.ncols() > 0 {
        let Ok(v) = orthogonal_complement(&lin, n) else { return ProbeResult::Unknown };
        match p.affine_substitute(&vec![0.0; n], &v) {
            Ok(q) => (q, v),
            Err(_) => return ProbeResult::Unknown,
        }
    } else {
        (p.clone(), DMatrix::identity(n, n))
    };
    let lift = |u: &[f64]| -> Vec<f64> {
        if n == 0 {
            return Vec::new();
        }
        let u = nalgebra::DVector::from_column_slice(u);
        (&v * u).iter().copied().collect()
    };

    if q.n() == 0 {
        let Ok(lmin) = q.coeff(0).min_eigenvalue() else { return ProbeResult::Unknown };
        return if lmin >= -tol {
            ProbeResult::NonEmpty { x: vec![0.0; n], margin: lmin.min(1.0) }
        } else {
            ProbeResult::Empty
        };
    }

    let Ok(sol) = solve(&margin_problem(&q), &SolverOptions::default()) else { return ProbeResult::Unknown };
    if !sol.usable(1e-6) {
        return ProbeResult::Unknown;
    }
    let qn = q.n();
    let xs = &sol.y[..qn];
    let s = sol.y[qn];
    let radius = xs.iter().map(|v| v * v).sum::<f64>().sqrt();
    if s > tol {
        let margin = q.evaluate(xs).and_then(|m| m.min_eigenvalue()).unwrap_or(s);
        if margin > 0.0 {
            return ProbeResult::NonEmpty { x: lift(xs), margin: margin.min(1.0) };
        }
    }
    if s < -tol && radius < 0.999 * PROBE_RADIUS {
        return ProbeResult::Empty;
    }

    // The optimum is (nearly) zero: the multiplier X exposes a face containing S_A.
    let x = SymMatrix::new(sol.x[0].clone());
    let Ok((vals, vecs)) = x.and_then(|x| x.eigen()) else { return ProbeResult::Unknown };
    let top = vals.max();
    if !(top > 0.0) {
        return ProbeResult::Unknown;
    }
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 1e-6 * top).collect();
    let u = vecs.select_columns(keep.iter());
    let k = q.k();
    let r = u.ncols();
    // Solve A(x) U = 0 in the least-squares sense.
    let mut m = DMatrix::zeros(k * r, qn);
    for pidx in 0..qn {
        let col = q.coeff(pidx + 1).as_matrix() * &u;
        m.set_column(pidx, &nalgebra::DVector::from_column_slice(col.as_slice()));
    }
    let rhs0 = q.coeff(0).as_matrix() * &u;
    let rhs = -nalgebra::DVector::from_column_slice(rhs0.as_slice());
    let Ok(x0) = m.clone().svd(true, true).solve(&rhs, 1e-12 * (1.0 + m.amax())) else {
        return ProbeResult::Unknown;
    };
    let resid = (&m * &x0 - &rhs).norm();
    if resid > 1e-6 * (1.0 + rhs.norm() + m.norm()) {
        return ProbeResult::Empty;
    }
    let x0v: Vec<f64> = x0.iter().copied().collect();
    let Ok(nsp) = nullspace(&m) else { return ProbeResult::Unknown };
    if r == k {
        // A(x) vanishes on the whole affine set.
        return ProbeResult::NonEmpty { x: lift(&x0v), margin: 0.0 };
    }
    let Ok(w) = orthogonal_complement(&u, k) else { return ProbeResult::Unknown };
    if nsp.ncols() == 0 {
        let Ok(lmin) = q.evaluate(&x0v).and_then(|a| a.min_eigenvalue()) else { return ProbeResult::Unknown };
        return if lmin >= -tol {
            ProbeResult::NonEmpty { x: lift(&x0v), margin: lmin.min(1.0) }
        } else {
            ProbeResult::Empty
        };
    }
    let Ok(face) = q.affine_substitute(&x0v, &nsp).and_then(|f| f.congruence(&w)) else {
        return ProbeResult::Unknown;
    };
    match probe_rec(&face, depth + 1) {
        ProbeResult::NonEmpty { x: uu, margin } => {
            let uu = nalgebra::DVector::from_column_slice(&uu);
            let xq: Vec<f64> = (&x0 + &nsp * uu).iter().copied().collect();
            // The face pencil is degenerate in the full space, so the margin there is 0.
            let lmin = q.evaluate(&xq).and_then(|a| a.min_eigenvalue()).unwrap_or(f64::NAN);
            ProbeResult::NonEmpty { x: lift(&xq), margin: lmin.min(margin).min(1.0) }
        }
        other => other,
    }
}

/// `max s  s.t.  A(x) − s I ⪰ 0,  s ≤ 1,  ‖x‖ ≤ PROBE_RADIUS`, in dual form with `y = (x, s)`.
fn margin_problem(p: &LinearPencil) -> SdpProblem {
    let (n, k) = (p.n(), p.k());
    let mut prob = SdpProblem::new(vec![Block::Psd(k), Block::Diag(1), Block::Psd(n + 1)], Sense::Min, "feasibility probe");
    let a0 = p.coeff(0).as_matrix();
    for i in 0..k {
        for j in i..k {
            prob.c.push(0, i, j, a0[(i, j)]);
        }
    }
    prob.c.push(1, 0, 0, 1.0);
    for i in 0..=n {
        prob.c.push(2, i, i, PROBE_RADIUS);
    }
    prob.c.compress();
    for pidx in 0..n {
        let ap = p.coeff(pidx + 1).as_matrix();
        let mut a = BlockSparse::new();
        for i in 0..k {
            for j in i..k {
                a.push(0, i, j, -ap[(i, j)]);
            }
        }
        a.push(2, 0, pidx + 1, -1.0);
        prob.add_constraint(a, 0.0);
    }
    let mut a = BlockSparse::new();
    for i in 0..k {
        a.push(0, i, i, 1.0);
    }
    a.push(1, 0, 0, 1.0);
    prob.add_constraint(a, 1.0);
    prob
}
