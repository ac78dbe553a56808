//! The sos-matrix hierarchy: the largest `λ` such that
//! `B(x) − λ I − (⟨S_ij(x), A(x)⟩)_ij` and `S(x)` are both sos-matrices.
//!
//! Both sos-matrices use the Gram form `(W_t(x) ⊗ I)ᵀ Q (W_t(x) ⊗ I)` with the
//! full degree-`t` monomial vector `W_t`; coefficients are matched monomial by
//! monomial up to degree `2t + 1`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::momrelax::{add_exponents, binomial, CheckOptions, ContainmentProblem, MonomialBasis, Verdict};
use crate::sdpcore::{solve, Block, BlockSparse, Residuals, SdpProblem, SdpSolution, Sense, Status};

/// The assembled SDP: blocks `Q_S` (size `kl·N`), `Q_T` (size `l·N`) and the free `λ`.
#[derive(Clone, Debug)]
pub struct SosRelaxation {
    pub problem: SdpProblem,
    pub order: usize,
    /// Monomials up to degree `2t + 1` indexing the coefficient rows.
    pub full: MonomialBasis,
    /// `(monomial, u, v)` of each constraint row, `u ≤ v`.
    pub rows: Vec<(usize, usize, usize)>,
}

impl SosRelaxation {
    /// Affine equality count `m` of the built SDP.
    pub fn num_equations(&self) -> usize {
        self.rows.len()
    }

    pub fn num_unknowns(&self) -> usize {
        self.problem.num_unknowns()
    }
}

/// Builds the order-`t` sos relaxation. The annulus radii play no role here.
pub fn build_sos_relaxation(cp: &ContainmentProblem, t: usize) -> Result<SosRelaxation> {
    let (n, k, l) = (cp.a.n(), cp.a.k(), cp.b.k());
    let w = MonomialBasis::new(n, t);
    let full = MonomialBasis::new(n, 2 * t + 1);
    let nw = w.len();
    let kl = k * l;
    let mut problem = SdpProblem::new(vec![Block::Psd(kl * nw), Block::Psd(l * nw)], Sense::Max, "sos-matrix relaxation");

    let mut row_of: HashMap<(usize, usize, usize), usize> = HashMap::new();
    let mut rows = Vec::new();
    let mut mats: Vec<BlockSparse> = Vec::new();
    let mut row = |g: usize, u: usize, v: usize, mats: &mut Vec<BlockSparse>| -> usize {
        let key = (g, u.min(v), u.max(v));
        *row_of.entry(key).or_insert_with(|| {
            rows.push(key);
            mats.push(BlockSparse::new());
            mats.len() - 1
        })
    };
    // Every coefficient row exists, even when only B contributes to it.
    for g in 0..full.len() {
        for u in 0..l {
            for v in u..l {
                row(g, u, v, &mut mats);
            }
        }
    }
    let push = |m: &mut BlockSparse, blk: usize, r: usize, c: usize, val: f64| {
        if r == c {
            m.push(blk, r, c, val);
        } else {
            m.push(blk, r, c, 0.5 * val);
        }
    };
    let unit = |p: usize| -> Vec<u16> {
        let mut e = vec![0u16; n];
        if p > 0 {
            e[p - 1] = 1;
        }
        e
    };

    for (ai, a) in w.monomials().iter().enumerate() {
        for (bi, b) in w.monomials().iter().enumerate() {
            let ab = add_exponents(a, b);
            // ⟨S_uv, A_p⟩ contributes at x^{α+β+e_p}.
            for p in 0..=n {
                let g = full.index_of(&add_exponents(&ab, &unit(p))).expect("degree within 2t+1");
                let ap = cp.a.coeff(p).as_matrix();
                for u in 0..l {
                    for v in u..l {
                        let ri = row(g, u, v, &mut mats);
                        for ka in 0..k {
                            for kb in 0..k {
                                let val = ap[(ka, kb)];
                                if val == 0.0 {
                                    continue;
                                }
                                let r = ai * kl + u * k + ka;
                                let c = bi * kl + v * k + kb;
                                push(&mut mats[ri], 0, r, c, val);
                            }
                        }
                    }
                }
            }
            let g = full.index_of(&ab).expect("degree within 2t");
            for u in 0..l {
                for v in u..l {
                    let ri = row(g, u, v, &mut mats);
                    push(&mut mats[ri], 1, ai * l + u, bi * l + v, 1.0);
                }
            }
        }
    }

    let zero = vec![0u16; n];
    let mut lambda_col = Vec::new();
    for (i, (&(g, u, v), m)) in rows.iter().zip(mats).enumerate() {
        let exp = full.monomial(g);
        let rhs = if *exp == zero {
            cp.b.coeff(0).get(u, v)
        } else if exp.iter().map(|&e| e as usize).sum::<usize>() == 1 {
            let p = exp.iter().position(|&e| e == 1).expect("degree one");
            cp.b.coeff(p + 1).get(u, v)
        } else {
            0.0
        };
        if g == 0 && u == v {
            lambda_col.push((i, 1.0));
        }
        problem.add_constraint(m, rhs);
    }
    problem.add_free(1.0, lambda_col);
    Ok(SosRelaxation { problem, order: t, full, rows })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SosOutcome {
    pub order: usize,
    /// `λ_sos(t)`; `+∞` if unbounded (empty `S_A`), `−∞` if infeasible.
    pub value: f64,
    pub verdict: Verdict,
    pub status: Status,
    pub residuals: Residuals,
    pub iterations: usize,
    pub unknowns: usize,
    pub equations: usize,
    /// Largest violation of the coefficient identities by the returned Gram matrices.
    pub identity_residual: f64,
}

/// Largest absolute violation of the coefficient-matching equations.
pub fn identity_residual(relax: &SosRelaxation, sol: &SdpSolution) -> f64 {
    let p = &relax.problem;
    let lambda = sol.u.first().copied().unwrap_or(0.0);
    let col = &p.free_columns[0];
    p.constraints
        .iter()
        .zip(&p.b)
        .enumerate()
        .map(|(i, (a, b))| {
            let free: f64 = col.iter().filter(|(r, _)| *r == i).map(|(_, c)| c * lambda).sum();
            (a.dot_dense(&sol.x) + free - b).abs()
        })
        .fold(0.0, f64::max)
}

/// `λ_sos(t)`: nonnegative (within the certification tolerance) certifies
/// containment; a negative value is only a lower bound and stays inconclusive.
pub fn lambda_sos(cp: &ContainmentProblem, t: usize, opts: &CheckOptions) -> Result<SosOutcome> {
    let relax = build_sos_relaxation(cp, t)?;
    let sol = solve(&relax.problem, &opts.solver)?;
    let tol = cp.tol_cert(opts.tol);
    let out = |value: f64, verdict: Verdict, res: f64| SosOutcome {
        order: t,
        value,
        verdict,
        status: sol.status,
        residuals: sol.residuals,
        iterations: sol.iterations,
        unknowns: relax.num_unknowns(),
        equations: relax.num_equations(),
        identity_residual: res,
    };
    match sol.status {
        Status::DualInfeasible => return Ok(out(f64::INFINITY, Verdict::Certified, 0.0)),
        Status::PrimalInfeasible => return Ok(out(f64::NEG_INFINITY, Verdict::Inconclusive, f64::NAN)),
        _ if !sol.usable(opts.accept_residual) => {
            return Err(Error::NumericalFailure(format!(
                "sos relaxation t={t}: status {:?}, residuals {:?} after {} iterations",
                sol.status, sol.residuals, sol.iterations
            )));
        }
        _ => {}
    }
    let value = sol.value();
    let verdict = if value >= -tol { Verdict::Certified } else { Verdict::Inconclusive };
    Ok(out(value, verdict, identity_residual(&relax, &sol)))
}

/// `(sos_count, moment_count)` from the closed-form unknown counts, with `m`
/// the number of affine equations to subtract.
pub fn count_unknowns(n: usize, k: usize, l: usize, t: usize, m: usize) -> (i64, i64) {
    let nb = binomial(n + t, t) as i64;
    let (k, l, m) = (k as i64, l as i64, m as i64);
    let sos = 1 + (nb * (k * k * l * l * nb + l * l * nb + k * l + l)) / 2 - m * l * (l + 1);
    let mb = binomial(n + l as usize + t, t) as i64;
    let moment = mb * (mb - 1) / 2;
    (sos, moment)
}
