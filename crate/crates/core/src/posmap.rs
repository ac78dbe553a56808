//! Complete positivity as a sufficient containment test.
//!
//! `S_A ⊆ S_B` follows from a PSD `C = (C_ij)` with `B_p = Σ_ij a^p_ij C_ij`
//! for every `p`: the map `A_p ↦ B_p` then extends to a completely positive map.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::momrelax::{solve_mu_mom, CheckOptions, ContainmentProblem, MomentOutcome, Verdict};
use crate::pencil::{extend, LinearPencil, MapSpec};
use crate::sdpcore::{feasibility_probe, solve, Block, BlockSparse, ProbeResult, Residuals, SdpProblem, Sense, Status};
use crate::search::{find_violation, grid_mu};
use crate::sosrelax::{lambda_sos, SosOutcome};
use crate::symcore::SymMatrix;

/// Residual allowed in the witness identities.
pub const WITNESS_TOL: f64 = 1e-7;

/// A PSD `kl × kl` matrix viewed as `k × k` blocks of size `l × l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpWitness {
    pub k: usize,
    pub l: usize,
    pub c: SymMatrix,
    /// Optimal `s` in `C = Y + s I`, `Y ⪰ 0`; the smallest eigenvalue of `C` is at least this.
    pub margin: f64,
}

impl CpWitness {
    pub fn block(&self, i: usize, j: usize) -> DMatrix<f64> {
        self.c.as_matrix().view((i * self.l, j * self.l), (self.l, self.l)).into_owned()
    }

    /// `Σ_ij a_ij C_ij` for a `k × k` coefficient.
    pub fn apply(&self, a: &SymMatrix) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.l, self.l);
        for i in 0..self.k {
            for j in 0..self.k {
                let v = a.get(i, j);
                if v != 0.0 {
                    out += self.block(i, j) * v;
                }
            }
        }
        out
    }

    /// Largest violation among `C ⪰ 0` and `Σ a^p_ij C_ij = B_p`.
    pub fn residual(&self, a: &LinearPencil, b: &LinearPencil) -> Result<f64> {
        if a.k() != self.k || b.k() != self.l || a.n() != b.n() {
            return Err(invalid("witness does not match the pencils"));
        }
        let mut worst = (-self.c.min_eigenvalue()?).max(0.0);
        for (ap, bp) in a.coeffs().iter().zip(b.coeffs()) {
            worst = worst.max((self.apply(ap) - bp.as_matrix()).amax());
        }
        Ok(worst)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum CpOutcome {
    Feasible(CpWitness),
    /// The margin problem has a negative optimum, or the linear identities
    /// alone are inconsistent (`margin` is `None` then).
    Infeasible { margin: Option<f64> },
    Inconclusive { reason: String },
}

impl CpOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, CpOutcome::Feasible(_))
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, CpOutcome::Infeasible { .. })
    }

    pub fn margin(&self) -> Option<f64> {
        match self {
            CpOutcome::Feasible(w) => Some(w.margin),
            CpOutcome::Infeasible { margin } => *margin,
            CpOutcome::Inconclusive { .. } => None,
        }
    }
}

/// `max s` subject to `Σ a^p_ij (Y + sI)_ij = B_p`, `Y ⪰ 0`, `s + w = 1`, `w ≥ 0`.
fn margin_problem(a: &LinearPencil, b: &LinearPencil) -> SdpProblem {
    let (k, l) = (a.k(), b.k());
    let mut problem = SdpProblem::new(vec![Block::Psd(k * l), Block::Diag(1)], Sense::Max, "complete positivity SDFP");
    let mut s_col = Vec::new();
    for (ap, bp) in a.coeffs().iter().zip(b.coeffs()) {
        let am = ap.as_matrix();
        let trace = am.trace();
        for u in 0..l {
            for v in u..l {
                // ⟨M, C⟩ with M[(i,u),(j,v)] = a_ij, symmetrized into the upper triangle.
                let mut acc: HashMap<(usize, usize), f64> = HashMap::new();
                for i in 0..k {
                    for j in 0..k {
                        let val = am[(i, j)];
                        if val == 0.0 {
                            continue;
                        }
                        let (r, c) = (i * l + u, j * l + v);
                        let w = if r == c { val } else { 0.5 * val };
                        *acc.entry((r.min(c), r.max(c))).or_insert(0.0) += w;
                    }
                }
                let mut m = BlockSparse::new();
                let mut keys: Vec<_> = acc.into_iter().collect();
                keys.sort_by_key(|&(key, _)| key);
                for ((r, c), val) in keys {
                    m.push(0, r, c, val);
                }
                let row = problem.num_constraints();
                if u == v && trace != 0.0 {
                    s_col.push((row, trace));
                }
                problem.add_constraint(m, bp.get(u, v));
            }
        }
    }
    let cap_row = problem.num_constraints();
    let mut cap = BlockSparse::new();
    cap.push(1, 0, 0, 1.0);
    problem.add_constraint(cap, 1.0);
    s_col.push((cap_row, 1.0));
    problem.add_free(1.0, s_col);
    problem
}

/// The margin SDP of [`cp_sdfp`], for export.
pub fn cp_sdfp_problem(a: &LinearPencil, b: &LinearPencil, extended: bool) -> Result<SdpProblem> {
    if a.n() != b.n() {
        return Err(invalid(format!("pencils have {} and {} variables", a.n(), b.n())));
    }
    let a = if extended { extend(a) } else { a.clone() };
    Ok(margin_problem(&a, b))
}

/// [`CpOutcome`] with the solver report behind it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CpSolve {
    pub outcome: CpOutcome,
    pub status: Status,
    pub residuals: Residuals,
    pub iterations: usize,
}

/// Solves the complete-positivity SDFP. With `extended`, `A` is replaced by
/// `1 ⊕ A`, which leaves `S_A` unchanged but lets the constant block absorb slack.
pub fn cp_sdfp(a: &LinearPencil, b: &LinearPencil, extended: bool, opts: &CheckOptions) -> Result<CpOutcome> {
    cp_sdfp_solve(a, b, extended, opts).map(|s| s.outcome)
}

pub fn cp_sdfp_solve(a: &LinearPencil, b: &LinearPencil, extended: bool, opts: &CheckOptions) -> Result<CpSolve> {
    let problem = cp_sdfp_problem(a, b, extended)?;
    let a = if extended { extend(a) } else { a.clone() };
    let sol = solve(&problem, &opts.solver)?;
    let done = |outcome: CpOutcome| CpSolve { outcome, status: sol.status, residuals: sol.residuals, iterations: sol.iterations };
    match sol.status {
        Status::PrimalInfeasible => return Ok(done(CpOutcome::Infeasible { margin: None })),
        Status::DualInfeasible => {
            return Err(Error::NumericalFailure("margin problem reported unbounded although s ≤ 1".into()));
        }
        _ if !sol.usable(opts.accept_residual) => {
            return Ok(done(CpOutcome::Inconclusive {
                reason: format!("status {:?}, residuals {:?}", sol.status, sol.residuals),
            }));
        }
        _ => {}
    }
    let s = sol.u[0];
    let tol = opts.tol * (1.0 + b.max_norm());
    if s < -tol {
        return Ok(done(CpOutcome::Infeasible { margin: Some(s) }));
    }
    let mut c = sol.x[0].clone();
    for i in 0..c.nrows() {
        c[(i, i)] += s;
    }
    let witness = CpWitness { k: a.k(), l: b.k(), c: SymMatrix::new(c)?, margin: s };
    let res = witness.residual(&a, b)?;
    if res > WITNESS_TOL * (1.0 + b.max_norm()) {
        return Ok(done(CpOutcome::Inconclusive { reason: format!("witness residual {res:.2e}") }));
    }
    Ok(done(CpOutcome::Feasible(witness)))
}

/// `Σ_ij E_ij ⊗ Φ(E_ij)`, with `Φ` extended to all matrices through its skew part.
pub fn choi_matrix(m: &MapSpec) -> Result<SymMatrix> {
    let (k, l) = (m.k, m.l);
    let mut c = DMatrix::zeros(k * l, k * l);
    for i in 0..k {
        for j in 0..k {
            c.view_mut((i * l, j * l), (l, l)).copy_from(&m.image_of_unit(i, j));
        }
    }
    if (&c - c.transpose()).amax() > 1e-12 * (1.0 + c.amax()) {
        return Err(invalid("map does not preserve symmetry on all matrices"));
    }
    SymMatrix::new(c)
}

/// Outcomes of every containment test on one instance, in the order of the
/// implication chain, with any inconsistencies among them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ImplicationReport {
    pub sdfp: CpOutcome,
    pub sdfp_extended: CpOutcome,
    pub sos0: std::result::Result<SosOutcome, String>,
    pub moments: Vec<std::result::Result<MomentOutcome, String>>,
    /// Sampled upper bound on `μ`.
    pub grid_mu: Option<f64>,
    /// Point of `S_A` where `B` is not PSD, if the search found one.
    pub violation: Option<Vec<f64>>,
    pub inconsistencies: Vec<String>,
}

/// Slack used for every comparison in the chain.
pub const CHAIN_TOL: f64 = 1e-6;

fn chain_inconsistencies(r: &ImplicationReport) -> Vec<String> {
    let mut out = Vec::new();
    let eps = CHAIN_TOL;
    if r.sdfp.is_feasible() && r.sdfp_extended.is_infeasible() {
        out.push("SDFP feasible but the extended SDFP is infeasible".to_string());
    }
    let sos = r.sos0.as_ref().ok().map(|o| o.value);
    if let Some(v) = sos {
        if r.sdfp_extended.is_feasible() && v < -eps {
            out.push(format!("extended SDFP feasible but λ_sos(0) = {v:.3e}"));
        }
        if v > eps && r.sdfp_extended.margin().is_some_and(|s| s < -eps) {
            out.push(format!("λ_sos(0) = {v:.3e} but the extended SDFP is infeasible"));
        }
    }
    let moms: Vec<&MomentOutcome> = r.moments.iter().filter_map(|m| m.as_ref().ok()).collect();
    if let Some(m2) = moms.iter().find(|m| m.order == 2) {
        if r.sdfp_extended.is_feasible() && m2.value < -eps {
            out.push(format!("extended SDFP feasible but μ_mom(2) = {:.3e}", m2.value));
        }
    }
    for w in moms.windows(2) {
        if w[1].order == w[0].order + 1 && w[0].value > w[1].value + eps * (1.0 + w[1].value.abs()) {
            out.push(format!("μ_mom({}) = {:.6e} exceeds μ_mom({}) = {:.6e}", w[0].order, w[0].value, w[1].order, w[1].value));
        }
    }
    if let Some(g) = r.grid_mu {
        for m in &moms {
            if m.value > g + eps * (1.0 + g.abs()) {
                out.push(format!("μ_mom({}) = {:.6e} exceeds the sampled μ = {g:.6e}", m.order, m.value));
            }
        }
    }
    if r.violation.is_some() {
        if r.sdfp.is_feasible() || r.sdfp_extended.is_feasible() {
            out.push("SDFP certified a containment that a sampled point violates".to_string());
        }
        if sos.is_some_and(|v| v > eps) || moms.iter().any(|m| m.value > eps) {
            out.push("a relaxation certified a containment that a sampled point violates".to_string());
        }
    }
    out
}

/// Runs the SDFP (plain and extended), `λ_sos(0)`, `μ_mom(2..=t_max)` and the
/// sampling search, then checks the implications between them.
///
/// Returns [`Error::InvariantViolation`] listing every inconsistency; use
/// [`implication_chain`] to get the report regardless.
pub fn implication_report(cp: &ContainmentProblem, t_max: usize, opts: &CheckOptions) -> Result<ImplicationReport> {
    let report = implication_chain(cp, t_max, opts)?;
    if report.inconsistencies.is_empty() {
        Ok(report)
    } else {
        Err(Error::InvariantViolation(report.inconsistencies.join("; ")))
    }
}

/// The report of [`implication_report`] without turning inconsistencies into an error.
pub fn implication_chain(cp: &ContainmentProblem, t_max: usize, opts: &CheckOptions) -> Result<ImplicationReport> {
    if t_max < 2 {
        return Err(Error::OrderTooSmall { order: t_max, min: 2 });
    }
    if matches!(feasibility_probe(&cp.a), ProbeResult::Empty) {
        return Err(invalid("the inner spectrahedron is empty"));
    }
    let sdfp = cp_sdfp(&cp.a, &cp.b, false, opts)?;
    let sdfp_extended = cp_sdfp(&cp.a, &cp.b, true, opts)?;
    let sos0 = lambda_sos(cp, 0, opts).map_err(|e| e.to_string());
    let moments: Vec<_> = (2..=t_max).map(|t| solve_mu_mom(cp, t, opts).map_err(|e| e.to_string())).collect();
    let grid = grid_mu(&cp.a, &cp.b, cp.r, cp.big_r, &opts.search);
    let mut hints = Vec::new();
    for m in moments.iter().flatten() {
        if let Some(w) = &m.witness {
            hints.push(w.clone());
        }
    }
    let violation = moments
        .iter()
        .flatten()
        .find(|m| m.verdict == Verdict::Refuted)
        .and_then(|m| m.witness.clone())
        .or_else(|| find_violation(&cp.a, &cp.b, &hints, cp.tol_cert(opts.tol), &opts.search));
    let mut report = ImplicationReport {
        sdfp,
        sdfp_extended,
        sos0,
        moments,
        grid_mu: grid,
        violation,
        inconsistencies: Vec::new(),
    };
    report.inconsistencies = chain_inconsistencies(&report);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pencil::{ball_pencil, disk_pencil, map_to_pencils};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn opts() -> CheckOptions {
        CheckOptions::default()
    }

    fn disks(nu: f64) -> (LinearPencil, LinearPencil) {
        (ball_pencil(2, nu).unwrap(), disk_pencil(1.0).unwrap())
    }

    #[test]
    fn disk_threshold() {
        let (a, b) = disks(0.7);
        match cp_sdfp(&a, &b, false, &opts()).unwrap() {
            CpOutcome::Feasible(w) => assert!(w.residual(&a, &b).unwrap() < WITNESS_TOL),
            other => panic!("{other:?}"),
        }
        let (a, b) = disks(0.708);
        assert!(cp_sdfp(&a, &b, false, &opts()).unwrap().is_infeasible());
    }

    #[test]
    fn choi_matrices() {
        let id = choi_matrix(&MapSpec::identity(2)).unwrap();
        let mut expect = DMatrix::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                expect[(i * 2 + i, j * 2 + j)] = 1.0;
            }
        }
        assert_eq!(id.as_matrix(), &expect);
        assert!(id.is_psd(1e-12).unwrap());

        let trace = MapSpec::from_fn(3, 1, |a| DMatrix::from_element(1, 1, a.trace())).unwrap();
        assert_eq!(choi_matrix(&trace).unwrap().as_matrix(), &DMatrix::identity(3, 3));

        let choi = choi_matrix(&MapSpec::choi_example()).unwrap();
        assert!(choi.min_eigenvalue().unwrap() < -0.5);
    }

    #[test]
    fn identity_map_is_cp_certified() {
        let (a, b) = map_to_pencils(&MapSpec::identity(3)).unwrap();
        assert!(cp_sdfp(&a, &b, true, &opts()).unwrap().is_feasible());
    }

    #[test]
    fn choi_example_is_not_cp() {
        let (a, b) = map_to_pencils(&MapSpec::choi_example()).unwrap();
        assert!(cp_sdfp(&a, &b, true, &opts()).unwrap().is_infeasible());
    }

    #[test]
    fn chain_on_disks() {
        let (a, b) = disks(0.7);
        let cp = ContainmentProblem::new(a, b).unwrap();
        let r = implication_report(&cp, 2, &opts()).unwrap();
        assert!(r.sdfp.is_feasible());
        assert!(r.sos0.as_ref().unwrap().value >= 0.0);
        assert!(r.violation.is_none());

        let (a, b) = disks(1.1);
        let cp = ContainmentProblem::new(a, b).unwrap();
        let r = implication_report(&cp, 2, &opts()).unwrap();
        assert!(r.sdfp_extended.is_infeasible());
        assert!(r.violation.is_some());
    }

    #[test]
    fn empty_inner_set_is_rejected() {
        let a = LinearPencil::new(vec![
            SymMatrix::from_row_slice(2, &[0.0, 1.0, 1.0, 0.0]).unwrap(),
            SymMatrix::from_row_slice(2, &[1.0, 0.0, 0.0, 0.0]).unwrap(),
        ])
        .unwrap();
        let b = LinearPencil::new(vec![SymMatrix::identity(1), SymMatrix::zeros(1)]).unwrap();
        let cp = ContainmentProblem::new(a, b).unwrap();
        assert!(matches!(implication_report(&cp, 2, &opts()), Err(Error::InvalidInput(_))));
    }

    /// Random Kraus map `A ↦ Σ K_r A K_rᵀ`, completely positive by construction.
    fn kraus_map(k: usize, l: usize, terms: usize, seed: u64) -> MapSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ks: Vec<DMatrix<f64>> =
            (0..terms).map(|_| DMatrix::from_fn(l, k, |_, _| rng.gen_range(-1.0..1.0))).collect();
        MapSpec::from_fn(k, l, |a| ks.iter().map(|kr| kr * a * kr.transpose()).sum()).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn psd_choi_matrix_gives_feasible_sdfp(seed in 0u64..1000, k in 2usize..4, l in 1usize..4, terms in 1usize..4) {
            let m = kraus_map(k, l, terms, seed);
            prop_assert!(choi_matrix(&m).unwrap().min_eigenvalue().unwrap() >= -1e-10);
            let (a, b) = map_to_pencils(&m).unwrap();
            let out = cp_sdfp(&a, &b, true, &opts()).unwrap();
            let ok = matches!(&out, CpOutcome::Feasible(w) if w.residual(&extend(&a), &b).unwrap() <= WITNESS_TOL);
            prop_assert!(ok, "{:?}", out);
        }
    }
}
