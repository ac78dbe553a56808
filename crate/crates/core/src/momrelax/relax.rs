use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::poly::{add_exponents, binomial, linearize, MonomialBasis, Poly, PolyMatrix};
use crate::error::{invalid, Error, Result};
use crate::pencil::LinearPencil;
use crate::sdpcore::{solve, Block, BlockSparse, Residuals, SdpProblem, SdpSolution, Sense, SolverOptions, Status};
use crate::search::{find_violation, SearchOptions};

/// Inner pencil `A`, outer pencil `B` and the annulus `r ≤ ‖z‖ ≤ R`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContainmentProblem {
    pub a: LinearPencil,
    pub b: LinearPencil,
    pub r: f64,
    pub big_r: f64,
}

impl ContainmentProblem {
    /// Uses the default annulus `r = 1`, `R = 2`.
    pub fn new(a: LinearPencil, b: LinearPencil) -> Result<Self> {
        Self::with_radii(a, b, 1.0, 2.0)
    }

    pub fn with_radii(a: LinearPencil, b: LinearPencil, r: f64, big_r: f64) -> Result<Self> {
        if a.n() != b.n() {
            return Err(invalid(format!("pencils have {} and {} variables", a.n(), b.n())));
        }
        if !(r > 0.0 && r <= big_r && big_r.is_finite()) {
            return Err(invalid(format!("annulus radii must satisfy 0 < r <= R, got r = {r}, R = {big_r}")));
        }
        Ok(ContainmentProblem { a, b, r, big_r })
    }

    /// `1e-7·(1 + max ‖B_p‖)` scaled by `base / 1e-7`.
    pub fn tol_cert(&self, base: f64) -> f64 {
        base * (1.0 + self.b.max_norm())
    }

    /// Divides a `μ`-scale value by `r²` (nonnegative) or `R²` (negative),
    /// putting it on the scale of `min λ_min(B(x))`.
    pub fn normalize(&self, mu: f64) -> f64 {
        if mu >= 0.0 {
            mu / (self.r * self.r)
        } else {
            mu / (self.big_r * self.big_r)
        }
    }
}

/// Moments `y_α` for `|α| ≤ 2t`, graded-lex ordered; `y_0 = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    pub vars: usize,
    pub degree: usize,
    pub values: Vec<f64>,
}

impl MomentVector {
    pub fn get(&self, basis: &MonomialBasis, exp: &[u16]) -> f64 {
        basis.index_of(exp).map_or(0.0, |i| self.values[i])
    }
}

/// An assembled moment relaxation together with the bookkeeping needed to read
/// the optimum back.
#[derive(Clone, Debug)]
pub struct MomentRelaxation {
    pub problem: SdpProblem,
    /// All monomials up to degree `2t`.
    pub full: MonomialBasis,
    /// Position in `full` of the moment behind each SDP constraint.
    pub unknowns: Vec<usize>,
    /// Constant term of the objective.
    pub offset: f64,
    pub order: usize,
    /// Side length of `M_t(y)` before any symmetry splitting.
    pub moment_size: usize,
    /// Side length of each localizing matrix before splitting.
    pub localizing_sizes: Vec<usize>,
}

impl MomentRelaxation {
    pub fn num_moments(&self) -> usize {
        self.unknowns.len()
    }

    /// `L_y(f)` at the optimum: the offset minus the midpoint of the solver's values.
    pub fn value(&self, sol: &SdpSolution) -> f64 {
        self.offset - sol.value()
    }

    pub fn moments(&self, sol: &SdpSolution) -> MomentVector {
        let mut values = vec![0.0; self.full.len()];
        values[0] = 1.0;
        for (&pos, &y) in self.unknowns.iter().zip(&sol.y) {
            values[pos] = y;
        }
        MomentVector { vars: self.full.vars(), degree: self.full.degree(), values }
    }
}

struct Assembler {
    full: MonomialBasis,
    /// `L_y(h) = 0` rows as `(constant, moment coefficients)`.
    equalities: Vec<(f64, Vec<(usize, f64)>)>,
    /// Variables whose total degree must be even in every kept moment.
    parity: Option<Vec<bool>>,
    id: HashMap<usize, usize>,
    unknowns: Vec<usize>,
    blocks: Vec<Block>,
    c: BlockSparse,
    cons: Vec<BlockSparse>,
}

impl Assembler {
    fn new(vars: usize, order: usize, parity: Option<Vec<bool>>) -> Self {
        let full = MonomialBasis::new(vars, 2 * order);
        let mut id = HashMap::new();
        let mut unknowns = Vec::new();
        for (pos, exp) in full.monomials().iter().enumerate().skip(1) {
            if parity_of(&parity, exp) == 0 {
                id.insert(pos, unknowns.len());
                unknowns.push(pos);
            }
        }
        let cons = vec![BlockSparse::new(); unknowns.len()];
        Assembler { full, equalities: Vec::new(), parity, id, unknowns, blocks: Vec::new(), c: BlockSparse::new(), cons }
    }

    /// Adds `M_{t'}(G y) ⪰ 0`, split into one block per parity class of the row monomials.
    fn add_localizing(&mut self, g: &PolyMatrix, rows: &MonomialBasis) -> Result<()> {
        let s = g.size();
        let mut classes: Vec<Vec<usize>> = vec![Vec::new(), Vec::new()];
        for (i, a) in rows.monomials().iter().enumerate() {
            classes[parity_of(&self.parity, a)].push(i);
        }
        for class in classes.into_iter().filter(|c| !c.is_empty()) {
            let blk = self.blocks.len();
            self.blocks.push(Block::Psd(s * class.len()));
            for (ai, &ra) in class.iter().enumerate() {
                for (bi, &rb) in class.iter().enumerate().skip(ai) {
                    let ab = add_exponents(rows.monomial(ra), rows.monomial(rb));
                    for i in 0..s {
                        for j in 0..s {
                            let (row, col) = (ai * s + i, bi * s + j);
                            if row > col {
                                continue;
                            }
                            for (e, coef) in g.get(i, j).terms() {
                                let exp = add_exponents(e, &ab);
                                let pos = self.full.index_of(&exp).ok_or_else(|| invalid("localizing entry exceeds the relaxation degree"))?;
                                if pos == 0 {
                                    self.c.push(blk, row, col, coef);
                                } else if let Some(&k) = self.id.get(&pos) {
                                    self.cons[k].push(blk, row, col, -coef);
                                } else {
                                    return Err(Error::InvariantViolation("constraint polynomial is not symmetric under the parity reduction".into()));
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Adds `L_y(x^α g) = 0` for every row monomial `x^α` of even parity.
    fn add_equalities(&mut self, g: &Poly, rows: &MonomialBasis) -> Result<()> {
        for a in rows.monomials().iter().filter(|a| parity_of(&self.parity, a) == 0) {
            let mut constant = 0.0;
            let mut col = Vec::new();
            for (e, coef) in g.terms() {
                let pos = self.full.index_of(&add_exponents(e, a)).ok_or_else(|| invalid("equality exceeds the relaxation degree"))?;
                if pos == 0 {
                    constant += coef;
                } else if let Some(&k) = self.id.get(&pos) {
                    col.push((k, coef));
                } else {
                    return Err(Error::InvariantViolation("equality is not symmetric under the parity reduction".into()));
                }
            }
            self.equalities.push((constant, col));
        }
        Ok(())
    }

    fn finish(mut self, f: &Poly, origin: &str, order: usize, moment_size: usize, localizing_sizes: Vec<usize>) -> Result<MomentRelaxation> {
        let mut b = vec![0.0; self.unknowns.len()];
        let mut offset = 0.0;
        for (pos, coef) in linearize(f, &self.full)? {
            if pos == 0 {
                offset += coef;
            } else if let Some(&k) = self.id.get(&pos) {
                b[k] -= coef;
            } else {
                return Err(Error::InvariantViolation("objective is not symmetric under the parity reduction".into()));
            }
        }
        self.c.compress();
        let mut problem = SdpProblem::new(self.blocks, Sense::Min, origin);
        problem.c = self.c;
        for (a, rhs) in self.cons.into_iter().zip(b) {
            problem.add_constraint(a, rhs);
        }
        // A free primal variable with column `h` and cost `−h_0` is the dual equality `hᵀy = −h_0`.
        for (constant, col) in self.equalities {
            problem.add_free(-constant, col);
        }
        Ok(MomentRelaxation { problem, full: self.full, unknowns: self.unknowns, offset, order, moment_size, localizing_sizes })
    }
}

fn parity_of(mask: &Option<Vec<bool>>, exp: &[u16]) -> usize {
    match mask {
        Some(m) => exp.iter().zip(m).filter(|(_, &on)| on).map(|(&e, _)| e as usize).sum::<usize>() % 2,
        None => 0,
    }
}

/// Lasserre relaxation of `inf f(x) s.t. G(x) ⪰ 0` at order `t`, with `y_0 = 1`.
pub fn build_pmi_relaxation(f: &Poly, g: &PolyMatrix, t: usize) -> Result<MomentRelaxation> {
    let vars = f.vars();
    if g.size() > 0 && g.get(0, 0).vars() != vars {
        return Err(invalid("objective and constraint use different variable counts"));
    }
    let dg = g.degree().div_ceil(2);
    let min = dg.max(f.degree().div_ceil(2)).max(1);
    if t < min {
        return Err(Error::OrderTooSmall { order: t, min });
    }
    let mut asm = Assembler::new(vars, t, None);
    let basis = MonomialBasis::new(vars, t);
    asm.add_localizing(&PolyMatrix::scalar(Poly::constant(vars, 1.0)), &basis)?;
    let rows = MonomialBasis::new(vars, t - dg);
    asm.add_localizing(g, &rows)?;
    let loc = vec![g.size() * rows.len()];
    asm.finish(f, "pmi relaxation", t, basis.len(), loc)
}

/// `zᵀB(x)z` in the variables `(x, z)`.
pub fn containment_objective(b: &LinearPencil) -> Poly {
    let (n, l) = (b.n(), b.k());
    let m = n + l;
    let mut f = Poly::zero(m);
    for u in 0..l {
        for v in 0..l {
            let mut zz = vec![0u16; m];
            zz[n + u] += 1;
            zz[n + v] += 1;
            f.add_term(zz.clone(), b.coeff(0).get(u, v));
            for p in 0..n {
                let mut e = zz.clone();
                e[p] += 1;
                f.add_term(e, b.coeff(p + 1).get(u, v));
            }
        }
    }
    f
}

/// The relaxation of `μ = inf zᵀB(x)z` over `A(x) ⪰ 0`, `r² ≤ zᵀz ≤ R²` at order `t ≥ 2`.
///
/// Everything is even in `z`, so odd-`z` moments are dropped and each PSD
/// block splits by the `z`-parity of its row monomials. The localizing matrix
/// of `diag(A, g_r, g^R)` is emitted as three blocks, or as `A`'s block plus
/// linear equalities when `r = R`.
pub fn build_containment_relaxation(cp: &ContainmentProblem, t: usize) -> Result<MomentRelaxation> {
    if t < 2 {
        return Err(Error::OrderTooSmall { order: t, min: 2 });
    }
    let (n, l, k) = (cp.a.n(), cp.b.k(), cp.a.k());
    let m = n + l;
    let mask: Vec<bool> = (0..m).map(|i| i >= n).collect();
    let mut asm = Assembler::new(m, t, Some(mask));
    let basis = MonomialBasis::new(m, t);
    asm.add_localizing(&PolyMatrix::scalar(Poly::constant(m, 1.0)), &basis)?;
    let rows = MonomialBasis::new(m, t - 1);
    asm.add_localizing(&PolyMatrix::from_pencil(&cp.a, m), &rows)?;
    let mut zz = Poly::zero(m);
    for u in 0..l {
        let mut e = vec![0u16; m];
        e[n + u] = 2;
        zz.add_term(e, 1.0);
    }
    let g_r = zz.add(&Poly::constant(m, -cp.r * cp.r));
    let g_big = zz.scale(-1.0).add(&Poly::constant(m, cp.big_r * cp.big_r));
    if cp.r == cp.big_r {
        // Both localizing matrices PSD means M_{t-1}(g y) = 0; stating that as
        // equalities keeps a strictly feasible point, which the solver needs.
        asm.add_equalities(&g_r, &MonomialBasis::new(m, 2 * t - 2))?;
    } else {
        asm.add_localizing(&PolyMatrix::scalar(g_r), &rows)?;
        asm.add_localizing(&PolyMatrix::scalar(g_big), &rows)?;
    }
    let loc = vec![(k + 2) * rows.len()];
    asm.finish(&containment_objective(&cp.b), "containment moment relaxation", t, basis.len(), loc)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Certified,
    Refuted,
    Inconclusive,
}

impl Verdict {
    /// CLI exit code.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Certified => 0,
            Verdict::Refuted => 1,
            Verdict::Inconclusive => 2,
        }
    }
}

/// Tolerances and budgets shared by all certification routines.
#[derive(Clone, Copy, Debug)]
pub struct CheckOptions {
    pub solver: SolverOptions,
    /// Base of the certification tolerance, scaled by `1 + max ‖B_p‖`.
    pub tol: f64,
    pub search: SearchOptions,
    /// Recomputed residuals above this make a non-optimal solve a numerical failure.
    pub accept_residual: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { solver: SolverOptions::default(), tol: 1e-7, search: SearchOptions::default(), accept_residual: 1e-6 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentOutcome {
    pub order: usize,
    /// `μ_mom(t)`; `+∞` when the relaxation is infeasible (`S_A` empty).
    pub value: f64,
    /// `value / r²` if nonnegative, `value / R²` otherwise.
    pub normalized: f64,
    pub verdict: Verdict,
    pub status: Status,
    pub residuals: Residuals,
    pub iterations: usize,
    pub moments: usize,
    /// Point of `S_A` where `B` fails to be PSD, when refuted.
    pub witness: Option<Vec<f64>>,
}

/// `μ_mom(t)` and its verdict. A negative value alone never refutes; a
/// violating point must be found.
pub fn solve_mu_mom(cp: &ContainmentProblem, t: usize, opts: &CheckOptions) -> Result<MomentOutcome> {
    let relax = build_containment_relaxation(cp, t)?;
    let sol = solve(&relax.problem, &opts.solver)?;
    let tol = cp.tol_cert(opts.tol);
    let base = |value: f64, verdict: Verdict, witness: Option<Vec<f64>>| MomentOutcome {
        order: t,
        value,
        normalized: cp.normalize(value),
        verdict,
        status: sol.status,
        residuals: sol.residuals,
        iterations: sol.iterations,
        moments: relax.num_moments(),
        witness,
    };
    match sol.status {
        // The moment side has no feasible point: S_A × annulus is empty.
        Status::DualInfeasible => return Ok(base(f64::INFINITY, Verdict::Certified, None)),
        Status::PrimalInfeasible => {
            let w = find_violation(&cp.a, &cp.b, &[], tol, &opts.search);
            let v = if w.is_some() { Verdict::Refuted } else { Verdict::Inconclusive };
            return Ok(base(f64::NEG_INFINITY, v, w));
        }
        _ if !sol.usable(opts.accept_residual) => {
            return Err(Error::NumericalFailure(format!(
                "moment relaxation t={t}: status {:?}, residuals {:?} after {} iterations",
                sol.status, sol.residuals, sol.iterations
            )));
        }
        _ => {}
    }
    let value = relax.value(&sol);
    if value >= -tol {
        return Ok(base(value, Verdict::Certified, None));
    }
    // First-order x moments are the natural candidate minimizer.
    let y = relax.moments(&sol);
    let n = cp.a.n();
    let hint: Vec<f64> = (0..n)
        .map(|p| {
            let mut e = vec![0u16; relax.full.vars()];
            e[p] = 1;
            y.get(&relax.full, &e)
        })
        .collect();
    let w = find_violation(&cp.a, &cp.b, &[hint], tol, &opts.search);
    let verdict = if w.is_some() { Verdict::Refuted } else { Verdict::Inconclusive };
    Ok(base(value, verdict, w))
}

/// Size report: `(moment side, combined localizing side)`.
pub fn relaxation_sizes(n: usize, k: usize, l: usize, t: usize) -> (usize, usize) {
    let m = n + l;
    (binomial(m + t, t), (k + 2) * binomial(m + t - 1, t - 1))
}
