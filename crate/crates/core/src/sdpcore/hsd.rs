//! Primal-dual interior-point method on the homogeneous self-dual embedding,
//! with Nesterov–Todd scaling and a Mehrotra predictor-corrector.
//!
//! Internally the problem is written as
//! `min cᵀx  s.t.  G x + s = h,  A x = b,  s ⪰ 0`
//! with `x` the dual multipliers `y`, `G x = Σ y_i A_i`, `h = C`, `c = −b`,
//! `A = Eᵀ` and `b = d`. The conic multiplier `z` of this form is the matrix
//! variable `X` of [`SdpProblem`] and the equality multiplier is `u`.

use nalgebra::linalg::{Cholesky, SVD};
use nalgebra::{DMatrix, DVector, Dyn};
use rayon::prelude::*;

use super::problem::{Block, Entry, Residuals, SdpProblem, SdpSolution, Sense, SolverOptions, Status};
use crate::error::Result;
use crate::symcore::SymMatrix;

const STEP: f64 = 0.99;
const EXPON: i32 = 3;
const MAX_STALLS: usize = 5;

#[derive(Clone, Debug)]
enum Bv {
    M(DMatrix<f64>),
    D(DVector<f64>),
}

/// An element of the cone's ambient space: one value per block.
#[derive(Clone, Debug)]
struct Cv(Vec<Bv>);

impl Cv {
    fn zeros(blocks: &[Block]) -> Cv {
        Cv(blocks
            .iter()
            .map(|b| match *b {
                Block::Psd(s) => Bv::M(DMatrix::zeros(s, s)),
                Block::Diag(s) => Bv::D(DVector::zeros(s)),
            })
            .collect())
    }

    fn identity(blocks: &[Block]) -> Cv {
        Cv(blocks
            .iter()
            .map(|b| match *b {
                Block::Psd(s) => Bv::M(DMatrix::identity(s, s)),
                Block::Diag(s) => Bv::D(DVector::from_element(s, 1.0)),
            })
            .collect())
    }

    fn dot(&self, o: &Cv) -> f64 {
        self.0
            .iter()
            .zip(&o.0)
            .map(|(a, b)| match (a, b) {
                (Bv::M(a), Bv::M(b)) => a.dot(b),
                (Bv::D(a), Bv::D(b)) => a.dot(b),
                _ => unreachable!("block kinds agree"),
            })
            .sum()
    }

    fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    fn axpy(&mut self, a: f64, o: &Cv) {
        for (x, y) in self.0.iter_mut().zip(&o.0) {
            match (x, y) {
                (Bv::M(x), Bv::M(y)) => *x += y * a,
                (Bv::D(x), Bv::D(y)) => *x += y * a,
                _ => unreachable!("block kinds agree"),
            }
        }
    }

    fn scaled(&self, a: f64) -> Cv {
        Cv(self
            .0
            .iter()
            .map(|b| match b {
                Bv::M(m) => Bv::M(m * a),
                Bv::D(d) => Bv::D(d * a),
            })
            .collect())
    }

    fn lin(a: f64, x: &Cv, b: f64, y: &Cv) -> Cv {
        let mut out = x.scaled(a);
        out.axpy(b, y);
        out
    }

    /// Smallest eigenvalue over all blocks.
    fn min_eig(&self) -> f64 {
        self.0
            .iter()
            .map(|b| match b {
                Bv::M(m) => sym_min_eig(m),
                Bv::D(d) => d.min(),
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn into_dense(self) -> Vec<DMatrix<f64>> {
        self.0
            .into_iter()
            .map(|b| match b {
                Bv::M(m) => m,
                Bv::D(d) => DMatrix::from_diagonal(&d),
            })
            .collect()
    }
}

fn sym_min_eig(m: &DMatrix<f64>) -> f64 {
    SymMatrix::new(m.clone()).and_then(|s| s.min_eigenvalue()).unwrap_or(f64::NAN)
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Problem data in the internal conic form.
struct Data {
    blocks: Vec<Block>,
    m: usize,
    p: usize,
    cons: Vec<Vec<Entry>>,
    /// Per constraint: its entries grouped by block.
    cons_blocks: Vec<Vec<(usize, Vec<Entry>)>>,
    /// Per block: constraints touching it, sorted by index.
    by_block: Vec<Vec<(usize, Vec<Entry>)>>,
    h: Cv,
    c: DVector<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    /// Degree of the cone.
    degree: f64,
}

impl Data {
    fn new(p: &SdpProblem) -> Data {
        let sign = match p.sense {
            Sense::Min => 1.0,
            Sense::Max => -1.0,
        };
        let blocks = p.blocks.clone();
        let m = p.num_constraints();
        let np = p.num_free();
        let mut h = Cv::zeros(&blocks);
        for e in p.c.entries() {
            match &mut h.0[e.block] {
                Bv::M(mat) => {
                    mat[(e.row, e.col)] += sign * e.value;
                    if e.row != e.col {
                        mat[(e.col, e.row)] += sign * e.value;
                    }
                }
                Bv::D(d) => d[e.row] += sign * e.value,
            }
        }
        let cons: Vec<Vec<Entry>> = p.constraints.iter().map(|a| a.entries().to_vec()).collect();
        let mut cons_blocks = Vec::with_capacity(m);
        let mut by_block: Vec<Vec<(usize, Vec<Entry>)>> = vec![Vec::new(); blocks.len()];
        for (i, ents) in cons.iter().enumerate() {
            let mut grouped: Vec<(usize, Vec<Entry>)> = Vec::new();
            for e in ents {
                match grouped.iter_mut().find(|(b, _)| *b == e.block) {
                    Some((_, v)) => v.push(*e),
                    None => grouped.push((e.block, vec![*e])),
                }
            }
            grouped.sort_by_key(|(b, _)| *b);
            for (b, v) in &grouped {
                by_block[*b].push((i, v.clone()));
            }
            cons_blocks.push(grouped);
        }
        let mut a = DMatrix::zeros(np, m);
        for (j, col) in p.free_columns.iter().enumerate() {
            for &(i, v) in col {
                a[(j, i)] += v;
            }
        }
        let b = DVector::from_iterator(np, p.free_cost.iter().map(|v| sign * v));
        let c = DVector::from_iterator(m, p.b.iter().map(|v| -v));
        let degree = blocks.iter().map(|b| b.size() as f64).sum();
        Data { blocks, m, p: np, cons, cons_blocks, by_block, h, c, a, b, degree }
    }

    /// `G x = Σ x_i A_i`.
    fn g(&self, x: &DVector<f64>) -> Cv {
        let mut out = Cv::zeros(&self.blocks);
        for (i, ents) in self.cons.iter().enumerate() {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for e in ents {
                match &mut out.0[e.block] {
                    Bv::M(mat) => {
                        mat[(e.row, e.col)] += xi * e.value;
                        if e.row != e.col {
                            mat[(e.col, e.row)] += xi * e.value;
                        }
                    }
                    Bv::D(d) => d[e.row] += xi * e.value,
                }
            }
        }
        out
    }

    /// `Gᵀ z = (⟨A_i, z⟩)_i`.
    fn gt(&self, z: &Cv) -> DVector<f64> {
        DVector::from_iterator(
            self.m,
            self.cons.iter().map(|ents| {
                ents.iter()
                    .map(|e| match &z.0[e.block] {
                        Bv::M(mat) => {
                            if e.row == e.col {
                                e.value * mat[(e.row, e.col)]
                            } else {
                                e.value * (mat[(e.row, e.col)] + mat[(e.col, e.row)])
                            }
                        }
                        Bv::D(d) => e.value * d[e.row],
                    })
                    .sum()
            }),
        )
    }
}

/// Nesterov–Todd scaling of one block.
#[derive(Clone, Debug)]
enum Scal {
    /// `W z = Rᵀ z R`, with `rti = R⁻ᵀ`.
    M { r: DMatrix<f64>, rti: DMatrix<f64>, lam: DVector<f64> },
    /// `W z = w ∘ z`.
    D { w: DVector<f64>, lam: DVector<f64> },
}

#[derive(Clone, Debug)]
struct Scaling(Vec<Scal>);

/// SVD `m = U Σ Vᵀ`, verified by its residual. faer's SVD is tried first;
/// the nalgebra SVD, which is sometimes inaccurate on the graded matrices
/// seen near the optimum, and the eigenvectors of `mᵀm` are fallbacks.
fn checked_svd(m: &DMatrix<f64>) -> Option<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let tol = 1e-10 * m.amax().max(f64::MIN_POSITIVE) * n as f64;
    let ok = |u: &DMatrix<f64>, sig: &DVector<f64>, v: &DMatrix<f64>| {
        (u * DMatrix::from_diagonal(sig) * v.transpose() - m).amax() <= tol
    };
    let fm = faer::Mat::<f64>::from_fn(n, m.ncols(), |i, j| m[(i, j)]);
    if let Ok(svd) = fm.svd() {
        let (fu, fv, fs) = (svd.U(), svd.V(), svd.S().column_vector());
        let u = DMatrix::from_fn(n, fu.ncols(), |i, j| fu[(i, j)]);
        let v = DMatrix::from_fn(fv.nrows(), fv.ncols(), |i, j| fv[(i, j)]);
        let sig = DVector::from_fn(fs.nrows(), |i, _| fs[i]);
        if ok(&u, &sig, &v) {
            return Some((u, sig, v));
        }
    }
    if let Some(svd) = SVD::try_new(m.clone(), true, true, f64::EPSILON, 1000) {
        let (u, v) = (svd.u?, svd.v_t?.transpose());
        if ok(&u, &svd.singular_values, &v) {
            return Some((u, svd.singular_values, v));
        }
    }
    let eig = (m.transpose() * m).symmetric_eigen();
    let sig = eig.eigenvalues.map(|e| e.max(0.0).sqrt());
    if sig.iter().any(|&x| !(x > 0.0)) {
        return None;
    }
    let v = eig.eigenvectors;
    let u = m * &v * DMatrix::from_diagonal(&sig.map(|x| 1.0 / x));
    Some((u, sig, v))
}

/// Updates the factor pair `(R, R⁻ᵀ)` of one PSD block given scaled iterates.
fn nt_update(r: &DMatrix<f64>, rti: &DMatrix<f64>, s: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<Scal> {
    let l1 = Cholesky::new(s.clone())?.l();
    let l2 = Cholesky::new(z.clone())?.l();
    let (u, sig, v) = checked_svd(&(l2.transpose() * &l1))?;
    if sig.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return None;
    }
    let isq = DMatrix::from_diagonal(&sig.map(|x| 1.0 / x.sqrt()));
    Some(Scal::M { r: r * l1 * v * &isq, rti: rti * l2 * u * isq, lam: sig })
}

impl Scaling {
    fn from_sz(s: &Cv, z: &Cv) -> Option<Scaling> {
        let mut out = Vec::with_capacity(s.0.len());
        for (sb, zb) in s.0.iter().zip(&z.0) {
            out.push(match (sb, zb) {
                (Bv::M(s), Bv::M(z)) => {
                    let n = s.nrows();
                    let id = DMatrix::identity(n, n);
                    nt_update(&id, &id, s, z)?
                }
                (Bv::D(s), Bv::D(z)) => {
                    if s.iter().chain(z.iter()).any(|&v| !(v > 0.0)) {
                        return None;
                    }
                    Scal::D { w: s.zip_map(z, |a, b| (a / b).sqrt()), lam: s.zip_map(z, |a, b| (a * b).sqrt()) }
                }
                _ => unreachable!("block kinds agree"),
            });
        }
        Some(Scaling(out))
    }

    /// `W u`.
    fn w(&self, u: &Cv) -> Cv {
        Cv(self
            .0
            .iter()
            .zip(&u.0)
            .map(|(sc, ub)| match (sc, ub) {
                (Scal::M { r, .. }, Bv::M(u)) => Bv::M(r.transpose() * u * r),
                (Scal::D { w, .. }, Bv::D(u)) => Bv::D(w.component_mul(u)),
                _ => unreachable!(),
            })
            .collect())
    }

    /// `Wᵀ u`.
    fn wt(&self, u: &Cv) -> Cv {
        Cv(self
            .0
            .iter()
            .zip(&u.0)
            .map(|(sc, ub)| match (sc, ub) {
                (Scal::M { r, .. }, Bv::M(u)) => Bv::M(r * u * r.transpose()),
                (Scal::D { w, .. }, Bv::D(u)) => Bv::D(w.component_mul(u)),
                _ => unreachable!(),
            })
            .collect())
    }

    /// `W⁻¹ u`.
    fn winv(&self, u: &Cv) -> Cv {
        Cv(self
            .0
            .iter()
            .zip(&u.0)
            .map(|(sc, ub)| match (sc, ub) {
                (Scal::M { rti, .. }, Bv::M(u)) => Bv::M(rti * u * rti.transpose()),
                (Scal::D { w, .. }, Bv::D(u)) => Bv::D(u.component_div(w)),
                _ => unreachable!(),
            })
            .collect())
    }

    /// `W⁻ᵀ u`.
    fn winvt(&self, u: &Cv) -> Cv {
        Cv(self
            .0
            .iter()
            .zip(&u.0)
            .map(|(sc, ub)| match (sc, ub) {
                (Scal::M { rti, .. }, Bv::M(u)) => Bv::M(rti.transpose() * u * rti),
                (Scal::D { w, .. }, Bv::D(u)) => Bv::D(u.component_div(w)),
                _ => unreachable!(),
            })
            .collect())
    }

    /// `D⁻¹ u = W⁻¹ W⁻ᵀ u`.
    fn dinv(&self, u: &Cv) -> Cv {
        self.winv(&self.winvt(u))
    }

    /// `D u = Wᵀ W u`.
    fn d(&self, u: &Cv) -> Cv {
        self.wt(&self.w(u))
    }

    fn lam(&self) -> Cv {
        Cv(self
            .0
            .iter()
            .map(|sc| match sc {
                Scal::M { lam, .. } => Bv::M(DMatrix::from_diagonal(lam)),
                Scal::D { lam, .. } => Bv::D(lam.clone()),
            })
            .collect())
    }

    fn lam_sq(&self) -> f64 {
        self.0
            .iter()
            .map(|sc| match sc {
                Scal::M { lam, .. } | Scal::D { lam, .. } => lam.norm_squared(),
            })
            .sum()
    }

    /// `s = Wᵀ λ`.
    fn s(&self) -> Cv {
        self.wt(&self.lam())
    }

    /// `z = W⁻¹ λ`.
    fn z(&self) -> Cv {
        self.winv(&self.lam())
    }

    /// Solves `λ ∘ x = d`.
    fn lam_div(&self, d: &Cv) -> Cv {
        Cv(self
            .0
            .iter()
            .zip(&d.0)
            .map(|(sc, db)| match (sc, db) {
                (Scal::M { lam, .. }, Bv::M(d)) => {
                    Bv::M(DMatrix::from_fn(d.nrows(), d.ncols(), |a, b| 2.0 * d[(a, b)] / (lam[a] + lam[b])))
                }
                (Scal::D { lam, .. }, Bv::D(d)) => Bv::D(d.component_div(lam)),
                _ => unreachable!(),
            })
            .collect())
    }

    /// Largest `α` keeping `λ + α Δ` in the cone (infinite if unconstrained).
    fn max_step(&self, delta: &Cv) -> f64 {
        let mut best = f64::INFINITY;
        for (sc, db) in self.0.iter().zip(&delta.0) {
            let t = match (sc, db) {
                (Scal::M { lam, .. }, Bv::M(d)) => {
                    let m = DMatrix::from_fn(d.nrows(), d.ncols(), |a, b| d[(a, b)] / (lam[a] * lam[b]).sqrt());
                    sym_min_eig(&m)
                }
                (Scal::D { lam, .. }, Bv::D(d)) => d.component_div(lam).min(),
                _ => unreachable!(),
            };
            if t.is_nan() {
                return 0.0;
            }
            if t < 0.0 {
                best = best.min(-1.0 / t);
            }
        }
        best
    }

    /// Moves to `s̃ = λ + α Δs̃`, `z̃ = λ + α Δz̃` and rescales.
    fn update(&self, ds: &Cv, dz: &Cv, alpha: f64) -> Option<Scaling> {
        let mut out = Vec::with_capacity(self.0.len());
        for ((sc, dsb), dzb) in self.0.iter().zip(&ds.0).zip(&dz.0) {
            out.push(match (sc, dsb, dzb) {
                (Scal::M { r, rti, lam }, Bv::M(ds), Bv::M(dz)) => {
                    let base = DMatrix::from_diagonal(lam);
                    let mut st = &base + ds * alpha;
                    let mut zt = &base + dz * alpha;
                    symmetrize(&mut st);
                    symmetrize(&mut zt);
                    nt_update(r, rti, &st, &zt)?
                }
                (Scal::D { w, lam }, Bv::D(ds), Bv::D(dz)) => {
                    let st = lam + ds * alpha;
                    let zt = lam + dz * alpha;
                    if st.iter().chain(zt.iter()).any(|&v| !(v > 0.0)) {
                        return None;
                    }
                    Scal::D {
                        w: w.component_mul(&st.zip_map(&zt, |a, b| (a / b).sqrt())),
                        lam: st.zip_map(&zt, |a, b| (a * b).sqrt()),
                    }
                }
                _ => unreachable!(),
            });
        }
        Some(Scaling(out))
    }
}

/// `H = Gᵀ D⁻¹ G`, i.e. `H_ij = Σ_b tr(A_i P⁻¹ A_j P⁻¹)` plus diagonal-block terms.
fn schur(data: &Data, scal: &Scaling) -> DMatrix<f64> {
    let m = data.m;
    let pinv: Vec<Option<DMatrix<f64>>> = scal
        .0
        .iter()
        .map(|sc| match sc {
            Scal::M { rti, .. } => Some(rti * rti.transpose()),
            Scal::D { .. } => None,
        })
        .collect();
    let dinv_diag: Vec<Option<DVector<f64>>> = scal
        .0
        .iter()
        .map(|sc| match sc {
            Scal::D { w, .. } => Some(w.map(|v| 1.0 / (v * v))),
            Scal::M { .. } => None,
        })
        .collect();

    let mut h = vec![0.0; m * m];
    h.par_chunks_mut(m).enumerate().for_each(|(i, col)| {
        for (blk, ents) in &data.cons_blocks[i] {
            let others = &data.by_block[*blk];
            let start = others.partition_point(|(j, _)| *j < i);
            match (&pinv[*blk], &dinv_diag[*blk]) {
                (Some(pi), _) => {
                    let gi = congruence_term(pi, ents);
                    for (j, ej) in &others[start..] {
                        let mut acc = 0.0;
                        for e in ej {
                            let v = gi[(e.row, e.col)];
                            acc += if e.row == e.col { e.value * v } else { 2.0 * e.value * v };
                        }
                        col[*j] += acc;
                    }
                }
                (None, Some(dv)) => {
                    for (j, ej) in &others[start..] {
                        let mut acc = 0.0;
                        for e in ej {
                            for f in ents {
                                if f.row == e.row {
                                    acc += f.value * e.value * dv[e.row];
                                }
                            }
                        }
                        col[*j] += acc;
                    }
                }
                _ => unreachable!(),
            }
        }
    });
    let mut hm = DMatrix::from_vec(m, m, h);
    for i in 0..m {
        for j in i + 1..m {
            hm[(i, j)] = hm[(j, i)];
        }
    }
    hm
}

/// `P⁻¹ A P⁻¹` for a sparse symmetric `A`.
fn congruence_term(pinv: &DMatrix<f64>, ents: &[Entry]) -> DMatrix<f64> {
    let s = pinv.nrows();
    let mut rows: Vec<usize> = ents.iter().flat_map(|e| [e.row, e.col]).collect();
    rows.sort_unstable();
    rows.dedup();
    let pos = |r: usize| rows.binary_search(&r).expect("row present");
    // T = (A P⁻¹) restricted to the rows touched by A.
    let mut t = DMatrix::zeros(rows.len(), s);
    for e in ents {
        let (ri, ci) = (pos(e.row), pos(e.col));
        for k in 0..s {
            t[(ri, k)] += e.value * pinv[(e.col, k)];
        }
        if e.row != e.col {
            for k in 0..s {
                t[(ci, k)] += e.value * pinv[(e.row, k)];
            }
        }
    }
    let cols = pinv.select_columns(rows.iter());
    cols * t
}

/// Factored reduced KKT system for one scaling.
struct Kkt<'a> {
    data: &'a Data,
    scal: &'a Scaling,
    k1: Cholesky<f64, Dyn>,
    s: Option<Cholesky<f64, Dyn>>,
}

fn robust_cholesky(mut m: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some(c);
    }
    let scale = m.diagonal().amax().max(1.0);
    let mut delta = 1e-13 * scale;
    for _ in 0..8 {
        for i in 0..m.nrows() {
            m[(i, i)] += delta;
        }
        if let Some(c) = Cholesky::new(m.clone()) {
            return Some(c);
        }
        delta *= 10.0;
    }
    None
}

impl<'a> Kkt<'a> {
    fn factor(data: &'a Data, scal: &'a Scaling) -> Option<Kkt<'a>> {
        let mut h = schur(data, scal);
        if data.p > 0 {
            h += data.a.transpose() * &data.a;
        }
        let k1 = robust_cholesky(h)?;
        let s = if data.p > 0 {
            let kinv_at = k1.solve(&data.a.transpose());
            Some(robust_cholesky(&data.a * kinv_at)?)
        } else {
            None
        };
        Some(Kkt { data, scal, k1, s })
    }

    fn solve_once(&self, bx: &DVector<f64>, by: &DVector<f64>, bz: &Cv) -> (DVector<f64>, DVector<f64>, Cv) {
        let d = self.data;
        let r1 = bx + d.gt(&self.scal.dinv(bz));
        let (x, y) = match &self.s {
            None => (self.k1.solve(&r1), DVector::zeros(0)),
            Some(s) => {
                let rhs = &r1 + d.a.transpose() * by;
                let k_rhs = self.k1.solve(&rhs);
                let y = s.solve(&(&d.a * &k_rhs - by));
                let x = self.k1.solve(&(rhs - d.a.transpose() * &y));
                (x, y)
            }
        };
        let mut gx = d.g(&x);
        gx.axpy(-1.0, bz);
        let z = self.scal.dinv(&gx);
        (x, y, z)
    }

    /// Solves `[0 Aᵀ Gᵀ; A 0 0; G 0 −D] [x; y; z] = [bx; by; bz]` with one refinement step.
    fn solve(&self, bx: &DVector<f64>, by: &DVector<f64>, bz: &Cv) -> (DVector<f64>, DVector<f64>, Cv) {
        let d = self.data;
        let (mut x, mut y, mut z) = self.solve_once(bx, by, bz);
        for _ in 0..2 {
            let ex = bx - d.a.transpose() * &y - d.gt(&z);
            let ey = by - &d.a * &x;
            let mut ez = bz.clone();
            ez.axpy(-1.0, &d.g(&x));
            ez.axpy(1.0, &self.scal.d(&z));
            let scale = 1.0 + bx.norm() + by.norm() + bz.norm();
            if ex.norm() + ey.norm() + ez.norm() <= 1e-14 * scale {
                break;
            }
            let (cx, cy, cz) = self.solve_once(&ex, &ey, &ez);
            x += cx;
            y += cy;
            z.axpy(1.0, &cz);
        }
        (x, y, z)
    }
}

/// Iterate of the embedding.
#[derive(Clone)]
struct Iterate {
    x: DVector<f64>,
    y: DVector<f64>,
    tau: f64,
    kappa: f64,
    scal: Scaling,
}

enum Outcome {
    Optimal,
    PrimalInfeasible { scale: f64 },
    DualInfeasible { scale: f64 },
    Stalled,
    IterLimit,
}

/// Solves the SDP. Numerical breakdown is reported through the status, never as a panic.
///
/// Without strict feasibility on one side `τ` and `κ` both tend to zero and the
/// iteration stalls short of its own stopping test. A stalled iterate whose
/// recomputed residuals meet the tolerances is still reported as optimal.
pub fn solve(problem: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    let mut sol = solve_hsd(problem, opts)?;
    let r = sol.residuals;
    if matches!(sol.status, Status::Inaccurate | Status::IterLimit)
        && r.primal <= opts.tol_feas
        && r.dual <= opts.tol_feas
        && r.gap <= opts.tol_gap
    {
        sol.status = Status::Optimal;
    }
    Ok(sol)
}

fn solve_hsd(problem: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    problem.validate()?;
    let data = Data::new(problem);
    if data.m == 0 {
        return Ok(solve_trivial(problem, &data));
    }
    let resx0 = data.c.norm().max(1.0);
    let resy0 = data.b.norm().max(1.0);
    let resz0 = data.h.norm().max(1.0);

    let Some(mut it) = initial_point(&data) else {
        return Ok(finish(problem, &data, None, Outcome::Stalled, 0));
    };

    let mut stalls = 0usize;
    // Near the optimum the KKT solves of degenerate problems can lose accuracy
    // and drive the residuals back up; the best iterate seen is kept for that case.
    let mut best: Option<(f64, Iterate, usize)> = None;
    let mut worse = 0usize;
    macro_rules! give_up {
        ($outcome:expr, $iter:expr) => {{
            return Ok(match &best {
                Some((_, b, i)) => finish(problem, &data, Some(b), $outcome, *i),
                None => finish(problem, &data, Some(&it), $outcome, $iter),
            });
        }};
    }
    for iter in 0..=opts.max_iter {
        let s = it.scal.s();
        let z = it.scal.z();
        let rx = data.a.transpose() * &it.y + data.gt(&z) + &data.c * it.tau;
        let ry = &data.a * &it.x - &data.b * it.tau;
        let gx = data.g(&it.x);
        let mut rz = Cv::lin(1.0, &s, 1.0, &gx);
        rz.axpy(-it.tau, &data.h);
        let cx = data.c.dot(&it.x);
        let by = data.b.dot(&it.y);
        let hz = data.h.dot(&z);
        let rt = it.kappa + cx + by + hz;

        let gap = it.scal.lam_sq();
        let pcost = cx / it.tau;
        let dcost = -(by + hz) / it.tau;
        let pres = (ry.norm() / resy0).max(rz.norm() / resz0) / it.tau;
        let dres = rx.norm() / resx0 / it.tau;
        let relgap = (gap / (it.tau * it.tau)).max((pcost - dcost).abs()) / (1.0 + pcost.abs() + dcost.abs());

        if std::env::var_os("HSD_TRACE").is_some() {
            eprintln!("{iter:3} pc {pcost:+.8e} dc {dcost:+.8e} gap {gap:.2e} pres {pres:.2e} dres {dres:.2e} rg {relgap:.2e} tau {:.2e} kap {:.2e}", it.tau, it.kappa);
        }
        if pres <= opts.tol_feas && dres <= opts.tol_feas && relgap <= opts.tol_gap {
            return Ok(finish(problem, &data, Some(&it), Outcome::Optimal, iter));
        }
        let merit = pres.max(dres).max(relgap);
        match &best {
            Some((b, _, _)) if !(merit < *b) => {
                if *b < 1e-4 && merit > 100.0 * b {
                    worse += 1;
                    if worse >= 3 {
                        give_up!(Outcome::Stalled, iter);
                    }
                }
            }
            _ => {
                best = Some((merit, it.clone(), iter));
                worse = 0;
            }
        }
        if hz + by < 0.0 {
            let ray = data.a.transpose() * &it.y + data.gt(&z);
            if ray.norm() / resx0 / (-(hz + by)) <= opts.tol_feas {
                return Ok(finish(problem, &data, Some(&it), Outcome::DualInfeasible { scale: -(hz + by) }, iter));
            }
        }
        if cx < 0.0 {
            let ax = &data.a * &it.x;
            let sgx = Cv::lin(1.0, &s, 1.0, &gx);
            if (ax.norm() / resy0).max(sgx.norm() / resz0) / (-cx) <= opts.tol_feas {
                return Ok(finish(problem, &data, Some(&it), Outcome::PrimalInfeasible { scale: -cx }, iter));
            }
        }
        if iter == opts.max_iter {
            break;
        }

        let mu = (gap + it.tau * it.kappa) / (data.degree + 1.0);
        let Some(kkt) = Kkt::factor(&data, &it.scal) else {
            give_up!(Outcome::Stalled, iter);
        };
        let (x1, y1, z1) = kkt.solve(&(-&data.c), &data.b, &data.h);
        let denom1 = data.c.dot(&x1) + data.b.dot(&y1) + data.h.dot(&z1) - it.kappa / it.tau;

        let lam = it.scal.lam();
        let lam_lam = Cv(lam
            .0
            .iter()
            .map(|b| match b {
                Bv::M(m) => Bv::M(m * m),
                Bv::D(d) => Bv::D(d.component_mul(d)),
            })
            .collect());
        let e = Cv::identity(&data.blocks);

        let mut sigma = 0.0;
        let mut affine: Option<(Cv, Cv, f64, f64)> = None;
        let mut step = None;
        for phase in 0..2 {
            let eta = if phase == 0 { 0.0 } else { sigma };
            let mut ds = lam_lam.scaled(-1.0);
            ds.axpy(sigma * mu, &e);
            let mut dk = -it.kappa * it.tau + sigma * mu;
            if let Some((dsa, dza, dtaua, dkapa)) = &affine {
                ds.axpy(-1.0, &circ(dsa, dza));
                dk -= dtaua * dkapa;
            }
            let lds = it.scal.lam_div(&ds);
            let f = -(1.0 - eta);
            let p1 = &rx * f;
            let p2 = &ry * f;
            let mut p3 = rz.scaled(f);
            p3.axpy(-1.0, &it.scal.wt(&lds));
            let p4 = f * rt - dk / it.tau;
            let (x2, y2, z2) = kkt.solve(&p1, &p2, &p3);
            let dtau = (p4 - data.c.dot(&x2) - data.b.dot(&y2) - data.h.dot(&z2)) / denom1;
            let dx = x2 + &x1 * dtau;
            let dy = y2 + &y1 * dtau;
            let dz = Cv::lin(1.0, &z2, dtau, &z1);
            let dkap = (dk - it.kappa * dtau) / it.tau;
            let dzt = it.scal.w(&dz);
            let dst = Cv::lin(1.0, &lds, -1.0, &dzt);

            let mut amax = it.scal.max_step(&dst).min(it.scal.max_step(&dzt));
            if dtau < 0.0 {
                amax = amax.min(-it.tau / dtau);
            }
            if dkap < 0.0 {
                amax = amax.min(-it.kappa / dkap);
            }
            if phase == 0 {
                let alpha = amax.min(1.0);
                sigma = (1.0 - alpha).powi(EXPON);
                affine = Some((dst, dzt, dtau, dkap));
            } else {
                let alpha = (STEP * amax).min(1.0);
                step = Some((alpha, dx, dy, dst, dzt, dtau, dkap));
            }
        }
        let (alpha, dx, dy, dst, dzt, dtau, dkap) = step.expect("combined step computed");
        if !(alpha > 1e-12) || !alpha.is_finite() {
            stalls += 1;
            if stalls >= MAX_STALLS || !alpha.is_finite() {
                give_up!(Outcome::Stalled, iter);
            }
            continue;
        }
        let Some(new_scal) = it.scal.update(&dst, &dzt, alpha) else {
            give_up!(Outcome::Stalled, iter);
        };
        it.x += dx * alpha;
        it.y += dy * alpha;
        it.tau += alpha * dtau;
        it.kappa += alpha * dkap;
        it.scal = new_scal;
        if alpha < 1e-6 {
            stalls += 1;
            if stalls >= MAX_STALLS {
                give_up!(Outcome::Stalled, iter + 1);
            }
        }
    }
    give_up!(Outcome::IterLimit, opts.max_iter);
}

/// `(uv + vu)/2` blockwise.
fn circ(u: &Cv, v: &Cv) -> Cv {
    Cv(u.0
        .iter()
        .zip(&v.0)
        .map(|(a, b)| match (a, b) {
            (Bv::M(a), Bv::M(b)) => {
                let p = a * b;
                Bv::M((&p + p.transpose()) * 0.5)
            }
            (Bv::D(a), Bv::D(b)) => Bv::D(a.component_mul(b)),
            _ => unreachable!(),
        })
        .collect())
}

/// Least-norm primal and dual starting points, shifted into the cone.
fn initial_point(data: &Data) -> Option<Iterate> {
    let id = Scaling(
        data.blocks
            .iter()
            .map(|b| match *b {
                Block::Psd(s) => Scal::M {
                    r: DMatrix::identity(s, s),
                    rti: DMatrix::identity(s, s),
                    lam: DVector::from_element(s, 1.0),
                },
                Block::Diag(s) => Scal::D { w: DVector::from_element(s, 1.0), lam: DVector::from_element(s, 1.0) },
            })
            .collect(),
    );
    let kkt = Kkt::factor(data, &id)?;
    let (x, _, s_neg) = kkt.solve(&DVector::zeros(data.m), &data.b, &data.h);
    let mut s = s_neg.scaled(-1.0);
    let (_, y, mut z) = kkt.solve(&(-&data.c), &DVector::zeros(data.p), &Cv::zeros(&data.blocks));
    let e = Cv::identity(&data.blocks);
    for v in [&mut s, &mut z] {
        let t = -v.min_eig();
        if t.is_nan() {
            return None;
        }
        if t >= -1e-8 * v.norm().max(1.0) {
            v.axpy(1.0 + t, &e);
        }
    }
    let scal = Scaling::from_sz(&s, &z)?;
    Some(Iterate { x, y, tau: 1.0, kappa: 1.0, scal })
}

/// No equality constraints: `X = 0` is optimal unless `C` or `d` gives an improving ray.
fn solve_trivial(problem: &SdpProblem, data: &Data) -> SdpSolution {
    let xs = Cv::zeros(&data.blocks).into_dense();
    let unbounded = data.b.norm() > 0.0 || data.h.min_eig() < 0.0;
    let status = if unbounded { Status::DualInfeasible } else { Status::Optimal };
    let sign = if problem.sense == Sense::Min { 1.0 } else { -1.0 };
    SdpSolution {
        status,
        primal_value: if unbounded { f64::NEG_INFINITY * sign } else { 0.0 },
        dual_value: if unbounded { f64::NAN } else { 0.0 },
        x: xs,
        u: vec![0.0; data.p],
        y: Vec::new(),
        z: data.h.clone().into_dense(),
        residuals: Residuals::default(),
        iterations: 0,
    }
}

fn finish(problem: &SdpProblem, data: &Data, it: Option<&Iterate>, outcome: Outcome, iterations: usize) -> SdpSolution {
    let sign = if problem.sense == Sense::Min { 1.0 } else { -1.0 };
    let Some(it) = it else {
        return SdpSolution {
            status: Status::Inaccurate,
            primal_value: f64::NAN,
            dual_value: f64::NAN,
            x: Cv::zeros(&data.blocks).into_dense(),
            u: vec![0.0; data.p],
            y: vec![0.0; data.m],
            z: Cv::zeros(&data.blocks).into_dense(),
            residuals: Residuals { primal: f64::INFINITY, dual: f64::INFINITY, gap: f64::INFINITY },
            iterations,
        };
    };
    let (status, div) = match outcome {
        Outcome::Optimal => (Status::Optimal, it.tau),
        Outcome::PrimalInfeasible { scale } => (Status::PrimalInfeasible, scale),
        Outcome::DualInfeasible { scale } => (Status::DualInfeasible, scale),
        Outcome::Stalled => (Status::Inaccurate, it.tau),
        Outcome::IterLimit => (Status::IterLimit, it.tau),
    };
    let x = it.scal.z().scaled(1.0 / div).into_dense();
    let z = it.scal.s().scaled(1.0 / div).into_dense();
    let u: Vec<f64> = (&it.y / div).iter().copied().collect();
    let y: Vec<f64> = (&it.x * (sign / div)).iter().copied().collect();

    let mut sol = SdpSolution {
        status,
        primal_value: f64::NAN,
        dual_value: f64::NAN,
        x,
        u,
        y,
        z,
        residuals: Residuals::default(),
        iterations,
    };
    match status {
        Status::PrimalInfeasible => {
            sol.dual_value = problem.b.iter().zip(&sol.y).map(|(b, y)| b * y).sum();
            sol.residuals = certificate_residuals(problem, &sol);
        }
        Status::DualInfeasible => {
            sol.primal_value = problem.c.dot_dense(&sol.x) + problem.free_cost.iter().zip(&sol.u).map(|(d, u)| d * u).sum::<f64>();
            sol.residuals = certificate_residuals(problem, &sol);
        }
        _ => {
            let (pv, dv, res) = recompute(problem, &sol.x, &sol.u, &sol.y);
            sol.primal_value = pv;
            sol.dual_value = dv;
            sol.residuals = res;
        }
    }
    sol
}

fn free_times(problem: &SdpProblem, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; problem.num_constraints()];
    for (col, uj) in problem.free_columns.iter().zip(u) {
        for &(i, v) in col {
            out[i] += v * uj;
        }
    }
    out
}

fn free_transpose(problem: &SdpProblem, y: &[f64]) -> Vec<f64> {
    problem.free_columns.iter().map(|col| col.iter().map(|&(i, v)| v * y[i]).sum()).collect()
}

fn dense_c(problem: &SdpProblem) -> Vec<DMatrix<f64>> {
    let mut m: Vec<DMatrix<f64>> = problem.blocks.iter().map(|b| DMatrix::zeros(b.size(), b.size())).collect();
    problem.c.add_to_dense(1.0, &mut m);
    m
}

fn blocks_min_eig(m: &[DMatrix<f64>]) -> f64 {
    m.iter().map(sym_min_eig).fold(f64::INFINITY, f64::min)
}

fn blocks_norm(m: &[DMatrix<f64>]) -> f64 {
    m.iter().map(|b| b.norm_squared()).sum::<f64>().sqrt()
}

/// `Σ y_i A_i − C` for `Max`, `C − Σ y_i A_i` for `Min`.
fn dual_slack(problem: &SdpProblem, y: &[f64]) -> Vec<DMatrix<f64>> {
    let sign = if problem.sense == Sense::Min { 1.0 } else { -1.0 };
    let mut z = dense_c(problem);
    for (a, yi) in problem.constraints.iter().zip(y) {
        a.add_to_dense(-yi, &mut z);
    }
    z.into_iter().map(|m| m * sign).collect()
}

/// Values and residuals of a candidate primal-dual pair, computed from scratch.
pub fn recompute(problem: &SdpProblem, x: &[DMatrix<f64>], u: &[f64], y: &[f64]) -> (f64, f64, Residuals) {
    let bnorm = problem.b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let eu = free_times(problem, u);
    let prim: f64 = problem
        .constraints
        .iter()
        .zip(&problem.b)
        .zip(&eu)
        .map(|((a, b), e)| (a.dot_dense(x) + e - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let xneg = (-blocks_min_eig(x)).max(0.0) / (1.0 + blocks_norm(x));
    let primal = (prim / (1.0 + bnorm)).max(xneg);

    let etv = free_transpose(problem, y);
    let dnorm = problem.free_cost.iter().map(|v| v * v).sum::<f64>().sqrt();
    let eq: f64 = etv.iter().zip(&problem.free_cost).map(|(a, d)| (a - d).powi(2)).sum::<f64>().sqrt();
    let zs = dual_slack(problem, y);
    let cnorm = problem.c.norm();
    let zneg = (-blocks_min_eig(&zs)).max(0.0) / (1.0 + cnorm);
    let dual = (eq / (1.0 + dnorm)).max(zneg);

    let pv = problem.c.dot_dense(x) + problem.free_cost.iter().zip(u).map(|(d, u)| d * u).sum::<f64>();
    let dv: f64 = problem.b.iter().zip(y).map(|(b, y)| b * y).sum();
    let gap = (pv - dv).abs() / (1.0 + pv.abs() + dv.abs());
    (pv, dv, Residuals { primal, dual, gap })
}

/// Residuals of an infeasibility ray: `primal`/`dual` hold the ray's
/// constraint violation, `gap` is unused.
fn certificate_residuals(problem: &SdpProblem, sol: &SdpSolution) -> Residuals {
    match sol.status {
        Status::PrimalInfeasible => {
            // Ray y: Σ y_i A_i ⪯ 0 (Min) with Eᵀy = 0 and bᵀy > 0.
            let etv = free_transpose(problem, &sol.y);
            let mut slack: Vec<DMatrix<f64>> = problem.blocks.iter().map(|b| DMatrix::zeros(b.size(), b.size())).collect();
            let sign = if problem.sense == Sense::Min { 1.0 } else { -1.0 };
            for (a, yi) in problem.constraints.iter().zip(&sol.y) {
                a.add_to_dense(-yi * sign, &mut slack);
            }
            let viol = (-blocks_min_eig(&slack)).max(0.0) + etv.iter().map(|v| v * v).sum::<f64>().sqrt();
            Residuals { primal: 0.0, dual: viol, gap: 0.0 }
        }
        Status::DualInfeasible => {
            let eu = free_times(problem, &sol.u);
            let viol: f64 = problem
                .constraints
                .iter()
                .zip(&eu)
                .map(|(a, e)| (a.dot_dense(&sol.x) + e).powi(2))
                .sum::<f64>()
                .sqrt();
            Residuals { primal: viol + (-blocks_min_eig(&sol.x)).max(0.0), dual: 0.0, gap: 0.0 }
        }
        _ => sol.residuals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdpcore::problem::BlockSparse;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    fn toy() -> SdpProblem {
        let mut p = SdpProblem::new(vec![Block::Psd(2)], Sense::Min, "toy");
        p.c.push(0, 0, 0, 1.0);
        p.c.push(0, 1, 1, 1.0);
        let mut a = BlockSparse::new();
        a.push(0, 0, 0, 1.0);
        p.add_constraint(a, 1.0);
        p
    }

    #[test]
    fn trace_minimization() {
        let sol = solve(&toy(), &opts()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.value() - 1.0).abs() < 1e-7, "{}", sol.value());
        assert!(sol.residuals.primal < 1e-7 && sol.residuals.dual < 1e-7);
    }

    #[test]
    fn max_eigenvalue_via_max_sense() {
        // max ⟨M, X⟩ s.t. tr X = 1 gives λ_max(M) = 3 for M = [[2,1],[1,2]].
        let mut p = SdpProblem::new(vec![Block::Psd(2)], Sense::Max, "lmax");
        p.c.push(0, 0, 0, 2.0);
        p.c.push(0, 0, 1, 1.0);
        p.c.push(0, 1, 1, 2.0);
        let mut a = BlockSparse::new();
        a.push(0, 0, 0, 1.0);
        a.push(0, 1, 1, 1.0);
        p.add_constraint(a, 1.0);
        let sol = solve(&p, &opts()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.value() - 3.0).abs() < 1e-7);
        assert!((sol.y[0] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn free_variables_and_lp_blocks() {
        // min x1 + 2 x2 + u  s.t.  x1 + x2 + u = 1, u − x1 = 0  ⇒  u = x1, 2 x1 + x2 = 1.
        // Objective 2 x1 + 2 x2 with x2 = 1 − 2x1, so 2 − 2x1 minimized at x1 = 1/2: value 1.
        let mut p = SdpProblem::new(vec![Block::Diag(2)], Sense::Min, "lp");
        p.c.push(0, 0, 0, 1.0);
        p.c.push(0, 1, 1, 2.0);
        let mut a = BlockSparse::new();
        a.push(0, 0, 0, 1.0);
        a.push(0, 1, 1, 1.0);
        p.add_constraint(a, 1.0);
        let mut a = BlockSparse::new();
        a.push(0, 0, 0, -1.0);
        p.add_constraint(a, 0.0);
        p.add_free(1.0, vec![(0, 1.0), (1, 1.0)]);
        let sol = solve(&p, &opts()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.value() - 1.0).abs() < 1e-7, "{}", sol.value());
        assert!((sol.u[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn detects_primal_infeasibility() {
        // X_11 = −1 is impossible for X ⪰ 0.
        let mut p = SdpProblem::new(vec![Block::Psd(2)], Sense::Min, "infeasible");
        p.c.push(0, 0, 0, 1.0);
        let mut a = BlockSparse::new();
        a.push(0, 0, 0, 1.0);
        p.add_constraint(a, -1.0);
        let sol = solve(&p, &opts()).unwrap();
        assert_eq!(sol.status, Status::PrimalInfeasible);
        assert!(sol.dual_value > 0.0);
    }

    #[test]
    fn detects_dual_infeasibility() {
        // min −X_22 s.t. X_11 = 1: unbounded below.
        let mut p = SdpProblem::new(vec![Block::Psd(2)], Sense::Min, "unbounded");
        p.c.push(0, 1, 1, -1.0);
        let mut a = BlockSparse::new();
        a.push(0, 0, 0, 1.0);
        p.add_constraint(a, 1.0);
        let sol = solve(&p, &opts()).unwrap();
        assert_eq!(sol.status, Status::DualInfeasible);
        assert!(sol.primal_value < 0.0);
    }

    #[test]
    fn unconstrained_problems() {
        let mut p = SdpProblem::new(vec![Block::Psd(2)], Sense::Min, "empty");
        p.c.push(0, 0, 0, 1.0);
        assert_eq!(solve(&p, &opts()).unwrap().status, Status::Optimal);
        p.c.push(0, 1, 1, -1.0);
        assert_eq!(solve(&p, &opts()).unwrap().status, Status::DualInfeasible);
    }

    /// Feasible and bounded by construction: `b = 𝒜(X0)` with `X0 ≻ 0` and `C = Z0 + Σ y0_i A_i` with `Z0 ≻ 0`.
    fn random_problem(seed: u64, sizes: &[usize], m: usize, sense: Sense) -> SdpProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blocks: Vec<Block> = sizes.iter().map(|&s| if s % 3 == 0 { Block::Diag(s) } else { Block::Psd(s) }).collect();
        let mut p = SdpProblem::new(blocks.clone(), sense, "random");
        let rand_spd = |rng: &mut ChaCha8Rng, b: Block| -> DMatrix<f64> {
            let s = b.size();
            match b {
                Block::Psd(_) => {
                    let g = DMatrix::from_fn(s, s, |_, _| rng.gen_range(-1.0..1.0));
                    &g * g.transpose() + DMatrix::identity(s, s) * 0.1
                }
                Block::Diag(_) => DMatrix::from_diagonal(&DVector::from_fn(s, |_, _| rng.gen_range(0.1..2.0))),
            }
        };
        let x0: Vec<DMatrix<f64>> = blocks.iter().map(|&b| rand_spd(&mut rng, b)).collect();
        let z0: Vec<DMatrix<f64>> = blocks.iter().map(|&b| rand_spd(&mut rng, b)).collect();
        let mut c = z0.iter().map(|z| if sense == Sense::Min { z.clone() } else { -z }).collect::<Vec<_>>();
        for _ in 0..m {
            let mut a = BlockSparse::new();
            for (bi, b) in blocks.iter().enumerate() {
                for i in 0..b.size() {
                    for j in i..b.size() {
                        if (matches!(b, Block::Psd(_)) || i == j) && rng.gen_bool(0.6) {
                            a.push(bi, i, j, rng.gen_range(-1.0..1.0));
                        }
                    }
                }
            }
            a.compress();
            let yi: f64 = rng.gen_range(-1.0..1.0);
            a.add_to_dense(yi, &mut c);
            let rhs = a.dot_dense(&x0);
            p.add_constraint(a, rhs);
        }
        for (bi, m) in c.iter().enumerate() {
            for i in 0..m.nrows() {
                for j in i..m.ncols() {
                    if matches!(blocks[bi], Block::Psd(_)) || i == j {
                        p.c.push(bi, i, j, m[(i, j)]);
                    }
                }
            }
        }
        p.c.compress();
        p
    }

    #[test]
    fn deterministic() {
        let p = random_problem(7, &[4, 3, 2], 6, Sense::Min);
        let a = solve(&p, &opts()).unwrap();
        let b = solve(&p, &opts()).unwrap();
        assert_eq!(a.y, b.y);
        assert_eq!(a.primal_value.to_bits(), b.primal_value.to_bits());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn checked_svd_reconstructs(seed in 0u64..10_000, n in 1usize..9, spread in 0i32..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // Lower-triangular products with graded diagonals, like the scaling update sees.
            let tri = |rng: &mut ChaCha8Rng| DMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
                std::cmp::Ordering::Less => 0.0,
                std::cmp::Ordering::Equal => 10f64.powi(-rng.gen_range(0..=spread)),
                std::cmp::Ordering::Greater => rng.gen_range(-1.0..1.0),
            });
            let m = tri(&mut rng).transpose() * tri(&mut rng);
            let (u, sig, v) = checked_svd(&m).unwrap();
            let back = &u * DMatrix::from_diagonal(&sig) * v.transpose();
            prop_assert!((back - &m).amax() <= 1e-9 * m.amax() * n as f64);
        }

        #[test]
        fn random_feasible_problems_solve(seed in 0u64..10_000, m in 1usize..10, max in any::<bool>()) {
            let sense = if max { Sense::Max } else { Sense::Min };
            let p = random_problem(seed, &[3, 4, 1], m, sense);
            let sol = solve(&p, &opts()).unwrap();
            prop_assert_eq!(sol.status, Status::Optimal);
            let (pv, dv, res) = recompute(&p, &sol.x, &sol.u, &sol.y);
            prop_assert!(res.primal <= 1e-7 && res.dual <= 1e-7 && res.gap <= 1e-7, "{:?}", res);
            // Weak duality up to the recomputed residuals.
            let slack = 1e-6 * (1.0 + pv.abs());
            match sense {
                Sense::Min => prop_assert!(dv <= pv + slack),
                Sense::Max => prop_assert!(dv + slack >= pv),
            }
        }
    }
}
