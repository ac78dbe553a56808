use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::pencil::LinearPencil;

/// Exponent vector of a monomial.
pub type Exponent = Vec<u16>;

pub fn degree(a: &[u16]) -> usize {
    a.iter().map(|&e| e as usize).sum()
}

pub fn add_exponents(a: &[u16], b: &[u16]) -> Exponent {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// `C(n, r)` in floating point-free integer arithmetic.
pub fn binomial(n: usize, r: usize) -> usize {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    (0..r).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// All monomials in `vars` variables of degree at most `degree`, graded-lex
/// ordered: by total degree, then with larger leading exponents first
/// (`1, x1, x2, x1², x1x2, x2², …`).
#[derive(Clone, Debug)]
pub struct MonomialBasis {
    vars: usize,
    degree: usize,
    monomials: Vec<Exponent>,
    index: HashMap<Exponent, usize>,
}

impl MonomialBasis {
    pub fn new(vars: usize, degree: usize) -> Self {
        let mut monomials = Vec::with_capacity(binomial(vars + degree, degree));
        for d in 0..=degree {
            let mut cur = vec![0u16; vars];
            push_degree(&mut monomials, &mut cur, 0, d);
        }
        let index = monomials.iter().enumerate().map(|(i, a)| (a.clone(), i)).collect();
        MonomialBasis { vars, degree, monomials, index }
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[Exponent] {
        &self.monomials
    }

    pub fn monomial(&self, i: usize) -> &Exponent {
        &self.monomials[i]
    }

    pub fn index_of(&self, a: &[u16]) -> Option<usize> {
        self.index.get(a).copied()
    }

    /// Values of all basis monomials at `x`.
    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        self.monomials.iter().map(|a| monomial_value(a, x)).collect()
    }
}

fn push_degree(out: &mut Vec<Exponent>, cur: &mut Exponent, var: usize, remaining: usize) {
    if cur.is_empty() {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    if var + 1 == cur.len() {
        cur[var] = remaining as u16;
        out.push(cur.clone());
        cur[var] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        cur[var] = e as u16;
        push_degree(out, cur, var + 1, remaining - e);
    }
    cur[var] = 0;
}

pub fn monomial_value(a: &[u16], x: &[f64]) -> f64 {
    a.iter().zip(x).map(|(&e, &v)| v.powi(e as i32)).product()
}

/// Sparse polynomial with real coefficients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly {
    vars: usize,
    terms: BTreeMap<Exponent, f64>,
}

impl Poly {
    pub fn zero(vars: usize) -> Self {
        Poly { vars, terms: BTreeMap::new() }
    }

    pub fn constant(vars: usize, c: f64) -> Self {
        let mut p = Poly::zero(vars);
        p.add_term(vec![0; vars], c);
        p
    }

    /// The coordinate `x_i`.
    pub fn var(vars: usize, i: usize) -> Self {
        let mut e = vec![0; vars];
        e[i] = 1;
        let mut p = Poly::zero(vars);
        p.add_term(e, 1.0);
        p
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn add_term(&mut self, exp: Exponent, c: f64) {
        assert_eq!(exp.len(), self.vars, "exponent length");
        if c == 0.0 {
            return;
        }
        let slot = self.terms.entry(exp.clone()).or_insert(0.0);
        *slot += c;
        if *slot == 0.0 {
            self.terms.remove(&exp);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, f64)> {
        self.terms.iter().map(|(e, c)| (e, *c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; 0 for the zero polynomial.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(|e| degree(e)).max().unwrap_or(0)
    }

    pub fn coefficient(&self, exp: &[u16]) -> f64 {
        self.terms.get(exp).copied().unwrap_or(0.0)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in other.terms() {
            out.add_term(e.clone(), c);
        }
        out
    }

    pub fn scale(&self, a: f64) -> Poly {
        let mut out = Poly::zero(self.vars);
        for (e, c) in self.terms() {
            out.add_term(e.clone(), a * c);
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero(self.vars);
        for (a, c) in self.terms() {
            for (b, d) in other.terms() {
                out.add_term(add_exponents(a, b), c * d);
            }
        }
        out
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.terms().map(|(e, c)| c * monomial_value(e, x)).sum()
    }
}

/// Symmetric matrix whose entries are polynomials.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMatrix {
    size: usize,
    entries: Vec<Poly>,
}

impl PolyMatrix {
    pub fn new(size: usize, vars: usize) -> Self {
        PolyMatrix { size, entries: vec![Poly::zero(vars); size * size] }
    }

    /// `1×1` matrix holding `g`.
    pub fn scalar(g: Poly) -> Self {
        PolyMatrix { size: 1, entries: vec![g] }
    }

    /// The pencil `A(x)` embedded in `vars ≥ n` variables (the first `n` are `x`).
    pub fn from_pencil(p: &LinearPencil, vars: usize) -> Self {
        let k = p.k();
        let mut m = PolyMatrix::new(k, vars);
        for i in 0..k {
            for j in 0..k {
                let e = &mut m.entries[i * k + j];
                e.add_term(vec![0; vars], p.coeff(0).get(i, j));
                for q in 0..p.n() {
                    let mut exp = vec![0; vars];
                    exp[q] = 1;
                    e.add_term(exp, p.coeff(q + 1).get(i, j));
                }
            }
        }
        m
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> &Poly {
        &self.entries[i * self.size + j]
    }

    /// Sets `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, p: Poly) {
        self.entries[j * self.size + i] = p.clone();
        self.entries[i * self.size + j] = p;
    }

    pub fn degree(&self) -> usize {
        self.entries.iter().map(Poly::degree).max().unwrap_or(0)
    }

    pub fn evaluate(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.size, self.size, |i, j| self.get(i, j).evaluate(x))
    }
}

/// Coefficient functional of `L_y(poly)` over the basis of moments up to degree `2t`.
pub fn linearize(poly: &Poly, basis: &MonomialBasis) -> Result<Vec<(usize, f64)>> {
    if poly.vars() != basis.vars() {
        return Err(invalid("polynomial and basis have different variable counts"));
    }
    poly.terms()
        .map(|(e, c)| {
            basis
                .index_of(e)
                .map(|i| (i, c))
                .ok_or_else(|| invalid(format!("monomial of degree {} exceeds the basis degree {}", degree(e), basis.degree())))
        })
        .collect()
}

/// `(α, β) ↦ index of y_{α+β}` in the degree-`2t` basis.
pub fn moment_matrix_structure(basis: &MonomialBasis) -> Vec<Vec<usize>> {
    let full = MonomialBasis::new(basis.vars(), 2 * basis.degree());
    basis
        .monomials()
        .iter()
        .map(|a| {
            basis
                .monomials()
                .iter()
                .map(|b| full.index_of(&add_exponents(a, b)).expect("sum of two degree-t monomials"))
                .collect()
        })
        .collect()
}

/// Dense matrix of sparse linear forms `Σ coef·y_idx` over the moments.
pub type LinearFormMatrix = Vec<Vec<Vec<(usize, f64)>>>;

/// Block `(α, β)`, entry `(i, j)` at row `α·s + i`, column `β·s + j`: the
/// linearization of `x^{α+β} G_ij(x)` over `full`.
pub fn localizing_matrix_structure(g: &PolyMatrix, basis: &MonomialBasis, full: &MonomialBasis) -> Result<LinearFormMatrix> {
    let s = g.size();
    let dim = s * basis.len();
    let mut out = vec![vec![Vec::new(); dim]; dim];
    for (ai, a) in basis.monomials().iter().enumerate() {
        for (bi, b) in basis.monomials().iter().enumerate() {
            let ab = add_exponents(a, b);
            for i in 0..s {
                for j in 0..s {
                    let mut shifted = Poly::zero(g.get(i, j).vars());
                    for (e, c) in g.get(i, j).terms() {
                        shifted.add_term(add_exponents(e, &ab), c);
                    }
                    out[ai * s + i][bi * s + j] = linearize(&shifted, full)?;
                }
            }
        }
    }
    Ok(out)
}
