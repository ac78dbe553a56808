//! Linear pencils `A(x) = A_0 + Σ x_p A_p`, their spectrahedra, and the
//! constructors used throughout the crate.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::symcore::SymMatrix;

/// Largest asymmetry accepted when reading a pencil from JSON.
pub const JSON_SYMMETRY_TOL: f64 = 1e-9;

/// A linear matrix pencil with `n` variables and `k×k` coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearPencil {
    n: usize,
    k: usize,
    coeffs: Vec<SymMatrix>,
}

impl LinearPencil {
    /// `coeffs[0]` is the constant term; at least one coefficient is required.
    pub fn new(coeffs: Vec<SymMatrix>) -> Result<Self> {
        let k = coeffs.first().ok_or_else(|| invalid("pencil needs a constant coefficient"))?.dim();
        if let Some(bad) = coeffs.iter().position(|c| c.dim() != k) {
            return Err(invalid(format!("coefficient {bad} has size {}, expected {k}", coeffs[bad].dim())));
        }
        Ok(LinearPencil { n: coeffs.len() - 1, k, coeffs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn coeffs(&self) -> &[SymMatrix] {
        &self.coeffs
    }

    pub fn coeff(&self, p: usize) -> &SymMatrix {
        &self.coeffs[p]
    }

    /// `A_0 = I`.
    pub fn is_monic(&self) -> bool {
        self.coeffs[0] == SymMatrix::identity(self.k)
    }

    /// Largest Frobenius norm among `A_1..A_n` (zero when `n = 0`).
    pub fn max_linear_norm(&self) -> f64 {
        self.coeffs[1..].iter().map(SymMatrix::norm).fold(0.0, f64::max)
    }

    /// Largest Frobenius norm among all coefficients.
    pub fn max_norm(&self) -> f64 {
        self.coeffs.iter().map(SymMatrix::norm).fold(0.0, f64::max)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<SymMatrix> {
        if x.len() != self.n {
            return Err(invalid(format!("point has {} coordinates, pencil has {} variables", x.len(), self.n)));
        }
        Ok(self.evaluate_unchecked(x))
    }

    pub(crate) fn evaluate_unchecked(&self, x: &[f64]) -> SymMatrix {
        let mut m = self.coeffs[0].as_matrix().clone();
        for (xp, ap) in x.iter().zip(&self.coeffs[1..]) {
            if *xp != 0.0 {
                m += ap.as_matrix() * *xp;
            }
        }
        SymMatrix::new(m).expect("finite combination of symmetric matrices")
    }

    /// The pure-linear part `Σ x_p A_p`.
    pub fn linear_part(&self, x: &[f64]) -> Result<SymMatrix> {
        if x.len() != self.n {
            return Err(invalid("direction length does not match pencil"));
        }
        let mut m = DMatrix::zeros(self.k, self.k);
        for (xp, ap) in x.iter().zip(&self.coeffs[1..]) {
            m += ap.as_matrix() * *xp;
        }
        SymMatrix::new(m)
    }

    pub fn contains_point(&self, x: &[f64], tol: f64) -> Result<bool> {
        self.evaluate(x)?.is_psd(tol)
    }

    /// Substitutes `x = x0 + V u`, giving a pencil in `u` (one variable per column of `V`).
    pub fn affine_substitute(&self, x0: &[f64], v: &DMatrix<f64>) -> Result<LinearPencil> {
        if x0.len() != self.n || v.nrows() != self.n {
            return Err(invalid("substitution has wrong dimensions"));
        }
        let mut coeffs = vec![self.evaluate(x0)?];
        for c in 0..v.ncols() {
            let col: Vec<f64> = v.column(c).iter().copied().collect();
            coeffs.push(self.linear_part(&col)?);
        }
        LinearPencil::new(coeffs)
    }

    /// Applies `Wᵀ · W` to every coefficient.
    pub fn congruence(&self, w: &DMatrix<f64>) -> Result<LinearPencil> {
        let coeffs = self.coeffs.iter().map(|c| c.congruence(w)).collect::<Result<Vec<_>>>()?;
        LinearPencil::new(coeffs)
    }

    /// `A(x/ν)`, whose spectrahedron is `ν·S_A`.
    pub fn scaled(&self, nu: f64) -> Result<LinearPencil> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(invalid("scale factor must be positive"));
        }
        let mut coeffs = vec![self.coeffs[0].clone()];
        coeffs.extend(self.coeffs[1..].iter().map(|c| c.scale(1.0 / nu)));
        LinearPencil::new(coeffs)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&PencilJson::from(self)).expect("pencil serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&PencilJson::from(self)).expect("pencil serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: PencilJson = serde_json::from_str(text).map_err(|e| invalid(format!("malformed pencil JSON: {e}")))?;
        raw.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct PencilJson {
    n: usize,
    k: usize,
    coeffs: Vec<Vec<f64>>,
}

impl From<&LinearPencil> for PencilJson {
    fn from(p: &LinearPencil) -> Self {
        let coeffs = p
            .coeffs
            .iter()
            .map(|c| {
                let m = c.as_matrix();
                (0..p.k).flat_map(|i| (0..p.k).map(move |j| m[(i, j)])).collect()
            })
            .collect();
        PencilJson { n: p.n, k: p.k, coeffs }
    }
}

impl TryFrom<PencilJson> for LinearPencil {
    type Error = crate::Error;

    fn try_from(raw: PencilJson) -> Result<Self> {
        if raw.k == 0 {
            return Err(invalid("k must be positive"));
        }
        if raw.coeffs.len() != raw.n + 1 {
            return Err(invalid(format!("expected {} coefficient arrays, found {}", raw.n + 1, raw.coeffs.len())));
        }
        let mut coeffs = Vec::with_capacity(raw.coeffs.len());
        for (p, data) in raw.coeffs.iter().enumerate() {
            if data.len() != raw.k * raw.k {
                return Err(invalid(format!("coefficient {p} has {} entries, expected {}", data.len(), raw.k * raw.k)));
            }
            let m = DMatrix::from_row_slice(raw.k, raw.k, data);
            let asym = (&m - m.transpose()).amax();
            if asym > JSON_SYMMETRY_TOL {
                return Err(invalid(format!("coefficient {p} is not symmetric (max |M - Mᵀ| = {asym:.3e})")));
            }
            coeffs.push(SymMatrix::new(m)?);
        }
        LinearPencil::new(coeffs)
    }
}

fn sym_pair(dim: usize, i: usize, j: usize, v: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, dim);
    m[(i, j)] = v;
    m[(j, i)] = v;
    m
}

/// `I_{n+1} + Σ (x_p / a_p)(E_{p,n+1} + E_{n+1,p})`: the ellipsoid with the given semiaxes.
pub fn ellipsoid_pencil(semiaxes: &[f64]) -> Result<LinearPencil> {
    if semiaxes.is_empty() {
        return Err(invalid("need at least one semiaxis"));
    }
    if let Some(a) = semiaxes.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(invalid(format!("semiaxis {a} is not positive")));
    }
    let n = semiaxes.len();
    let mut coeffs = vec![SymMatrix::identity(n + 1)];
    for (p, a) in semiaxes.iter().enumerate() {
        coeffs.push(SymMatrix::new(sym_pair(n + 1, p, n, 1.0 / a))?);
    }
    LinearPencil::new(coeffs)
}

/// Ball of radius `nu` in `n` dimensions, in normal form.
pub fn ball_pencil(n: usize, nu: f64) -> Result<LinearPencil> {
    ellipsoid_pencil(&vec![nu; n])
}

/// `[[1 + x1/ν, x2/ν], [x2/ν, 1 − x1/ν]]`: the disk of radius `ν` as a `2×2` pencil.
pub fn disk_pencil(nu: f64) -> Result<LinearPencil> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(invalid(format!("radius {nu} is not positive")));
    }
    LinearPencil::new(vec![
        SymMatrix::identity(2),
        SymMatrix::from_row_slice(2, &[1.0 / nu, 0.0, 0.0, -1.0 / nu])?,
        SymMatrix::from_row_slice(2, &[0.0, 1.0 / nu, 1.0 / nu, 0.0])?,
    ])
}

/// Diagonal pencil `diag(b + A x)` of the polyhedron `{x : b + Ax ≥ 0}`.
pub fn polytope_pencil(a: &DMatrix<f64>, b: &[f64]) -> Result<LinearPencil> {
    if a.nrows() != b.len() || b.is_empty() {
        return Err(invalid("polytope data has mismatched or empty rows"));
    }
    let mut coeffs = vec![SymMatrix::new(DMatrix::from_diagonal(&DVector::from_row_slice(b)))?];
    for p in 0..a.ncols() {
        coeffs.push(SymMatrix::new(DMatrix::from_diagonal(&a.column(p).into_owned()))?);
    }
    LinearPencil::new(coeffs)
}

/// Variable order of the elliptope: `(0,1), (0,2), …, (k-2,k-1)`.
pub fn elliptope_pairs(k: usize) -> Vec<(usize, usize)> {
    (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect()
}

/// `I_k + Σ_{i<j} x_ij (E_ij + E_ji)`.
pub fn elliptope_pencil(k: usize) -> Result<LinearPencil> {
    if k < 2 {
        return Err(invalid("elliptope needs k >= 2"));
    }
    let mut coeffs = vec![SymMatrix::identity(k)];
    for (i, j) in elliptope_pairs(k) {
        coeffs.push(SymMatrix::new(sym_pair(k, i, j, 1.0))?);
    }
    LinearPencil::new(coeffs)
}

/// `1 ⊕ A(x)`; the spectrahedron is unchanged.
pub fn extend(p: &LinearPencil) -> LinearPencil {
    let k = p.k + 1;
    let coeffs = p
        .coeffs
        .iter()
        .enumerate()
        .map(|(idx, c)| {
            let mut m = DMatrix::zeros(k, k);
            m.view_mut((1, 1), (p.k, p.k)).copy_from(c.as_matrix());
            if idx == 0 {
                m[(0, 0)] = 1.0;
            }
            SymMatrix::new(m).expect("block of a symmetric matrix")
        })
        .collect();
    LinearPencil::new(coeffs).expect("same sizes")
}

/// Random pencil: zero-diagonal coefficients with `U[-1,1]` off-diagonal
/// entries, each kept with probability `density`; the constant term gets
/// `diag0` on its diagonal.
pub fn random_pencil(n: usize, k: usize, density: f64, diag0: f64, seed: u64) -> Result<LinearPencil> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(invalid("density must lie in (0, 1]"));
    }
    if !(diag0 > 0.0 && diag0.is_finite()) {
        return Err(invalid("diag0 must be positive"));
    }
    if k == 0 {
        return Err(invalid("k must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = Vec::with_capacity(n + 1);
    for p in 0..=n {
        let mut m = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in i + 1..k {
                let v: f64 = rng.gen_range(-1.0..=1.0);
                let keep = rng.gen_bool(density);
                if keep {
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
        }
        if p == 0 {
            m.fill_diagonal(diag0);
        }
        coeffs.push(SymMatrix::new(m)?);
    }
    LinearPencil::new(coeffs)
}

/// Off-diagonal density of the random test instances.
pub const RANDOM_DENSITY: f64 = 0.35;

/// Random containment instance: `A` with unit constant diagonal, `B` with
/// constant diagonal `diag_b`, both with sparse `U[-1,1]` off-diagonal entries.
///
/// Candidates whose spectrahedra are unbounded (linearly dependent `A_1..A_n`;
/// the coefficients have zero diagonal, so this is exact) or have no interior
/// point are discarded, and the next candidate of the seeded stream is tried.
/// Returns the pair and the number of candidates drawn.
pub fn random_pair(n: usize, k: usize, l: usize, diag_b: f64, seed: u64) -> Result<(LinearPencil, LinearPencil, usize)> {
    if 2 * n > k.min(l) * k.min(l).saturating_sub(1) {
        return Err(invalid(format!("{n} zero-diagonal coefficients cannot be independent at size {}", k.min(l))));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 1..=1000 {
        let a = random_pencil(n, k, RANDOM_DENSITY, 1.0, rng.gen())?;
        let b = random_pencil(n, l, RANDOM_DENSITY, diag_b, rng.gen())?;
        if bounded_with_interior(&a) && bounded_with_interior(&b) {
            return Ok((a, b, attempt));
        }
    }
    Err(invalid(format!("no admissible random pair for n={n}, k={k}, l={l} after 1000 draws")))
}

fn bounded_with_interior(p: &LinearPencil) -> bool {
    let n = p.n();
    if n > 0 {
        let cols: Vec<DVector<f64>> = p.coeffs()[1..].iter().map(|c| c.svec()).collect();
        let m = DMatrix::from_columns(&cols);
        let sv = m.singular_values();
        if sv.min() <= 1e-9 * sv.max().max(1.0) {
            return false;
        }
    }
    matches!(crate::sdpcore::feasibility_probe(p), crate::sdpcore::ProbeResult::NonEmpty { margin, .. } if margin > 1e-6)
}

/// A linear map `Φ: 𝒮_k → 𝒮_l`, stored by the images of the basis
/// `E_ii` (diagonal) and `E_ij + E_ji` (`i < j`), in row-major upper-triangular order.
///
/// `skew`, when present, holds the (antisymmetric) images of `E_ij − E_ji` for
/// `i < j` in the same order, which fixes an extension to all of `ℝ^{k×k}`.
/// Without it the extension vanishes on antisymmetric matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub k: usize,
    pub l: usize,
    pub action: Vec<SymMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skew: Option<Vec<DMatrix<f64>>>,
}

/// Upper-triangular index pairs in row-major order.
pub fn upper_pairs(k: usize) -> Vec<(usize, usize)> {
    (0..k).flat_map(|i| (i..k).map(move |j| (i, j))).collect()
}

impl MapSpec {
    pub fn new(k: usize, l: usize, action: Vec<SymMatrix>, skew: Option<Vec<DMatrix<f64>>>) -> Result<Self> {
        if k == 0 || l == 0 {
            return Err(invalid("map dimensions must be positive"));
        }
        if action.len() != k * (k + 1) / 2 {
            return Err(invalid(format!("map needs {} basis images, got {}", k * (k + 1) / 2, action.len())));
        }
        if action.iter().any(|m| m.dim() != l) {
            return Err(invalid("basis images must all be l×l"));
        }
        if let Some(s) = &skew {
            if s.len() != k * (k - 1) / 2 {
                return Err(invalid("skew images must number k(k-1)/2"));
            }
            for m in s {
                if m.nrows() != l || m.ncols() != l || (m + m.transpose()).amax() > JSON_SYMMETRY_TOL {
                    return Err(invalid("skew images must be antisymmetric l×l matrices"));
                }
            }
        }
        Ok(MapSpec { k, l, action, skew })
    }

    /// Builds the map from a closure acting on full `k×k` matrices.
    pub fn from_fn(k: usize, l: usize, f: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> Result<Self> {
        let mut action = Vec::new();
        for (i, j) in upper_pairs(k) {
            let basis = if i == j { sym_pair(k, i, i, 1.0) } else { sym_pair(k, i, j, 1.0) };
            action.push(SymMatrix::new(f(&basis))?);
        }
        let mut skew = Vec::new();
        for (i, j) in elliptope_pairs(k) {
            let mut e = DMatrix::zeros(k, k);
            e[(i, j)] = 1.0;
            e[(j, i)] = -1.0;
            skew.push(f(&e));
        }
        MapSpec::new(k, l, action, Some(skew))
    }

    pub fn identity(k: usize) -> Self {
        MapSpec::from_fn(k, k, |a| a.clone()).expect("identity map is valid")
    }

    /// The Choi-type map `A ↦ 2·diag(A_11+A_22, A_22+A_33, A_33+A_11) − A` on 3×3 matrices.
    pub fn choi_example() -> Self {
        MapSpec::from_fn(3, 3, |a| {
            let mut out = -a.clone();
            for i in 0..3 {
                let j = (i + 1) % 3;
                out[(i, i)] += 2.0 * (a[(i, i)] + a[(j, j)]);
            }
            out
        })
        .expect("Choi-type map is valid")
    }

    /// `Φ(A)` for symmetric `A`.
    pub fn apply(&self, a: &SymMatrix) -> Result<SymMatrix> {
        if a.dim() != self.k {
            return Err(invalid("argument has wrong size for the map"));
        }
        let mut out = DMatrix::zeros(self.l, self.l);
        for ((i, j), img) in upper_pairs(self.k).into_iter().zip(&self.action) {
            out += img.as_matrix() * a.get(i, j);
        }
        SymMatrix::new(out)
    }

    /// Image of the matrix unit `E_ij` under the extension to all matrices.
    pub fn image_of_unit(&self, i: usize, j: usize) -> DMatrix<f64> {
        let pos = |a: usize, b: usize| upper_pairs(self.k).iter().position(|&q| q == (a, b)).expect("valid pair");
        if i == j {
            return self.action[pos(i, i)].as_matrix().clone();
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let sym = self.action[pos(a, b)].as_matrix();
        let skew = match &self.skew {
            Some(s) => {
                let q = elliptope_pairs(self.k).iter().position(|&q| q == (a, b)).expect("valid pair");
                s[q].clone()
            }
            None => DMatrix::zeros(self.l, self.l),
        };
        if i < j {
            (sym + skew) * 0.5
        } else {
            (sym - skew) * 0.5
        }
    }
}

/// Orthonormal basis of the traceless symmetric `k×k` matrices: the
/// off-diagonal elements `(E_ij + E_ji)/√2` in pair order, followed by
/// `(Σ_{i<d} E_ii − d·E_dd)/√(d(d+1))` for `d = 1..k-1`.
pub fn traceless_basis(k: usize) -> Vec<SymMatrix> {
    let mut out = Vec::new();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for (i, j) in elliptope_pairs(k) {
        out.push(SymMatrix::new(sym_pair(k, i, j, h)).expect("symmetric"));
    }
    for d in 1..k {
        let mut m = DMatrix::zeros(k, k);
        let s = 1.0 / ((d * (d + 1)) as f64).sqrt();
        for i in 0..d {
            m[(i, i)] = s;
        }
        m[(d, d)] = -(d as f64) * s;
        out.push(SymMatrix::new(m).expect("symmetric"));
    }
    out
}

/// Coordinates of a unit-trace symmetric matrix in the slice parametrization.
pub fn slice_coordinates(a: &SymMatrix) -> Vec<f64> {
    traceless_basis(a.dim()).iter().map(|g| g.dot(a)).collect()
}

/// Pencils `(A, B)` with `A(x) = I_k/k + Σ x_α G_α` (unit-trace slice) and
/// `B(x) = Φ(A(x))`, so that `Φ` is positive iff `S_A ⊆ S_B`.
pub fn map_to_pencils(m: &MapSpec) -> Result<(LinearPencil, LinearPencil)> {
    let basis = traceless_basis(m.k);
    let mut a = vec![SymMatrix::identity(m.k).scale(1.0 / m.k as f64)];
    a.extend(basis.iter().cloned());
    let b = a.iter().map(|c| m.apply(c)).collect::<Result<Vec<_>>>()?;
    Ok((LinearPencil::new(a)?, LinearPencil::new(b)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn disk() -> LinearPencil {
        LinearPencil::new(vec![
            SymMatrix::identity(2),
            SymMatrix::from_row_slice(2, &[1.0, 0.0, 0.0, -1.0]).unwrap(),
            SymMatrix::from_row_slice(2, &[0.0, 1.0, 1.0, 0.0]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let d = disk();
        assert_eq!(d.evaluate(&[0.0, 0.0]).unwrap(), SymMatrix::identity(2));
        assert_eq!(d.evaluate(&[1.0, 0.0]).unwrap(), SymMatrix::from_row_slice(2, &[2.0, 0.0, 0.0, 0.0]).unwrap());
        assert!(d.evaluate(&[1.0]).is_err());

        let ball = ball_pencil(2, 1.0).unwrap();
        let expect = SymMatrix::from_row_slice(3, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(ball.evaluate(&[1.0, 0.0]).unwrap(), expect);
    }

    #[test]
    fn membership_examples() {
        let d = disk();
        assert!(!d.contains_point(&[1.1, 0.0], 1e-9).unwrap());
        assert!(d.contains_point(&[1.0, 0.0], 1e-9).unwrap());
        let e = elliptope_pencil(3).unwrap();
        assert!(e.contains_point(&[1.0, 1.0, 1.0], 1e-9).unwrap());
        assert!(!e.contains_point(&[1.0, 1.0, 1.01], 1e-9).unwrap());
        // The perturbed point fails through the determinant sign.
        let m = e.evaluate(&[1.0, 1.0, 1.01]).unwrap();
        assert!(m.as_matrix().determinant() < 0.0);
    }

    #[test]
    fn ellipsoid_rejects_bad_axes() {
        assert!(ellipsoid_pencil(&[1.0, 0.0]).is_err());
        assert!(ellipsoid_pencil(&[-1.0]).is_err());
        let seg = ellipsoid_pencil(&[1.0]).unwrap();
        for x in [-1.0, -0.5, 0.0, 1.0] {
            assert!(seg.contains_point(&[x], 1e-12).unwrap());
        }
        assert!(!seg.contains_point(&[1.001], 1e-9).unwrap());
    }

    #[test]
    fn ellipsoid_matches_quadratic_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let axes = [0.5, 1.5, 2.0];
        let p = ellipsoid_pencil(&axes).unwrap();
        for _ in 0..10_000 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.5..2.5)).collect();
            let q: f64 = x.iter().zip(&axes).map(|(x, a)| (x / a).powi(2)).sum();
            if (q - 1.0).abs() < 1e-6 {
                continue;
            }
            assert_eq!(p.contains_point(&x, 1e-9).unwrap(), q <= 1.0);
        }
    }

    #[test]
    fn polytope_examples() {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
        let sq = polytope_pencil(&a, &[1.0; 4]).unwrap();
        assert!(sq.is_monic());
        assert_eq!(sq.k(), 4);
        let half = polytope_pencil(&DMatrix::from_element(1, 1, 1.0), &[0.0]).unwrap();
        assert!(!half.is_monic());
        assert!(half.contains_point(&[1e6], 0.0).unwrap());
        assert!(!half.contains_point(&[-1e-3], 1e-9).unwrap());

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = DMatrix::from_fn(5, 3, |_, _| rng.gen_range(-1.0..1.0));
        let b: Vec<f64> = (0..5).map(|_| rng.gen_range(0.0..1.0)).collect();
        let p = polytope_pencil(&a, &b).unwrap();
        for _ in 0..1000 {
            let x = DVector::from_fn(3, |_, _| rng.gen_range(-2.0..2.0));
            let slack = DVector::from_row_slice(&b) + &a * &x;
            assert_eq!(p.contains_point(x.as_slice(), 0.0).unwrap(), slack.min() >= 0.0);
        }
    }

    #[test]
    fn elliptope_shape() {
        let e = elliptope_pencil(3).unwrap();
        assert_eq!((e.n(), e.k()), (3, 3));
        assert_eq!(e.evaluate(&[0.0; 3]).unwrap(), SymMatrix::identity(3));
        assert_eq!(elliptope_pairs(4)[..3], [(0, 1), (0, 2), (0, 3)]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..2000 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.2..1.2)).collect();
            if e.contains_point(&x, 0.0).unwrap() {
                assert!(x.iter().all(|v| 1.0 - v * v >= 0.0));
            }
        }
    }

    #[test]
    fn extension_layout() {
        let d = disk();
        let e = extend(&d);
        assert_eq!(e.k(), 3);
        assert_eq!(e.coeff(0).get(0, 0), 1.0);
        for p in 1..=2 {
            assert!((0..3).all(|j| e.coeff(p).get(0, j) == 0.0));
        }
        for i in -12..=12 {
            for j in -12..=12 {
                let x = [i as f64 / 10.0, j as f64 / 10.0];
                assert_eq!(d.contains_point(&x, 1e-12).unwrap(), e.contains_point(&x, 1e-12).unwrap());
            }
        }
    }

    #[test]
    fn random_pencil_recipe() {
        let a = random_pencil(3, 5, 0.35, 1.0, 9).unwrap();
        assert_eq!(a, random_pencil(3, 5, 0.35, 1.0, 9).unwrap());
        assert_ne!(a, random_pencil(3, 5, 0.35, 1.0, 10).unwrap());
        assert!((0..5).all(|i| a.coeff(0).get(i, i) == 1.0));
        assert!((1..=3).all(|p| (0..5).all(|i| a.coeff(p).get(i, i) == 0.0)));
        assert!(random_pencil(1, 2, 0.0, 1.0, 0).is_err());

        // Nonzero fraction over 10⁴ off-diagonal entries.
        let b = random_pencil(999, 5, 0.35, 2.0, 4).unwrap();
        let (mut nz, mut total) = (0usize, 0usize);
        for c in b.coeffs() {
            for i in 0..5 {
                for j in i + 1..5 {
                    total += 1;
                    nz += usize::from(c.get(i, j) != 0.0);
                    assert!(c.get(i, j).abs() <= 1.0);
                }
            }
        }
        assert_eq!(total, 10_000);
        assert!(((nz as f64 / total as f64) - 0.35).abs() < 0.05);
        assert_eq!(b.coeff(0).get(2, 2), 2.0);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let p = random_pencil(2, 3, 0.8, 1.0, 3).unwrap();
        assert_eq!(LinearPencil::from_json(&p.to_json()).unwrap(), p);
        let asym = r#"{"n":0,"k":2,"coeffs":[[1,0.5,0.4,1]]}"#;
        assert!(LinearPencil::from_json(asym).is_err());
        let short = r#"{"n":1,"k":2,"coeffs":[[1,0,0,1]]}"#;
        assert!(LinearPencil::from_json(short).is_err());
        let tiny = r#"{"n":0,"k":2,"coeffs":[[1,0.5,0.5000000000001,1]]}"#;
        let q = LinearPencil::from_json(tiny).unwrap();
        assert_eq!(q.coeff(0).get(0, 1), q.coeff(0).get(1, 0));
    }

    #[test]
    fn identity_map_gives_equal_pencils() {
        let (a, b) = map_to_pencils(&MapSpec::identity(2)).unwrap();
        assert_eq!(a.n(), 2);
        for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
            assert!((x.as_matrix() - y.as_matrix()).amax() < 1e-15);
        }
    }

    #[test]
    fn choi_map_pencil_shape() {
        let (a, b) = map_to_pencils(&MapSpec::choi_example()).unwrap();
        assert_eq!((a.n(), a.k(), b.k()), (5, 3, 3));
    }

    #[test]
    fn traceless_basis_is_orthonormal() {
        for k in 2..6 {
            let g = traceless_basis(k);
            assert_eq!(g.len(), k * (k + 1) / 2 - 1);
            for (i, a) in g.iter().enumerate() {
                assert!(a.as_matrix().trace().abs() < 1e-14);
                for (j, b) in g.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((a.dot(b) - want).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn slice_parametrization_matches_direct_positivity() {
        let m = MapSpec::choi_example();
        let (a, b) = map_to_pencils(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..1000 {
            let g = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
            let mut psd = &g * g.transpose();
            psd /= psd.trace();
            let s = SymMatrix::new(psd).unwrap();
            let x = slice_coordinates(&s);
            let back = a.evaluate(&x).unwrap();
            assert!((back.as_matrix() - s.as_matrix()).amax() < 1e-12);
            let direct = m.apply(&s).unwrap();
            let via = b.evaluate(&x).unwrap();
            assert!((direct.as_matrix() - via.as_matrix()).amax() < 1e-12);
            assert_eq!(direct.is_psd(1e-12).unwrap(), via.is_psd(1e-12).unwrap());
        }
    }

    proptest! {
        #[test]
        fn evaluate_is_affine(seed in 0u64..1000, xs in prop::collection::vec(-3.0f64..3.0, 6)) {
            let p = random_pencil(3, 4, 0.5, 1.0, seed).unwrap();
            let (x, y) = xs.split_at(3);
            let mid: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a + b) / 2.0).collect();
            let lhs = p.evaluate(&mid).unwrap();
            let rhs = p.evaluate(x).unwrap().add_scaled(1.0, &p.evaluate(y).unwrap()).scale(0.5);
            prop_assert!((lhs.as_matrix() - rhs.as_matrix()).amax() <= 1e-12);
        }

        #[test]
        fn json_round_trip_is_bit_exact(seed in 0u64..10_000, n in 0usize..4, k in 1usize..5) {
            let p = random_pencil(n, k, 0.7, 1.0 + seed as f64 * 1e-3, seed).unwrap();
            let q = LinearPencil::from_json(&p.to_json()).unwrap();
            for (a, b) in p.coeffs().iter().zip(q.coeffs()) {
                for (u, v) in a.as_matrix().iter().zip(b.as_matrix().iter()) {
                    prop_assert_eq!(u.to_bits(), v.to_bits());
                }
            }
        }

        #[test]
        fn random_pairs_are_admissible_and_deterministic(seed in 0u64..200, n in 1usize..4, k in 2usize..5, l in 2usize..5) {
            prop_assume!(2 * n <= k.min(l) * (k.min(l) - 1));
            let (a, b, _) = random_pair(n, k, l, 2.0, seed).unwrap();
            prop_assert!(bounded_with_interior(&a) && bounded_with_interior(&b));
            prop_assert_eq!(a.coeff(0).as_matrix().diagonal().iter().copied().collect::<Vec<_>>(), vec![1.0; k]);
            prop_assert_eq!(b.coeff(0).get(0, 0), 2.0);
            let (a2, b2, _) = random_pair(n, k, l, 2.0, seed).unwrap();
            prop_assert_eq!((a, b), (a2, b2));
        }

        #[test]
        fn extension_preserves_membership(seed in 0u64..500, xs in prop::collection::vec(-2.0f64..2.0, 2)) {
            let p = random_pencil(2, 3, 0.6, 1.0, seed).unwrap();
            let m = p.evaluate(&xs).unwrap().min_eigenvalue().unwrap();
            prop_assume!(m.abs() > 1e-9);
            prop_assert_eq!(p.contains_point(&xs, 0.0).unwrap(), extend(&p).contains_point(&xs, 0.0).unwrap());
        }
    }
}
