//! Dense real symmetric matrices and the spectral helpers built on them.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Relative threshold used for every numerical rank decision:
/// a singular value `σ` counts as zero when `σ ≤ RANK_TOL · σ_max · dim`.
pub const RANK_TOL: f64 = 1e-9;

const EIGEN_MAX_ITER: usize = 10_000;

/// A dense real symmetric matrix.
///
/// Construction stores `(M + Mᵀ)/2`, so the entries are exactly symmetric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DMatrix<f64>", into = "DMatrix<f64>")]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Symmetrizes `m`. Fails on non-square, empty, or non-finite input.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(invalid(format!("matrix is {}x{}, not square", m.nrows(), m.ncols())));
        }
        if m.nrows() == 0 {
            return Err(invalid("matrix dimension must be at least 1"));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(invalid("matrix has non-finite entries"));
        }
        let t = m.transpose();
        Ok(SymMatrix((m + t) * 0.5))
    }

    pub fn from_row_slice(dim: usize, data: &[f64]) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(invalid(format!("expected {} entries, got {}", dim * dim, data.len())));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, data))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        SymMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        SymMatrix(DMatrix::identity(dim, dim))
    }

    /// `E_ij + E_ji`; on the diagonal this is `2 E_ii`.
    pub fn unit_sym(dim: usize, i: usize, j: usize) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        m[(i, j)] += 1.0;
        m[(j, i)] += 1.0;
        SymMatrix(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn scale(&self, a: f64) -> Self {
        SymMatrix(&self.0 * a)
    }

    /// `self + a * other`; dimensions must agree.
    pub fn add_scaled(&self, a: f64, other: &SymMatrix) -> Self {
        SymMatrix(&self.0 + &other.0 * a)
    }

    /// `Vᵀ M V`.
    pub fn congruence(&self, v: &DMatrix<f64>) -> Result<Self> {
        if v.nrows() != self.dim() || v.ncols() == 0 {
            return Err(invalid("congruence basis has wrong shape"));
        }
        Self::new(v.transpose() * &self.0 * v)
    }

    /// Full eigendecomposition, eigenvalues ascending.
    pub fn eigen(&self) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let eig = SymmetricEigen::try_new(self.0.clone(), f64::EPSILON, EIGEN_MAX_ITER)
            .ok_or_else(|| Error::NumericalFailure("symmetric eigensolver did not converge".into()))?;
        let n = self.dim();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let vals = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
        let mut vecs = DMatrix::zeros(n, n);
        for (c, &i) in order.iter().enumerate() {
            vecs.set_column(c, &eig.eigenvectors.column(i));
        }
        Ok((vals, vecs))
    }

    /// Smallest eigenvalue together with a unit eigenvector.
    pub fn min_eigenpair(&self) -> Result<(f64, DVector<f64>)> {
        let (vals, vecs) = self.eigen()?;
        Ok((vals[0], vecs.column(0).into_owned()))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.min_eigenpair()?.0)
    }

    /// `λ_min(self) ≥ −tol`.
    pub fn is_psd(&self, tol: f64) -> Result<bool> {
        if tol < 0.0 {
            return Err(invalid("tolerance must be nonnegative"));
        }
        Ok(self.min_eigenvalue()? >= -tol)
    }

    /// Upper-triangular vectorization with off-diagonal entries scaled by √2,
    /// so that `svec(A)·svec(B) = ⟨A, B⟩`.
    pub fn svec(&self) -> DVector<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                let v = self.0[(i, j)];
                out.push(if i == j { v } else { v * std::f64::consts::SQRT_2 });
            }
        }
        DVector::from_vec(out)
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &SymMatrix) -> f64 {
        self.0.dot(&other.0)
    }
}

impl TryFrom<DMatrix<f64>> for SymMatrix {
    type Error = Error;
    fn try_from(m: DMatrix<f64>) -> Result<Self> {
        SymMatrix::new(m)
    }
}

impl From<SymMatrix> for DMatrix<f64> {
    fn from(m: SymMatrix) -> Self {
        m.0
    }
}

pub fn min_eigenvalue(m: &SymMatrix) -> Result<f64> {
    m.min_eigenvalue()
}

pub fn is_psd(m: &SymMatrix, tol: f64) -> Result<bool> {
    m.is_psd(tol)
}

/// Orthonormal basis (as columns) of the right nullspace of `m`, using the
/// crate-wide rank rule. An all-zero matrix has the whole space as nullspace.
pub fn nullspace(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let cols = m.ncols();
    if cols == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    // Pad with zero rows so the SVD returns a full right basis.
    let work = if m.nrows() < cols {
        let mut padded = DMatrix::zeros(cols, cols);
        padded.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
        padded
    } else {
        m.clone()
    };
    let svd = nalgebra::linalg::SVD::try_new(work, false, true, f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::NumericalFailure("SVD did not converge".into()))?;
    let v_t = svd.v_t.expect("requested V");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cut = RANK_TOL * smax * cols as f64;
    let null: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| smax == 0.0 || svd.singular_values[i] <= cut)
        .collect();
    let mut basis = DMatrix::zeros(cols, null.len());
    for (c, &i) in null.iter().enumerate() {
        basis.set_column(c, &v_t.row(i).transpose());
    }
    Ok(basis)
}

/// Orthonormal basis of the orthogonal complement of the column span of `basis`
/// inside `R^dim`.
pub fn orthogonal_complement(basis: &DMatrix<f64>, dim: usize) -> Result<DMatrix<f64>> {
    if basis.ncols() == 0 {
        return Ok(DMatrix::identity(dim, dim));
    }
    nullspace(&basis.transpose())
}

/// Orthonormal basis of `∩ ker(m_i)`; may have zero columns.
pub fn common_nullspace(ms: &[SymMatrix]) -> Result<DMatrix<f64>> {
    let first = ms.first().ok_or_else(|| invalid("need at least one matrix"))?;
    let d = first.dim();
    if ms.iter().any(|m| m.dim() != d) {
        return Err(invalid("matrices must share one dimension"));
    }
    let mut stacked = DMatrix::zeros(d * ms.len(), d);
    for (b, m) in ms.iter().enumerate() {
        stacked.view_mut((b * d, 0), (d, d)).copy_from(m.as_matrix());
    }
    nullspace(&stacked)
}
