//! Preprocessing of pencils: translation, lineality spaces and the reduced pencil.

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::pencil::LinearPencil;
use crate::symcore::{common_nullspace, nullspace, orthogonal_complement};

/// Tolerance for "the pure-linear part vanishes on this direction".
pub const LINEALITY_TOL: f64 = 1e-9;

/// `A'(x) = A(x + x0)`.
pub fn translate(p: &LinearPencil, x0: &[f64]) -> Result<LinearPencil> {
    let mut coeffs = p.coeffs().to_vec();
    coeffs[0] = p.evaluate(x0)?;
    LinearPencil::new(coeffs)
}

/// Orthonormal basis (columns) of `{x : Σ x_p A_p = 0}`.
pub fn lineality_space(p: &LinearPencil) -> Result<DMatrix<f64>> {
    let n = p.n();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let cols: Vec<_> = p.coeffs()[1..].iter().map(|c| c.svec()).collect();
    nullspace(&DMatrix::from_columns(&cols))
}

/// Restricts both pencils to the orthogonal complement of `L_A`.
///
/// Returns the restricted pencils and the basis `V` of `L_A^⊥` used for the
/// substitution `x = V u`. Fails with [`Error::NotContained`] if `B̃` does not
/// vanish on `L_A`; for nonempty `S_A` that refutes containment.
pub fn split_lineality(a: &LinearPencil, b: &LinearPencil) -> Result<(LinearPencil, LinearPencil, DMatrix<f64>)> {
    if a.n() != b.n() {
        return Err(invalid("pencils have different numbers of variables"));
    }
    let n = a.n();
    let l = lineality_space(a)?;
    if l.ncols() == 0 {
        return Ok((a.clone(), b.clone(), DMatrix::identity(n, n)));
    }
    let scale = b.max_linear_norm().max(1.0);
    for c in 0..l.ncols() {
        let v: Vec<f64> = l.column(c).iter().copied().collect();
        if b.linear_part(&v)?.norm() > LINEALITY_TOL * scale {
            return Err(Error::NotContained { direction: v });
        }
    }
    let v = orthogonal_complement(&l, n)?;
    let zero = vec![0.0; n];
    Ok((a.affine_substitute(&zero, &v)?, b.affine_substitute(&zero, &v)?, v))
}

/// Compresses the pencil onto the orthogonal complement of the common
/// nullspace of its coefficients. The spectrahedron is unchanged; when it is
/// full-dimensional the result is positive definite exactly on its interior.
pub fn reduced_pencil(p: &LinearPencil) -> Result<LinearPencil> {
    if p.max_norm() == 0.0 {
        return Err(Error::DegeneratePencil);
    }
    let null = common_nullspace(p.coeffs())?;
    if null.ncols() == 0 {
        return Ok(p.clone());
    }
    let v = orthogonal_complement(&null, p.k())?;
    p.congruence(&v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pencil::{ball_pencil, polytope_pencil, random_pencil};
    use crate::symcore::SymMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn disk() -> LinearPencil {
        LinearPencil::new(vec![
            SymMatrix::identity(2),
            SymMatrix::from_row_slice(2, &[1.0, 0.0, 0.0, -1.0]).unwrap(),
            SymMatrix::from_row_slice(2, &[0.0, 1.0, 1.0, 0.0]).unwrap(),
        ])
        .unwrap()
    }

    fn interval() -> LinearPencil {
        ball_pencil(1, 1.0).unwrap()
    }

    #[test]
    fn translation() {
        let p = disk();
        assert_eq!(translate(&p, &[0.0, 0.0]).unwrap(), p);
        let q = translate(&interval(), &[1.0]).unwrap();
        for (x, inside) in [(-2.0, true), (0.0, true), (-1.0, true), (0.1, false), (-2.1, false)] {
            assert_eq!(q.contains_point(&[x], 1e-9).unwrap(), inside, "x = {x}");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = random_pencil(2, 3, 0.7, 1.0, 4).unwrap();
        for _ in 0..200 {
            let x0 = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let moved = translate(&r, &x0).unwrap();
            let a = moved.evaluate(&x).unwrap();
            let b = r.evaluate(&[x[0] + x0[0], x[1] + x0[1]]).unwrap();
            assert!((a.as_matrix() - b.as_matrix()).amax() < 1e-12);
        }
    }

    #[test]
    fn lineality_examples() {
        assert_eq!(lineality_space(&disk()).unwrap().ncols(), 0);

        let c = SymMatrix::from_row_slice(2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let dup = LinearPencil::new(vec![SymMatrix::identity(2), c.clone(), c.scale(-1.0)]).unwrap();
        let l = lineality_space(&dup).unwrap();
        assert_eq!(l.ncols(), 1);
        assert!((l[(0, 0)] - l[(1, 0)]).abs() < 1e-12);

        let same = LinearPencil::new(vec![SymMatrix::identity(2), c.clone(), c.clone()]).unwrap();
        let l = lineality_space(&same).unwrap();
        assert!((l[(0, 0)] + l[(1, 0)]).abs() < 1e-12);
        assert!((l[(0, 0)].abs() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);

        let zero_first = LinearPencil::new(vec![SymMatrix::identity(2), SymMatrix::zeros(2), c]).unwrap();
        let l = lineality_space(&zero_first).unwrap();
        assert_eq!(l.ncols(), 1);
        assert!((l[(0, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn split_examples() {
        let d = disk();
        let (a, b, v) = split_lineality(&d, &d).unwrap();
        assert_eq!((a, b), (d.clone(), d.clone()));
        assert_eq!(v, DMatrix::identity(2, 2));

        let c = SymMatrix::from_row_slice(2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let same = LinearPencil::new(vec![SymMatrix::identity(2), c.clone(), c]).unwrap();
        let (a, b, v) = split_lineality(&same, &same).unwrap();
        assert_eq!((a.n(), b.n(), v.ncols()), (1, 1, 1));
        // The restricted set is the same interval along (1,1)/√2.
        assert!(a.contains_point(&[std::f64::consts::FRAC_1_SQRT_2 - 1e-6], 1e-12).unwrap());
        assert!(!a.contains_point(&[std::f64::consts::FRAC_1_SQRT_2 + 1e-6], 1e-12).unwrap());

        match split_lineality(&same, &d) {
            Err(Error::NotContained { direction }) => assert_eq!(direction.len(), 2),
            other => panic!("expected NotContained, got {other:?}"),
        }
    }

    #[test]
    fn reduced_examples() {
        let d = disk();
        assert_eq!(reduced_pencil(&d).unwrap(), d);

        // diag(1 + x, 0) compresses to the 1×1 pencil 1 + x.
        let e11 = SymMatrix::from_row_slice(2, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let block = LinearPencil::new(vec![e11.clone(), e11]).unwrap();
        let r = reduced_pencil(&block).unwrap();
        assert_eq!(r.k(), 1);
        assert!((r.coeff(0).get(0, 0) - 1.0).abs() < 1e-12);
        assert!((r.coeff(1).get(0, 0) - 1.0).abs() < 1e-12);

        let zero = LinearPencil::new(vec![SymMatrix::zeros(2), SymMatrix::zeros(2)]).unwrap();
        assert!(matches!(reduced_pencil(&zero), Err(Error::DegeneratePencil)));
    }

    #[test]
    fn reduction_preserves_membership() {
        // Embed a random polytope pencil with a hidden kernel via congruence.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = DMatrix::from_fn(3, 2, |_, _| rng.gen_range(-1.0..1.0));
        let base = polytope_pencil(&a, &[1.0, 1.0, 1.0]).unwrap();
        let q = DMatrix::from_fn(5, 5, |_, _| rng.gen_range(-1.0..1.0)).qr().q();
        let embed = q.columns(0, 3).transpose();
        let big = base.congruence(&embed.into_owned()).unwrap();
        assert_eq!(big.k(), 5);
        let red = reduced_pencil(&big).unwrap();
        assert_eq!(red.k(), 3);
        assert_eq!(common_nullspace(red.coeffs()).unwrap().ncols(), 0);
        for _ in 0..10_000 {
            let x = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let m = base.evaluate(&x).unwrap().min_eigenvalue().unwrap();
            if m.abs() < 1e-8 {
                continue;
            }
            assert_eq!(big.contains_point(&x, 1e-10).unwrap(), red.contains_point(&x, 1e-10).unwrap());
            if m > 1e-8 {
                assert!(red.evaluate(&x).unwrap().min_eigenvalue().unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn lineality_basis_annihilates() {
        for seed in 0..50 {
            let p = random_pencil(3, 3, 0.5, 1.0, seed).unwrap();
            let mut coeffs = p.coeffs().to_vec();
            coeffs.push(coeffs[1].add_scaled(2.0, &coeffs[2]));
            let q = LinearPencil::new(coeffs).unwrap();
            let l = lineality_space(&q).unwrap();
            assert!(l.ncols() >= 1);
            for c in 0..l.ncols() {
                let v: Vec<f64> = l.column(c).iter().copied().collect();
                assert!(q.linear_part(&v).unwrap().norm() <= 1e-9 * q.max_linear_norm());
            }
        }
    }
}
