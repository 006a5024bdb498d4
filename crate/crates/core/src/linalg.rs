//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{IcseError, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative cutoff for singular values when judging rank.
pub const RANK_TOL: f64 = 1e-10;

pub fn is_symmetric(a: &Matrix, tol: f64) -> bool {
    if !a.is_square() {
        return false;
    }
    let scale = a.amax().max(1.0);
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            if (a[(i, j)] - a[(j, i)]).abs() > tol * scale {
                return false;
            }
        }
    }
    true
}

pub fn symmetrize(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

/// Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: &Matrix) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if !a.is_square() {
        return Err(IcseError::shape(format!(
            "expected square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    nalgebra::Cholesky::new(a.clone())
        .ok_or_else(|| IcseError::numerical("matrix is not positive definite"))
}

pub fn is_spd(a: &Matrix) -> bool {
    a.is_square() && is_symmetric(a, 1e-10) && nalgebra::Cholesky::new(a.clone()).is_some()
}

pub fn spd_inverse(a: &Matrix) -> Result<Matrix> {
    Ok(symmetrize(&cholesky(a)?.inverse()))
}

/// Symmetric square root `S` with `S * S = A` for symmetric PSD `A`.
pub fn sym_sqrt(a: &Matrix) -> Result<Matrix> {
    if !is_symmetric(a, 1e-10) {
        return Err(IcseError::LossSpec("matrix is not symmetric".into()));
    }
    let eig = nalgebra::SymmetricEigen::new(a.clone());
    let top = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    if eig.eigenvalues.iter().any(|&v| v < -1e-10 * top) {
        return Err(IcseError::LossSpec("matrix is not positive semidefinite".into()));
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let q = &eig.eigenvectors;
    Ok(symmetrize(&(q * Matrix::from_diagonal(&roots) * q.transpose())))
}

pub fn singular_values(a: &Matrix) -> Vector {
    a.clone().svd(false, false).singular_values
}

/// Number of singular values above `RANK_TOL` times the largest.
pub fn numerical_rank(a: &Matrix) -> usize {
    let sv = singular_values(a);
    let top = sv.amax();
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * top).count()
}

pub fn condition_number(a: &Matrix) -> f64 {
    let sv = singular_values(a);
    let top = sv.amax();
    let bottom = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if bottom == 0.0 {
        f64::INFINITY
    } else {
        top / bottom
    }
}

pub fn check_full_row_rank(r: &Matrix, what: &str) -> Result<()> {
    if r.nrows() > r.ncols() || numerical_rank(r) < r.nrows() {
        return Err(IcseError::rank(format!(
            "{what} ({}x{}) does not have full row rank",
            r.nrows(),
            r.ncols()
        )));
    }
    Ok(())
}

/// Moore-Penrose right inverse `R'(RR')^{-1}` of a full-row-rank matrix.
pub fn right_inverse(r: &Matrix) -> Result<Matrix> {
    let gram = r * r.transpose();
    let inv = spd_inverse(&gram).map_err(|_| IcseError::rank("R R' is singular"))?;
    Ok(r.transpose() * inv)
}

/// Largest real part over the (possibly complex) spectrum of a square matrix.
pub fn max_real_eigenvalue(a: &Matrix) -> Result<f64> {
    if !a.is_square() {
        return Err(IcseError::shape("eigenvalues of a non-square matrix"));
    }
    if is_symmetric(a, 1e-12) {
        let eig = nalgebra::SymmetricEigen::new(symmetrize(a));
        return Ok(eig.eigenvalues.max());
    }
    for eps in [1e-14, 1e-12, 1e-10] {
        if let Some(schur) = a.clone().try_schur(eps, 10_000) {
            return Ok(schur
                .complex_eigenvalues()
                .iter()
                .map(|z| z.re)
                .fold(f64::NEG_INFINITY, f64::max));
        }
    }
    shifted_power_iteration(a)
}

/// Largest eigenvalue of a matrix with real spectrum: power iteration on
/// `A + ‖A‖ I`, whose dominant eigenvalue is the shifted maximum.
fn shifted_power_iteration(a: &Matrix) -> Result<f64> {
    let m = a.nrows();
    let shift = a.norm().max(1.0);
    let b = a + Matrix::identity(m, m) * shift;
    let mut v = Vector::from_fn(m, |i, _| 1.0 + i as f64 / m as f64);
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..100_000 {
        let w = &b * &v;
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            break;
        }
        v = w / norm;
        if (next - lambda).abs() <= 1e-13 * shift {
            return Ok(next - shift);
        }
        lambda = next;
    }
    Err(IcseError::numerical("eigenvalue iteration did not converge"))
}

/// Lower factor `L` with `L L' = cov` for a symmetric PSD covariance.
///
/// Tries Cholesky first and falls back to an eigen factor when the
/// covariance is singular.
pub fn psd_factor(cov: &Matrix) -> Result<Matrix> {
    if !cov.is_square() || !is_symmetric(cov, 1e-9) {
        return Err(IcseError::Covariance("covariance is not symmetric".into()));
    }
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(IcseError::Covariance("covariance has non-finite entries".into()));
    }
    if let Some(ch) = nalgebra::Cholesky::new(symmetrize(cov)) {
        return Ok(ch.l());
    }
    let eig = nalgebra::SymmetricEigen::new(symmetrize(cov));
    let top = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    if eig.eigenvalues.iter().any(|&v| v < -1e-10 * top) {
        return Err(IcseError::Covariance("covariance is not positive semidefinite".into()));
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(&eig.eigenvectors * Matrix::from_diagonal(&roots))
}

pub fn quad_form(w: &Matrix, x: &Vector) -> f64 {
    x.dot(&(w * x))
}

/// Rows of `a` selected by `rows`, in the given order.
pub fn select_rows(a: &Matrix, rows: &[usize]) -> Matrix {
    Matrix::from_fn(rows.len(), a.ncols(), |i, j| a[(rows[i], j)])
}

pub fn select_entries(v: &Vector, idx: &[usize]) -> Vector {
    Vector::from_fn(idx.len(), |i, _| v[idx[i]])
}

pub fn select_block(a: &Matrix, rows: &[usize], cols: &[usize]) -> Matrix {
    Matrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sym_sqrt_squares_back() {
        let a = Matrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let s = sym_sqrt(&a).unwrap();
        assert!((&s * &s - &a).amax() < 1e-12);
    }

    #[test]
    fn right_inverse_is_a_right_inverse() {
        let r = Matrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, -1.0]);
        let ri = right_inverse(&r).unwrap();
        assert!((&r * ri - Matrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn rank_detects_duplicate_rows() {
        let r = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(check_full_row_rank(&r, "R").is_err());
        assert_eq!(numerical_rank(&r), 1);
    }

    #[test]
    fn psd_factor_handles_singular_covariance() {
        let cov = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let l = psd_factor(&cov).unwrap();
        assert!((&l * l.transpose() - &cov).amax() < 1e-12);
        let bad = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(psd_factor(&bad), Err(IcseError::Covariance(_))));
    }

    #[test]
    fn power_fallback_on_oblique_projection() {
        let j = Matrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, 0.5, 1.0, 0.3, 0.1, 0.3, 1.5]);
        let r = Matrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let jinv = spd_inverse(&j).unwrap();
        let p = &jinv * r.transpose() * spd_inverse(&(&r * &jinv * r.transpose())).unwrap() * &r;
        assert!((shifted_power_iteration(&p).unwrap() - 1.0).abs() < 1e-9);
        assert!((max_real_eigenvalue(&p).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn max_real_eigenvalue_nonsymmetric() {
        // upper triangular: eigenvalues on the diagonal
        let a = Matrix::from_row_slice(3, 3, &[1.0, 5.0, 2.0, 0.0, 3.0, 1.0, 0.0, 0.0, -2.0]);
        assert!((max_real_eigenvalue(&a).unwrap() - 3.0).abs() < 1e-10);
    }
}
