//! Estimation problems, fitted quantities and the weighted quadratic loss.

use crate::error::{IcseError, Result};
use crate::linalg::{self, Matrix, Vector};

/// Least-squares problem `y = X θ + ε` with a validated design.
#[derive(Debug, Clone)]
pub struct EstimationProblem {
    design: Matrix,
    response: Vector,
}

impl EstimationProblem {
    pub fn design(&self) -> &Matrix {
        &self.design
    }

    pub fn response(&self) -> &Vector {
        &self.response
    }

    pub fn n(&self) -> usize {
        self.design.nrows()
    }

    pub fn dim(&self) -> usize {
        self.design.ncols()
    }
}

/// Validates dimensions and column rank of a linear regression problem.
pub fn build_linear_problem(design: Matrix, response: Vector) -> Result<EstimationProblem> {
    let (n, m) = design.shape();
    if response.len() != n {
        return Err(IcseError::shape(format!(
            "design has {n} rows but response has {} entries",
            response.len()
        )));
    }
    if m == 0 || n <= m {
        return Err(IcseError::shape(format!("need n > m >= 1, got n={n}, m={m}")));
    }
    if design.iter().chain(response.iter()).any(|v| !v.is_finite()) {
        return Err(IcseError::shape("non-finite entries in the data"));
    }
    if linalg::numerical_rank(&design) < m {
        return Err(IcseError::rank("design matrix does not have full column rank"));
    }
    Ok(EstimationProblem { design, response })
}

/// How the score variance `V̂` is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreVariance {
    /// `(1/n) Σ x_i x_i' ε̂_i²`
    #[default]
    Robust,
    /// `σ̂² X'X / n` with `σ̂² = RSS / (n - m)`
    Homoskedastic,
}

/// Choice of the loss weight matrix `W`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum LossSpec {
    Identity,
    #[default]
    InverseOmega,
    Custom(Matrix),
}

/// Unrestricted (or pattern-restricted) fit with its curvature and variance estimates.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub theta: Vector,
    /// negative Hessian of the criterion, `X'X / n`
    pub jhat: Matrix,
    /// score variance
    pub vhat: Matrix,
    /// sandwich `Ĵ⁻¹ V̂ Ĵ⁻¹`
    pub omega: Matrix,
    pub n: usize,
}

impl FitResult {
    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// Builds a fit and its sandwich covariance from `(θ̂, Ĵ, V̂)`.
    pub fn from_parts(theta: Vector, jhat: Matrix, vhat: Matrix, n: usize) -> Result<Self> {
        let m = theta.len();
        if jhat.shape() != (m, m) || vhat.shape() != (m, m) {
            return Err(IcseError::shape("Ĵ and V̂ must be m x m"));
        }
        let jinv = linalg::spd_inverse(&jhat)?;
        let omega = linalg::symmetrize(&(&jinv * &vhat * &jinv));
        Ok(FitResult { theta, jhat, vhat, omega, n })
    }
}

/// Weight matrix `W` for the requested rule.
pub fn loss_matrix(spec: &LossSpec, fit: &FitResult) -> Result<Matrix> {
    let m = fit.dim();
    match spec {
        LossSpec::Identity => Ok(Matrix::identity(m, m)),
        LossSpec::InverseOmega => linalg::spd_inverse(&fit.omega)
            .map_err(|_| IcseError::LossSpec("Ω̂ is not positive definite".into())),
        LossSpec::Custom(w) => {
            if w.shape() != (m, m) {
                return Err(IcseError::LossSpec(format!(
                    "custom W is {}x{}, expected {m}x{m}",
                    w.nrows(),
                    w.ncols()
                )));
            }
            if !linalg::is_spd(w) {
                return Err(IcseError::LossSpec("custom W is not symmetric positive definite".into()));
            }
            Ok(w.clone())
        }
    }
}

/// `(a - b)' W (a - b)`.
pub fn evaluate_loss(w: &Matrix, a: &Vector, b: &Vector) -> Result<f64> {
    if a.len() != b.len() || w.shape() != (a.len(), a.len()) {
        return Err(IcseError::shape("loss arguments are not conformable"));
    }
    let d = a - b;
    Ok(linalg::quad_form(w, &d).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fit_with_omega(omega: Matrix) -> FitResult {
        let m = omega.nrows();
        FitResult {
            theta: Vector::zeros(m),
            jhat: Matrix::identity(m, m),
            vhat: omega.clone(),
            omega,
            n: 100,
        }
    }

    #[test]
    fn padded_identity_is_valid() {
        let mut x = Matrix::zeros(6, 3);
        for j in 0..3 {
            x[(j, j)] = 1.0;
        }
        let y = Vector::from_vec(vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.0]);
        let p = build_linear_problem(x, y).unwrap();
        assert_eq!((p.n(), p.dim()), (6, 3));
    }

    #[test]
    fn duplicated_column_is_rank_error() {
        let x = Matrix::from_fn(10, 3, |i, j| if j == 2 { i as f64 } else { (i * (j + 1)) as f64 });
        let y = Vector::zeros(10);
        assert!(matches!(build_linear_problem(x, y), Err(IcseError::Rank(_))));
    }

    #[test]
    fn dimension_mismatch_is_shape_error() {
        let x = Matrix::identity(5, 2);
        assert!(matches!(build_linear_problem(x, Vector::zeros(4)), Err(IcseError::Shape(_))));
    }

    #[test]
    fn identity_and_inverse_omega() {
        let fit = fit_with_omega(Matrix::identity(3, 3) * 2.0);
        assert_eq!(loss_matrix(&LossSpec::Identity, &fit).unwrap(), Matrix::identity(3, 3));
        let w = loss_matrix(&LossSpec::InverseOmega, &fit).unwrap();
        assert!((w - Matrix::identity(3, 3) * 0.5).amax() < 1e-15);
    }

    #[test]
    fn custom_must_be_spd() {
        let fit = fit_with_omega(Matrix::identity(2, 2));
        let bad = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(loss_matrix(&LossSpec::Custom(bad), &fit), Err(IcseError::LossSpec(_))));
        let asym = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.0, 2.0]);
        assert!(loss_matrix(&LossSpec::Custom(asym), &fit).is_err());
    }

    #[test]
    fn loss_examples() {
        let i2 = Matrix::identity(2, 2);
        let a = Vector::from_vec(vec![0.3, -1.0]);
        assert_eq!(evaluate_loss(&i2, &a, &a).unwrap(), 0.0);
        let e1 = Vector::from_vec(vec![1.0, 0.0]);
        let zero = Vector::zeros(2);
        assert_eq!(evaluate_loss(&i2, &e1, &zero).unwrap(), 1.0);
        let w = Matrix::from_diagonal(&Vector::from_vec(vec![2.0, 3.0]));
        let ones = Vector::from_vec(vec![1.0, 1.0]);
        assert_eq!(evaluate_loss(&w, &ones, &zero).unwrap(), 5.0);
        assert!(evaluate_loss(&w, &Vector::zeros(3), &zero).is_err());
    }

    proptest! {
        #[test]
        fn loss_nonnegative_and_symmetric(
            a in proptest::collection::vec(-10.0f64..10.0, 3),
            b in proptest::collection::vec(-10.0f64..10.0, 3),
            l in proptest::collection::vec(-2.0f64..2.0, 9),
        ) {
            let l = Matrix::from_row_slice(3, 3, &l);
            let w = &l * l.transpose() + Matrix::identity(3, 3) * 0.1;
            let a = Vector::from_vec(a);
            let b = Vector::from_vec(b);
            let ab = evaluate_loss(&w, &a, &b).unwrap();
            let ba = evaluate_loss(&w, &b, &a).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
        }
    }
}
