//! Unrestricted, inequality-restricted and pattern-restricted least squares.

use crate::error::{IcseError, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::model::{EstimationProblem, FitResult, ScoreVariance};
use crate::qp::{self, KTSolution, LinearConstraints, QuadraticProblem};
use crate::shrinkage::BindingPattern;

/// Largest tolerated condition number of `X'X`.
pub const MAX_CONDITION: f64 = 1e12;

/// Restrictions `r(θ) ≥ 0` (inequality rows) and `r(θ) = 0` (equality rows).
pub trait ConstraintFunction: Send + Sync {
    fn evaluate(&self, theta: &Vector) -> Vector;
    fn jacobian(&self, theta: &Vector) -> Matrix;
    fn equality_mask(&self) -> &[bool];

    fn len(&self) -> usize {
        self.equality_mask().len()
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Whether `jacobian` is constant, which skips the finite-difference check.
    fn is_linear(&self) -> bool {
        false
    }
}

/// `r(θ) = R θ + r₀`.
#[derive(Debug, Clone)]
pub struct LinearConstraint {
    r: Matrix,
    r0: Vector,
    mask: Vec<bool>,
}

impl LinearConstraint {
    pub fn new(r: Matrix, r0: Vector, equality_mask: Vec<bool>) -> Result<Self> {
        if r.nrows() == 0 {
            return Err(IcseError::shape("at least one restriction is required"));
        }
        if r0.len() != r.nrows() || equality_mask.len() != r.nrows() {
            return Err(IcseError::shape("R, r₀ and the equality mask disagree in length"));
        }
        linalg::check_full_row_rank(&r, "restriction matrix")?;
        Ok(LinearConstraint { r, r0, mask: equality_mask })
    }

    /// `θ_j ≥ 0` for `j` in `nonnegative`, then `θ_k = 0` for `k` in `zero`
    /// (0-based coordinates, rows in that order).
    pub fn sign_restrictions(dim: usize, nonnegative: &[usize], zero: &[usize]) -> Result<Self> {
        let rows: Vec<usize> = nonnegative.iter().chain(zero).copied().collect();
        if let Some(&bad) = rows.iter().find(|&&j| j >= dim) {
            return Err(IcseError::shape(format!("coordinate {bad} out of range for dimension {dim}")));
        }
        let mut r = Matrix::zeros(rows.len(), dim);
        for (i, &j) in rows.iter().enumerate() {
            r[(i, j)] = 1.0;
        }
        let mask = (0..rows.len()).map(|i| i >= nonnegative.len()).collect();
        Self::new(r, Vector::zeros(rows.len()), mask)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.r
    }

    pub fn offset(&self) -> &Vector {
        &self.r0
    }
}

impl ConstraintFunction for LinearConstraint {
    fn evaluate(&self, theta: &Vector) -> Vector {
        &self.r * theta + &self.r0
    }

    fn jacobian(&self, _theta: &Vector) -> Matrix {
        self.r.clone()
    }

    fn equality_mask(&self) -> &[bool] {
        &self.mask
    }

    fn is_linear(&self) -> bool {
        true
    }
}

type VecFn = Box<dyn Fn(&Vector) -> Vector + Send + Sync>;
type MatFn = Box<dyn Fn(&Vector) -> Matrix + Send + Sync>;

/// Smooth restriction given by closures.
pub struct NonlinearConstraint {
    eval: VecFn,
    jac: MatFn,
    mask: Vec<bool>,
}

impl NonlinearConstraint {
    pub fn new(
        eval: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        jac: impl Fn(&Vector) -> Matrix + Send + Sync + 'static,
        equality_mask: Vec<bool>,
    ) -> Self {
        NonlinearConstraint { eval: Box::new(eval), jac: Box::new(jac), mask: equality_mask }
    }
}

impl ConstraintFunction for NonlinearConstraint {
    fn evaluate(&self, theta: &Vector) -> Vector {
        (self.eval)(theta)
    }

    fn jacobian(&self, theta: &Vector) -> Matrix {
        (self.jac)(theta)
    }

    fn equality_mask(&self) -> &[bool] {
        &self.mask
    }
}

/// Compares the analytic jacobian with central differences at `theta`.
pub fn check_jacobian(cons: &dyn ConstraintFunction, theta: &Vector) -> Result<()> {
    let analytic = cons.jacobian(theta);
    let p = cons.len();
    if analytic.shape() != (p, theta.len()) {
        return Err(IcseError::shape(format!(
            "jacobian is {}x{}, expected {p}x{}",
            analytic.nrows(),
            analytic.ncols(),
            theta.len()
        )));
    }
    if cons.is_linear() {
        return Ok(());
    }
    let scale = analytic.amax().max(1.0);
    for j in 0..theta.len() {
        let step = 1e-6 * (1.0 + theta[j].abs());
        let mut up = theta.clone();
        let mut down = theta.clone();
        up[j] += step;
        down[j] -= step;
        let fd = (cons.evaluate(&up) - cons.evaluate(&down)) / (2.0 * step);
        for i in 0..p {
            if (fd[i] - analytic[(i, j)]).abs() > 1e-5 * scale {
                return Err(IcseError::numerical(format!(
                    "jacobian entry ({i},{j}) is {} but finite differences give {}",
                    analytic[(i, j)],
                    fd[i]
                )));
            }
        }
    }
    Ok(())
}

/// Linear approximation `c + R θ` of `r` around `theta`, as QP constraints.
pub fn linearize(cons: &dyn ConstraintFunction, theta: &Vector) -> Result<LinearConstraints> {
    check_jacobian(cons, theta)?;
    let r = cons.jacobian(theta);
    let value = cons.evaluate(theta);
    if value.len() != r.nrows() {
        return Err(IcseError::shape("r(θ) and its jacobian disagree in length"));
    }
    let c = value - &r * theta;
    LinearConstraints::new(r, c, cons.equality_mask().to_vec())
}

/// Least squares `θ̂ = (X'X)⁻¹X'y` with `Ĵ = X'X/n` and the chosen score variance.
pub fn fit_unrestricted(problem: &EstimationProblem, variance: ScoreVariance) -> Result<FitResult> {
    let x = problem.design();
    let y = problem.response();
    let n = problem.n();
    let m = problem.dim();
    let xtx = x.transpose() * x;
    let cond = linalg::condition_number(&xtx);
    if cond > MAX_CONDITION {
        return Err(IcseError::numerical(format!("X'X is ill-conditioned (condition number {cond:.3e})")));
    }
    let chol = linalg::cholesky(&xtx)?;
    let theta = chol.solve(&(x.transpose() * y));
    let resid = y - x * &theta;
    let nf = n as f64;
    let jhat = &xtx / nf;
    let vhat = match variance {
        ScoreVariance::Robust => {
            let mut scaled = x.clone();
            for (i, mut row) in scaled.row_iter_mut().enumerate() {
                row *= resid[i];
            }
            linalg::symmetrize(&(scaled.transpose() * &scaled / nf))
        }
        ScoreVariance::Homoskedastic => {
            let sigma2 = resid.norm_squared() / (n - m) as f64;
            &jhat * sigma2
        }
    };
    FitResult::from_parts(theta, jhat, vhat, n)
}

/// Projects an unrestricted fit onto the (linearized) restricted set.
///
/// Returns the restricted fit (sharing `Ĵ`, `V̂`, `Ω̂`) and the solution of
/// `min ½(θ − θ̂)'Ĵ(θ − θ̂)` subject to the linearized restrictions.
pub fn restrict_fit(fit: &FitResult, cons: &dyn ConstraintFunction) -> Result<(FitResult, KTSolution)> {
    let lin = linearize(cons, &fit.theta)?;
    let qp_problem = QuadraticProblem::new(fit.jhat.clone(), fit.theta.clone())?;
    let sol = qp::solve_qp(&qp_problem, &lin)?;
    let restricted = FitResult { theta: sol.lambda.clone(), ..fit.clone() };
    Ok((restricted, sol))
}

/// Inequality-restricted least squares.
pub fn fit_restricted(
    problem: &EstimationProblem,
    cons: &dyn ConstraintFunction,
    variance: ScoreVariance,
) -> Result<(FitResult, KTSolution)> {
    let fit = fit_unrestricted(problem, variance)?;
    restrict_fit(&fit, cons)
}

/// `θ̂ − Ĵ⁻¹R'(RĴ⁻¹R')⁻¹ r(θ̂)` over the pattern rows plus every equality row.
pub fn equality_restricted_theta(
    fit: &FitResult,
    lin: &LinearConstraints,
    pattern: &BindingPattern,
) -> Result<Vector> {
    let rows = pattern.rows(lin.equality_mask());
    if rows.is_empty() {
        return Ok(fit.theta.clone());
    }
    let r = linalg::select_rows(lin.jacobian(), &rows);
    linalg::check_full_row_rank(&r, "pattern restriction rows")?;
    let c = linalg::select_entries(lin.intercept(), &rows);
    let jinv = linalg::spd_inverse(&fit.jhat)?;
    let jinv_rt = &jinv * r.transpose();
    let gram = linalg::symmetrize(&(&r * &jinv_rt));
    let chol = nalgebra::Cholesky::new(gram).ok_or_else(|| IcseError::rank("R Ĵ⁻¹ R' is singular"))?;
    let mu = chol.solve(&(-(c + &r * &fit.theta)));
    Ok(&fit.theta + jinv_rt * mu)
}

/// Least squares with the pattern's rows (and all equality rows) holding with equality.
pub fn fit_equality_pattern(
    problem: &EstimationProblem,
    cons: &dyn ConstraintFunction,
    pattern: &BindingPattern,
    variance: ScoreVariance,
) -> Result<FitResult> {
    let fit = fit_unrestricted(problem, variance)?;
    let lin = linearize(cons, &fit.theta)?;
    let theta = equality_restricted_theta(&fit, &lin, pattern)?;
    Ok(FitResult { theta, ..fit })
}

/// `ĉ = √n r(θ̂)`.
pub fn localizing_estimate(fit: &FitResult, cons: &dyn ConstraintFunction) -> Vector {
    cons.evaluate(&fit.theta) * (fit.n as f64).sqrt()
}
