//! Strictly convex quadratic programs with linear constraints.
//!
//! Minimizes `q(λ) = ½ (λ − Z)' J (λ − Z)` subject to `c + R λ ≥ 0` on
//! inequality rows and `c + R λ = 0` on equality rows, with a primal
//! active-set method. Working sets correspond one-to-one to binding
//! patterns of the constraint system.

use crate::error::{IcseError, Result};
use crate::linalg::{self, Matrix, Vector};

/// `q(λ) = ½ (λ − Z)' J (λ − Z)` with `J` symmetric positive definite.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    curvature: Matrix,
    center: Vector,
    curvature_inv: Matrix,
}

impl QuadraticProblem {
    pub fn new(curvature: Matrix, center: Vector) -> Result<Self> {
        if curvature.shape() != (center.len(), center.len()) {
            return Err(IcseError::shape("curvature must be m x m for an m-vector center"));
        }
        if !linalg::is_symmetric(&curvature, 1e-10) {
            return Err(IcseError::numerical("curvature is not symmetric"));
        }
        let curvature_inv = linalg::spd_inverse(&curvature)?;
        Ok(QuadraticProblem { curvature, center, curvature_inv })
    }

    /// Same curvature, new center; skips re-factorizing `J`.
    pub fn with_center(&self, center: Vector) -> Self {
        assert_eq!(center.len(), self.center.len(), "center dimension changed");
        QuadraticProblem {
            curvature: self.curvature.clone(),
            center,
            curvature_inv: self.curvature_inv.clone(),
        }
    }

    pub fn curvature(&self) -> &Matrix {
        &self.curvature
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn curvature_inv(&self) -> &Matrix {
        &self.curvature_inv
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn objective(&self, lambda: &Vector) -> f64 {
        0.5 * linalg::quad_form(&self.curvature, &(lambda - &self.center))
    }
}

/// Rows `c_j + R_j λ ≥ 0` (or `= 0` where `equality_mask[j]`).
#[derive(Debug, Clone)]
pub struct LinearConstraints {
    jacobian: Matrix,
    intercept: Vector,
    equality_mask: Vec<bool>,
}

impl LinearConstraints {
    pub fn new(jacobian: Matrix, intercept: Vector, equality_mask: Vec<bool>) -> Result<Self> {
        let p = jacobian.nrows();
        if p == 0 {
            return Err(IcseError::shape("at least one constraint row is required"));
        }
        if intercept.len() != p || equality_mask.len() != p {
            return Err(IcseError::shape(format!(
                "jacobian has {p} rows, intercept {} and mask {}",
                intercept.len(),
                equality_mask.len()
            )));
        }
        linalg::check_full_row_rank(&jacobian, "constraint jacobian")?;
        Ok(LinearConstraints { jacobian, intercept, equality_mask })
    }

    /// Pure inequality system `c + R λ ≥ 0`.
    pub fn inequalities(jacobian: Matrix, intercept: Vector) -> Result<Self> {
        let p = jacobian.nrows();
        Self::new(jacobian, intercept, vec![false; p])
    }

    pub fn jacobian(&self) -> &Matrix {
        &self.jacobian
    }

    pub fn intercept(&self) -> &Vector {
        &self.intercept
    }

    pub fn equality_mask(&self) -> &[bool] {
        &self.equality_mask
    }

    pub fn len(&self) -> usize {
        self.jacobian.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.jacobian.ncols()
    }

    pub fn equality_rows(&self) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.equality_mask[j]).collect()
    }

    pub fn inequality_rows(&self) -> Vec<usize> {
        (0..self.len()).filter(|&j| !self.equality_mask[j]).collect()
    }

    /// Same jacobian and mask with a new intercept.
    pub fn with_intercept(&self, intercept: Vector) -> Self {
        assert_eq!(intercept.len(), self.len(), "intercept length changed");
        LinearConstraints {
            jacobian: self.jacobian.clone(),
            intercept,
            equality_mask: self.equality_mask.clone(),
        }
    }

    /// `c + R λ`
    pub fn slack(&self, lambda: &Vector) -> Vector {
        &self.intercept + &self.jacobian * lambda
    }

    fn activity_tol(&self, j: usize) -> f64 {
        1e-10 * (1.0 + self.intercept[j].abs())
    }
}

/// Minimizer, Kuhn-Tucker multipliers and working set of a solved program.
#[derive(Debug, Clone, PartialEq)]
pub struct KTSolution {
    pub lambda: Vector,
    /// one multiplier per constraint row, zero off the active set
    pub mu: Vector,
    /// rows held with equality at the solution (always-equality rows included), ascending
    pub active: Vec<usize>,
    pub objective: f64,
}

impl KTSolution {
    /// Active inequality rows, i.e. the realized binding pattern.
    pub fn binding_inequalities(&self, constraints: &LinearConstraints) -> Vec<usize> {
        self.active
            .iter()
            .copied()
            .filter(|&j| !constraints.equality_mask[j])
            .collect()
    }
}

/// Solves the equality-constrained program holding `rows` with equality.
/// Returns the minimizer and the multipliers of `rows` (in the same order).
fn solve_working_set(
    problem: &QuadraticProblem,
    constraints: &LinearConstraints,
    rows: &[usize],
) -> Result<(Vector, Vector)> {
    let z = &problem.center;
    if rows.is_empty() {
        return Ok((z.clone(), Vector::zeros(0)));
    }
    let r_w = linalg::select_rows(&constraints.jacobian, rows);
    let c_w = linalg::select_entries(&constraints.intercept, rows);
    let jinv_rt = &problem.curvature_inv * r_w.transpose();
    let gram = &r_w * &jinv_rt;
    let chol = nalgebra::Cholesky::new(linalg::symmetrize(&gram))
        .ok_or_else(|| IcseError::numerical("working-set system R J⁻¹ R' is singular"))?;
    let rhs = -(c_w + &r_w * z);
    let mu_w = chol.solve(&rhs);
    let lambda = z + jinv_rt * &mu_w;
    Ok((lambda, mu_w))
}

fn assemble(
    problem: &QuadraticProblem,
    constraints: &LinearConstraints,
    lambda: Vector,
    rows: &[usize],
    mu_w: &Vector,
) -> KTSolution {
    let mut mu = Vector::zeros(constraints.len());
    for (k, &j) in rows.iter().enumerate() {
        mu[j] = mu_w[k];
    }
    let mut active = rows.to_vec();
    active.sort_unstable();
    let objective = problem.objective(&lambda);
    KTSolution { lambda, mu, active, objective }
}

fn check_conformable(problem: &QuadraticProblem, constraints: &LinearConstraints) -> Result<()> {
    if constraints.dim() != problem.dim() {
        return Err(IcseError::shape(format!(
            "constraints act on R^{} but the program lives in R^{}",
            constraints.dim(),
            problem.dim()
        )));
    }
    Ok(())
}

/// Global minimizer of `q` over the constraint set, with multipliers.
pub fn solve_qp(problem: &QuadraticProblem, constraints: &LinearConstraints) -> Result<KTSolution> {
    solve_qp_warm(problem, constraints, None)
}

/// [`solve_qp`] started from a guessed set of binding inequality rows.
///
/// The guess is used only when its equality-constrained minimizer is
/// feasible; otherwise the solver starts from the vertex where every row binds.
pub fn solve_qp_warm(
    problem: &QuadraticProblem,
    constraints: &LinearConstraints,
    warm_start: Option<&[usize]>,
) -> Result<KTSolution> {
    check_conformable(problem, constraints)?;
    let p = constraints.len();
    let m = problem.dim();
    let eq_rows = constraints.equality_rows();
    let is_eq = &constraints.equality_mask;

    if eq_rows.is_empty() {
        let slack = constraints.slack(&problem.center);
        if (0..p).all(|j| slack[j] >= -constraints.activity_tol(j)) {
            return Ok(assemble(problem, constraints, problem.center.clone(), &[], &Vector::zeros(0)));
        }
    }

    let feasible = |lambda: &Vector| {
        let s = constraints.slack(lambda);
        (0..p).all(|j| is_eq[j] || s[j] >= -constraints.activity_tol(j))
    };

    let mut working: Vec<usize> = Vec::new();
    let mut lambda: Option<Vector> = None;
    if let Some(guess) = warm_start {
        let mut rows: Vec<usize> = eq_rows.clone();
        rows.extend(guess.iter().copied().filter(|&j| j < p && !is_eq[j]));
        rows.sort_unstable();
        rows.dedup();
        if let Ok((l, _)) = solve_working_set(problem, constraints, &rows) {
            if feasible(&l) {
                working = rows;
                lambda = Some(l);
            }
        }
    }
    let mut lambda = match lambda {
        Some(l) => l,
        None => {
            // every row binding: R λ = −c is solvable by full row rank
            working = (0..p).collect();
            let (l, _) = solve_working_set(problem, constraints, &working)?;
            l
        }
    };

    let cap = 100 * (p + m);
    for _ in 0..cap {
        let (target, mu_w) = solve_working_set(problem, constraints, &working)?;
        let step = &target - &lambda;
        let scale = 1.0 + lambda.amax().max(target.amax());
        if step.amax() <= 1e-12 * scale {
            let mu_scale = 1.0 + mu_w.amax();
            let mut drop: Option<(usize, f64)> = None;
            for (k, &j) in working.iter().enumerate() {
                if is_eq[j] {
                    continue;
                }
                let v = mu_w[k];
                if v < -1e-12 * mu_scale && drop.is_none_or(|(_, best)| v < best) {
                    drop = Some((k, v));
                }
            }
            match drop {
                None => return Ok(assemble(problem, constraints, target, &working, &mu_w)),
                Some((k, _)) => {
                    lambda = target;
                    working.remove(k);
                }
            }
        } else {
            let slack = constraints.slack(&lambda);
            let dir = &constraints.jacobian * &step;
            let mut alpha = 1.0;
            let mut blocking = None;
            for j in 0..p {
                if is_eq[j] || working.contains(&j) {
                    continue;
                }
                if dir[j] < -1e-14 * scale {
                    let a = slack[j].max(0.0) / -dir[j];
                    if a < alpha {
                        alpha = a;
                        blocking = Some(j);
                    }
                }
            }
            lambda += step * alpha;
            if let Some(j) = blocking {
                working.push(j);
                working.sort_unstable();
            }
        }
    }
    Err(IcseError::numerical(format!(
        "active-set iteration cap {cap} exceeded (cycling?)"
    )))
}

/// Exhaustive oracle: tries every subset of inequality rows as the binding
/// set and keeps the best primal-feasible candidate.
pub fn brute_force_qp(problem: &QuadraticProblem, constraints: &LinearConstraints) -> Result<KTSolution> {
    check_conformable(problem, constraints)?;
    let eq_rows = constraints.equality_rows();
    let ineq_rows = constraints.inequality_rows();
    if ineq_rows.len() > 20 {
        return Err(IcseError::Capacity(format!(
            "{} inequality rows exceed the brute-force limit of 20",
            ineq_rows.len()
        )));
    }
    let mut best: Option<(KTSolution, bool, usize)> = None;
    for mask in 0u64..(1u64 << ineq_rows.len()) {
        let mut rows = eq_rows.clone();
        rows.extend(
            ineq_rows
                .iter()
                .enumerate()
                .filter(|(b, _)| mask >> b & 1 == 1)
                .map(|(_, &j)| j),
        );
        rows.sort_unstable();
        let (lambda, mu_w) = solve_working_set(problem, constraints, &rows)?;
        let slack = constraints.slack(&lambda);
        if !ineq_rows.iter().all(|&j| slack[j] >= -constraints.activity_tol(j)) {
            continue;
        }
        let dual_ok = rows
            .iter()
            .zip(mu_w.iter())
            .all(|(&j, &v)| constraints.equality_mask[j] || v >= -1e-10 * (1.0 + mu_w.amax()));
        let cand = assemble(problem, constraints, lambda, &rows, &mu_w);
        let better = match &best {
            None => true,
            Some((b, b_dual, b_len)) => {
                let tol = 1e-12 * (1.0 + b.objective.abs());
                if cand.objective < b.objective - tol {
                    true
                } else if cand.objective <= b.objective + tol {
                    (dual_ok && !b_dual) || (dual_ok == *b_dual && rows.len() < *b_len)
                } else {
                    false
                }
            }
        };
        if better {
            best = Some((cand, dual_ok, rows.len()));
        }
    }
    best.map(|(s, _, _)| s)
        .ok_or_else(|| IcseError::Infeasible("no binding pattern yields a feasible point".into()))
}

/// Sup-norms of the four Karush-Kuhn-Tucker residual blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KtResiduals {
    /// `‖J(λ − Z) − R'μ‖∞`
    pub stationarity: f64,
    /// violation of `c + Rλ ≥ 0` (inequality rows) and `= 0` (equality rows)
    pub feasibility: f64,
    /// `max_j |μ_j (c_j + R_j λ)|` over inequality rows
    pub slackness: f64,
    /// `max_j (−μ_j)₊` over inequality rows
    pub dual_feasibility: f64,
}

impl KtResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.feasibility)
            .max(self.slackness)
            .max(self.dual_feasibility)
    }
}

pub fn kt_residuals(
    sol: &KTSolution,
    problem: &QuadraticProblem,
    constraints: &LinearConstraints,
) -> KtResiduals {
    let grad = &problem.curvature * (&sol.lambda - &problem.center) - constraints.jacobian.transpose() * &sol.mu;
    let slack = constraints.slack(&sol.lambda);
    let mut feasibility: f64 = 0.0;
    let mut slackness: f64 = 0.0;
    let mut dual: f64 = 0.0;
    for j in 0..constraints.len() {
        if constraints.equality_mask[j] {
            feasibility = feasibility.max(slack[j].abs());
        } else {
            feasibility = feasibility.max(-slack[j]);
            slackness = slackness.max((sol.mu[j] * slack[j]).abs());
            dual = dual.max(-sol.mu[j]);
        }
    }
    KtResiduals {
        stationarity: grad.amax(),
        feasibility,
        slackness,
        dual_feasibility: dual,
    }
}

/// Multipliers `−(R J⁻¹ R')⁻¹ (R Z + c)` when every row binds.
pub fn fully_binding_multipliers(
    problem: &QuadraticProblem,
    constraints: &LinearConstraints,
) -> Result<Vector> {
    let all: Vec<usize> = (0..constraints.len()).collect();
    Ok(solve_working_set(problem, constraints, &all)?.1)
}
