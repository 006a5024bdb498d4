//! Binding patterns, their projections and weights, and the combined estimator.

use rayon::prelude::*;

use crate::error::{IcseError, Result};
use crate::estimators::{self, ConstraintFunction};
use crate::linalg::{self, Matrix, Vector};
use crate::model::{self, EstimationProblem, LossSpec, ScoreVariance};
use crate::orthant::{self, StandardDraws};
use crate::qp::{KTSolution, LinearConstraints};

/// Upper limit on inequality plus equality rows for pattern enumeration.
pub const MAX_PATTERN_ROWS: usize = 20;
pub const DEFAULT_PRUNE_BELOW: f64 = 1e-4;

/// Subset of inequality rows holding with equality.
///
/// Indices are positions among the inequality rows (0-based), so pattern
/// `k` in enumeration order has the bits of `k` as its index set. Equality
/// rows are always part of every pattern.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BindingPattern {
    indices: Vec<usize>,
}

impl BindingPattern {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        BindingPattern { indices }
    }

    pub fn from_mask(mask: u64) -> Self {
        BindingPattern { indices: (0..64).filter(|b| mask >> b & 1 == 1).collect() }
    }

    pub fn mask(&self) -> u64 {
        self.indices.iter().fold(0, |m, &j| m | 1 << j)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// `p_ι`: binding inequality rows plus all equality rows.
    pub fn count(&self, equality_rows: usize) -> usize {
        self.indices.len() + equality_rows
    }

    /// Constraint-row indices held with equality, ascending.
    pub fn rows(&self, equality_mask: &[bool]) -> Vec<usize> {
        let ineq: Vec<usize> = (0..equality_mask.len()).filter(|&j| !equality_mask[j]).collect();
        let mut rows: Vec<usize> = (0..equality_mask.len()).filter(|&j| equality_mask[j]).collect();
        rows.extend(self.indices.iter().map(|&k| ineq[k]));
        rows.sort_unstable();
        rows
    }

    /// Pattern realized by a solution's active inequality rows.
    pub fn from_active(active: &[usize], equality_mask: &[bool]) -> Self {
        let mut pos = 0;
        let mut indices = Vec::new();
        for (j, &eq) in equality_mask.iter().enumerate() {
            if eq {
                continue;
            }
            if active.contains(&j) {
                indices.push(pos);
            }
            pos += 1;
        }
        BindingPattern { indices }
    }

    /// 1-based set notation, e.g. `{1,3}`.
    pub fn label(&self) -> String {
        let inner: Vec<String> = self.indices.iter().map(|j| (j + 1).to_string()).collect();
        format!("{{{}}}", inner.join(","))
    }
}

/// All `2^p` subsets of `p` inequality rows, in binary-counter order
/// (`∅, {1}, {2}, {1,2}, {3}, ...`).
pub fn enumerate_patterns(p: usize, equality_rows: usize) -> Result<Vec<BindingPattern>> {
    if p + equality_rows > MAX_PATTERN_ROWS {
        return Err(IcseError::Capacity(format!(
            "{p} inequality and {equality_rows} equality rows exceed the limit of {MAX_PATTERN_ROWS}"
        )));
    }
    Ok((0..1u64 << p).map(BindingPattern::from_mask).collect())
}

/// `J⁻¹R'(RJ⁻¹R')⁻¹R`, the `J`-oblique projection onto the row space of `R`.
pub fn projection_matrix(j: &Matrix, r_iota: &Matrix) -> Result<Matrix> {
    let m = j.nrows();
    if r_iota.nrows() == 0 {
        return Ok(Matrix::zeros(m, m));
    }
    if r_iota.ncols() != m {
        return Err(IcseError::shape("pattern rows do not act on the parameter space"));
    }
    linalg::check_full_row_rank(r_iota, "pattern rows")?;
    let jinv = linalg::spd_inverse(j)?;
    let jinv_rt = &jinv * r_iota.transpose();
    let gram = linalg::spd_inverse(&linalg::symmetrize(&(r_iota * &jinv_rt)))
        .map_err(|_| IcseError::rank("R J⁻¹ R' is singular"))?;
    Ok(jinv_rt * gram * r_iota)
}

fn require_spd(a: &Matrix, what: &str) -> Result<()> {
    if linalg::is_spd(a) {
        Ok(())
    } else {
        Err(IcseError::LossSpec(format!("{what} is not symmetric positive definite")))
    }
}

/// Trace and largest real eigenvalue of `A = W^{1/2} Ω P' W^{1/2}`.
pub fn pattern_a_stats(w: &Matrix, omega: &Matrix, j: &Matrix, r_iota: &Matrix) -> Result<(f64, f64)> {
    require_spd(w, "W")?;
    require_spd(omega, "Ω")?;
    let p = projection_matrix(j, r_iota)?;
    a_stats_with(&linalg::sym_sqrt(w)?, omega, &p)
}

fn a_stats_with(w_half: &Matrix, omega: &Matrix, projection: &Matrix) -> Result<(f64, f64)> {
    let a = w_half * omega * projection.transpose() * w_half;
    Ok((a.trace(), linalg::max_real_eigenvalue(&a)?))
}

/// Mean `−(RJ⁻¹R')⁻¹ĉ` and covariance `(RJ⁻¹R')⁻¹RΩR'(RJ⁻¹R')⁻¹` of the
/// multipliers with every row binding.
pub fn kt_distribution(j: &Matrix, omega: &Matrix, r: &Matrix, c_hat: &Vector) -> Result<(Vector, Matrix)> {
    if r.ncols() != j.nrows() || c_hat.len() != r.nrows() || omega.shape() != j.shape() {
        return Err(IcseError::shape("J, Ω, R and ĉ are not conformable"));
    }
    linalg::check_full_row_rank(r, "constraint jacobian")?;
    let jinv = linalg::spd_inverse(j)?;
    let m_inv = linalg::spd_inverse(&linalg::symmetrize(&(r * &jinv * r.transpose())))
        .map_err(|_| IcseError::rank("R J⁻¹ R' is singular"))?;
    let psi = -(&m_inv * c_hat);
    let xi = linalg::symmetrize(&(&m_inv * r * omega * r.transpose() * &m_inv));
    Ok((psi, xi))
}

/// `γ_ι ∝ P_ι / max(E[ξ_ι], floor)` over included patterns, zero elsewhere.
pub fn gamma_weights(
    probabilities: &[f64],
    expected_losses: &[f64],
    included: &[bool],
    loss_floor: f64,
) -> Result<Vec<f64>> {
    if probabilities.len() != expected_losses.len() || probabilities.len() != included.len() {
        return Err(IcseError::shape("pattern lists are not aligned"));
    }
    let inverse: Vec<f64> = expected_losses.iter().map(|&e| 1.0 / e.max(loss_floor)).collect();
    gamma_from_inverse(probabilities, &inverse, included)
}

/// `γ_ι ∝ P_ι · E[ξ_ι⁻¹]` with the inverse-loss factor given directly.
pub fn gamma_from_inverse(probabilities: &[f64], inverse_losses: &[f64], included: &[bool]) -> Result<Vec<f64>> {
    let num: Vec<f64> = probabilities
        .iter()
        .zip(inverse_losses)
        .zip(included)
        .map(|((&p, &inv), &inc)| if inc && p > 0.0 { p * inv } else { 0.0 })
        .collect();
    let total: f64 = num.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(IcseError::DegenerateWeights(
            "no included pattern has positive probability".into(),
        ));
    }
    Ok(num.into_iter().map(|v| v / total).collect())
}

/// Per-pattern diagnostics.
#[derive(Debug, Clone)]
pub struct PatternStats {
    pub pattern: BindingPattern,
    /// `p_ι`
    pub count: usize,
    pub projection: Matrix,
    pub a_trace: f64,
    pub a_phimax: f64,
    pub probability: f64,
    pub probability_se: f64,
    /// `Ê[ξ_ι]`; for simulated limits the within-pattern mean of `ξ`
    pub expected_loss: f64,
    /// factor standing in for `E[ξ_ι⁻¹]` in the weights
    pub inverse_loss: f64,
    pub h_offset: Vector,
    pub gamma: f64,
    /// whether the pattern enters the shrinkage sum
    pub included: bool,
}

impl PatternStats {
    /// `tr A − 2 φ_max(A)`
    pub fn effective_dim(&self) -> f64 {
        self.a_trace - 2.0 * self.a_phimax
    }
}

/// `max(0, Σ (tr A − 2φ_max) γ)` over included patterns.
pub fn feasible_tau(stats: &[PatternStats]) -> f64 {
    stats
        .iter()
        .filter(|s| s.included)
        .map(|s| s.effective_dim() * s.gamma)
        .sum::<f64>()
        .max(0.0)
}

/// `(1 − τ / loss)₊`, defined as 0 at zero loss.
pub fn shrinkage_weight(tau: f64, scaled_loss: f64) -> f64 {
    if scaled_loss <= 0.0 {
        return 0.0;
    }
    (1.0 - tau / scaled_loss).clamp(0.0, 1.0)
}

/// Which patterns enter the weights: non-empty ones (the empty pattern too
/// when equality rows exist) whose probability is at least `prune_below`.
/// Falls back to no pruning if that would leave nothing.
pub fn included_patterns(
    patterns: &[BindingPattern],
    probabilities: &[f64],
    equality_rows: usize,
    prune_below: f64,
) -> Vec<bool> {
    let eligible: Vec<bool> = patterns.iter().map(|p| equality_rows > 0 || !p.is_empty()).collect();
    let pruned: Vec<bool> = eligible
        .iter()
        .zip(probabilities)
        .map(|(&e, &p)| e && p >= prune_below)
        .collect();
    if pruned.iter().any(|&b| b) {
        pruned
    } else {
        eligible
    }
}

#[derive(Debug, Clone)]
pub struct IcseConfig {
    pub loss: LossSpec,
    pub variance: ScoreVariance,
    pub orthant_draws: usize,
    pub seed: u64,
    pub prune_below: f64,
}

impl Default for IcseConfig {
    fn default() -> Self {
        IcseConfig {
            loss: LossSpec::InverseOmega,
            variance: ScoreVariance::Robust,
            orthant_draws: orthant::DEFAULT_DRAWS,
            seed: 0,
            prune_below: DEFAULT_PRUNE_BELOW,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ShrinkageResult {
    pub theta_hat: Vector,
    pub theta_tilde: Vector,
    pub kt: KTSolution,
    pub c_hat: Vector,
    pub tau_star: f64,
    /// `n ℓ(θ̂, θ̃)`
    pub scaled_loss: f64,
    pub weight: f64,
    pub combined: Vector,
    pub pattern_table: Vec<PatternStats>,
    /// set when every pattern weight vanished and `τ̂*` fell back to 0
    pub degenerate_gamma: bool,
}

/// `ŵ θ̂ + (1 − ŵ) θ̃`
pub fn combine(weight: f64, theta_hat: &Vector, theta_tilde: &Vector) -> Vector {
    theta_hat * weight + theta_tilde * (1.0 - weight)
}

/// Feasible inequality constrained shrinkage estimator with full diagnostics.
pub fn fit_icse(
    problem: &EstimationProblem,
    cons: &dyn ConstraintFunction,
    cfg: &IcseConfig,
) -> Result<ShrinkageResult> {
    let fit = estimators::fit_unrestricted(problem, cfg.variance)?;
    let lin = estimators::linearize(cons, &fit.theta)?;
    let (restricted, kt) = estimators::restrict_fit(&fit, cons)?;
    let w = model::loss_matrix(&cfg.loss, &fit)?;
    let n = fit.n as f64;
    let scaled_loss = n * model::evaluate_loss(&w, &fit.theta, &restricted.theta)?;
    let c_hat = estimators::localizing_estimate(&fit, cons);

    let mask = lin.equality_mask().to_vec();
    let ineq_rows = lin.inequality_rows();
    let n_eq = mask.len() - ineq_rows.len();
    let patterns = enumerate_patterns(ineq_rows.len(), n_eq)?;

    let probs: Vec<orthant::ProbabilityEstimate> = if ineq_rows.is_empty() {
        vec![orthant::ProbabilityEstimate { estimate: 1.0, std_error: 0.0 }]
    } else {
        let r_ineq = linalg::select_rows(lin.jacobian(), &ineq_rows);
        let c_ineq = linalg::select_entries(&c_hat, &ineq_rows);
        let (mean, cov) = kt_distribution(&fit.jhat, &fit.omega, &r_ineq, &c_ineq)?;
        let draws = StandardDraws::new(cfg.seed, &[0x1C5E, ineq_rows.len() as u64], cfg.orthant_draws, ineq_rows.len());
        orthant::mask_probabilities(&mean, &cov, &draws)?
    };

    let w_half = linalg::sym_sqrt(&w)?;
    let loss_floor = 1e-8 * (&w * &fit.omega).trace();
    let per_pattern: Vec<Result<(Matrix, f64, f64, f64, Vector)>> = patterns
        .par_iter()
        .map(|pat| {
            let rows = pat.rows(&mask);
            let r_iota = linalg::select_rows(lin.jacobian(), &rows);
            let projection = projection_matrix(&fit.jhat, &r_iota)?;
            let (tr, phi) = a_stats_with(&w_half, &fit.omega, &projection)?;
            let theta_iota = estimators::equality_restricted_theta(&fit, &lin, pat)?;
            let e_loss = n * model::evaluate_loss(&w, &fit.theta, &theta_iota)?;
            let h_offset = if rows.is_empty() {
                Vector::zeros(fit.dim())
            } else {
                let c_iota = linalg::select_entries(&c_hat, &rows);
                &projection * linalg::right_inverse(&r_iota)? * c_iota
            };
            Ok((projection, tr, phi, e_loss, h_offset))
        })
        .collect();

    let probabilities: Vec<f64> = probs.iter().map(|p| p.estimate).collect();
    let included = included_patterns(&patterns, &probabilities, n_eq, cfg.prune_below);
    let mut table = Vec::with_capacity(patterns.len());
    for (k, (pat, res)) in patterns.into_iter().zip(per_pattern).enumerate() {
        let (projection, a_trace, a_phimax, expected_loss, h_offset) = res?;
        table.push(PatternStats {
            count: pat.count(n_eq),
            pattern: pat,
            projection,
            a_trace,
            a_phimax,
            probability: probs[k].estimate,
            probability_se: probs[k].std_error,
            expected_loss,
            inverse_loss: 1.0 / expected_loss.max(loss_floor),
            h_offset,
            gamma: 0.0,
            included: included[k],
        });
    }
    let inverse: Vec<f64> = table.iter().map(|s| s.inverse_loss).collect();
    let (tau_star, degenerate_gamma) = match gamma_from_inverse(&probabilities, &inverse, &included) {
        Ok(gamma) => {
            for (s, g) in table.iter_mut().zip(gamma) {
                s.gamma = g;
            }
            (feasible_tau(&table), false)
        }
        Err(IcseError::DegenerateWeights(_)) => (0.0, true),
        Err(e) => return Err(e),
    };
    let weight = shrinkage_weight(tau_star, scaled_loss);
    let combined = combine(weight, &fit.theta, &restricted.theta);
    Ok(ShrinkageResult {
        theta_hat: fit.theta,
        theta_tilde: restricted.theta,
        kt,
        c_hat,
        tau_star,
        scaled_loss,
        weight,
        combined,
        pattern_table: table,
        degenerate_gamma,
    })
}

/// Pattern rows of `lin` for `pattern` as a matrix.
pub fn pattern_rows(lin: &LinearConstraints, pattern: &BindingPattern) -> Matrix {
    linalg::select_rows(lin.jacobian(), &pattern.rows(lin.equality_mask()))
}
