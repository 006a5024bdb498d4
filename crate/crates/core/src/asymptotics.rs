//! Limit experiments: draws from the asymptotic law of the restricted and
//! shrinkage estimators, their risk, the explicit risk bound, a closed form
//! for two sign restrictions, and a Stein-identity check.

use rayon::prelude::*;

use crate::error::{IcseError, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::normal;
use crate::qp::{self, LinearConstraints, QuadraticProblem};
use crate::rng;
use crate::shrinkage::{self, BindingPattern, PatternStats};

pub const MIN_LIMIT_DRAWS: usize = 10_000;
/// Floor on `ξ` when averaging `1/ξ` within a pattern.
pub const XI_FLOOR: f64 = 1e-12;
pub const DEFAULT_ZETA: f64 = 1e6;

#[derive(Debug, Clone)]
pub struct LimitConfig {
    pub j: Matrix,
    /// variance of the score limit `G ~ N(0, V)`
    pub v: Matrix,
    pub r: Matrix,
    /// localizing parameter `c`
    pub localizer: Vector,
    pub equality_mask: Vec<bool>,
    pub w: Matrix,
    pub tau: f64,
    pub draws: usize,
    pub seed: u64,
    /// trimming level for the loss
    pub zeta: f64,
}

impl LimitConfig {
    /// Pure inequality problem with `W = Ω⁻¹`, `τ = 0` and default trimming.
    pub fn canonical(j: Matrix, v: Matrix, r: Matrix, localizer: Vector, draws: usize, seed: u64) -> Result<Self> {
        let p = r.nrows();
        let omega = sandwich(&j, &v)?;
        let w = linalg::spd_inverse(&omega)?;
        Ok(LimitConfig {
            j,
            v,
            r,
            localizer,
            equality_mask: vec![false; p],
            w,
            tau: 0.0,
            draws,
            seed,
            zeta: DEFAULT_ZETA,
        })
    }

    pub fn omega(&self) -> Result<Matrix> {
        sandwich(&self.j, &self.v)
    }

    pub fn constraints(&self) -> Result<LinearConstraints> {
        LinearConstraints::new(self.r.clone(), self.localizer.clone(), self.equality_mask.clone())
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.j.nrows();
        if self.j.shape() != (m, m) || self.v.shape() != (m, m) || self.w.shape() != (m, m) || self.r.ncols() != m {
            return Err(IcseError::shape("J, V, W and R are not conformable"));
        }
        if self.localizer.len() != self.r.nrows() || self.equality_mask.len() != self.r.nrows() {
            return Err(IcseError::shape("localizer and equality mask must have one entry per row of R"));
        }
        if !linalg::is_spd(&self.omega()?) {
            return Err(IcseError::Covariance("Ω = J⁻¹VJ⁻¹ is not positive definite".into()));
        }
        if !linalg::is_spd(&self.w) {
            return Err(IcseError::LossSpec("W is not symmetric positive definite".into()));
        }
        if !(self.tau >= 0.0) {
            return Err(IcseError::Config("τ must be non-negative".into()));
        }
        if self.draws < MIN_LIMIT_DRAWS {
            return Err(IcseError::Config(format!("at least {MIN_LIMIT_DRAWS} limit draws are required")));
        }
        Ok(())
    }
}

fn sandwich(j: &Matrix, v: &Matrix) -> Result<Matrix> {
    let jinv = linalg::spd_inverse(j)?;
    Ok(linalg::symmetrize(&(&jinv * v * &jinv)))
}

/// Draws of the limit objects, one row per draw.
#[derive(Debug, Clone)]
pub struct LimitDraws {
    pub m: usize,
    pub tau: f64,
    /// `draws x m`, row-major
    pub z: Vec<f64>,
    pub lambda_tilde: Vec<f64>,
    pub xi: Vec<f64>,
    pub weight: Vec<f64>,
    pub psi_star: Vec<f64>,
    /// bit mask of the binding inequality rows (positions among inequality rows)
    pub pattern_id: Vec<u64>,
}

impl LimitDraws {
    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    pub fn z_row(&self, i: usize) -> &[f64] {
        &self.z[i * self.m..(i + 1) * self.m]
    }

    pub fn lambda_row(&self, i: usize) -> &[f64] {
        &self.lambda_tilde[i * self.m..(i + 1) * self.m]
    }

    pub fn psi_row(&self, i: usize) -> &[f64] {
        &self.psi_star[i * self.m..(i + 1) * self.m]
    }

    /// Same `Z`, `λ̃` and `ξ` with weights and `ψ*` recomputed for another `τ`.
    pub fn with_tau(&self, tau: f64) -> LimitDraws {
        let mut out = self.clone();
        out.tau = tau;
        for i in 0..self.len() {
            let w = limit_weight(tau, self.xi[i]);
            out.weight[i] = w;
            for k in 0..self.m {
                let idx = i * self.m + k;
                out.psi_star[idx] = w * self.z[idx] + (1.0 - w) * self.lambda_tilde[idx];
            }
        }
        out
    }
}

/// `(1 − τ/ξ)₊`, zero when `ξ = 0`.
pub fn limit_weight(tau: f64, xi: f64) -> f64 {
    if xi <= 0.0 {
        0.0
    } else {
        (1.0 - tau / xi).clamp(0.0, 1.0)
    }
}

/// Simulates `Z = J⁻¹G`, the constrained minimizer `λ̃`, `ξ`, `w` and `ψ*`.
pub fn draw_limit(cfg: &LimitConfig) -> Result<LimitDraws> {
    cfg.validate()?;
    let m = cfg.j.nrows();
    let cons = cfg.constraints()?;
    let jinv = linalg::spd_inverse(&cfg.j)?;
    let factor = &jinv * linalg::psd_factor(&cfg.v)?;
    let base = QuadraticProblem::new(cfg.j.clone(), Vector::zeros(m))?;
    let normals = rng::standard_normal_rows(cfg.seed, &[0x11A1, m as u64], cfg.draws, m);
    let mask = cfg.equality_mask.clone();

    type Row = (Vec<f64>, Vec<f64>, f64, u64);
    let rows: Vec<Result<Vec<Row>>> = normals
        .par_chunks(rng::BLOCK * m)
        .map(|chunk| {
            let mut out = Vec::with_capacity(chunk.len() / m);
            let mut warm: Option<Vec<usize>> = None;
            for e in chunk.chunks(m) {
                let z = &factor * Vector::from_column_slice(e);
                let problem = base.with_center(z.clone());
                let sol = qp::solve_qp_warm(&problem, &cons, warm.as_deref())?;
                let d = &z - &sol.lambda;
                let xi = linalg::quad_form(&cfg.w, &d).max(0.0);
                let pattern = BindingPattern::from_active(&sol.active, &mask);
                warm = Some(sol.binding_inequalities(&cons));
                out.push((z.as_slice().to_vec(), sol.lambda.as_slice().to_vec(), xi, pattern.mask()));
            }
            Ok(out)
        })
        .collect();

    let mut draws = LimitDraws {
        m,
        tau: 0.0,
        z: Vec::with_capacity(cfg.draws * m),
        lambda_tilde: Vec::with_capacity(cfg.draws * m),
        xi: Vec::with_capacity(cfg.draws),
        weight: vec![0.0; cfg.draws],
        psi_star: vec![0.0; cfg.draws * m],
        pattern_id: Vec::with_capacity(cfg.draws),
    };
    for chunk in rows {
        for (z, l, xi, id) in chunk? {
            draws.z.extend(z);
            draws.lambda_tilde.extend(l);
            draws.xi.push(xi);
            draws.pattern_id.push(id);
        }
    }
    Ok(draws.with_tau(cfg.tau))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskEstimate {
    pub risk: f64,
    pub se: f64,
    pub trimmed_risk: f64,
    pub trimmed_se: f64,
    /// `E[ψ*'Wψ* − Z'WZ] + tr(WΩ)`: same target, `Z'WZ` as control variate
    pub risk_cv: f64,
    pub se_cv: f64,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

fn wquad(w: &Matrix, x: &[f64]) -> f64 {
    let m = x.len();
    let mut acc = 0.0;
    for a in 0..m {
        for b in 0..m {
            acc += x[a] * w[(a, b)] * x[b];
        }
    }
    acc
}

/// Mean weighted quadratic loss of `ψ*`, plain and trimmed at `zeta`.
/// `tr_w_omega` enables the control-variate estimate.
pub fn estimate_risk(draws: &LimitDraws, w: &Matrix, zeta: f64, tr_w_omega: Option<f64>) -> RiskEstimate {
    let n = draws.len();
    let loss: Vec<f64> = (0..n).map(|i| wquad(w, draws.psi_row(i))).collect();
    let trimmed: Vec<f64> = loss.iter().map(|&l| l.min(zeta)).collect();
    let (risk, se) = mean_se(&loss);
    let (trimmed_risk, trimmed_se) = mean_se(&trimmed);
    let (risk_cv, se_cv) = match tr_w_omega {
        Some(t) => {
            let diff: Vec<f64> = (0..n).map(|i| loss[i] - wquad(w, draws.z_row(i))).collect();
            let (d, s) = mean_se(&diff);
            (d + t, s)
        }
        None => (risk, se),
    };
    RiskEstimate { risk, se, trimmed_risk, trimmed_se, risk_cv, se_cv }
}

/// Empirical frequency and conditional mean of `λ̃` for one pattern.
#[derive(Debug, Clone)]
pub struct PatternSummary {
    pub mask: u64,
    pub count: usize,
    pub frequency: f64,
    pub frequency_se: f64,
    pub mean_lambda: Vector,
    pub mean_lambda_se: Vector,
    pub mean_xi: f64,
    /// within-pattern mean of `1 / max(ξ, floor)`
    pub mean_inverse_xi: f64,
}

/// Per-pattern summaries for all `2^p` masks, in mask order.
pub fn pattern_summaries(draws: &LimitDraws, inequality_rows: usize) -> Vec<PatternSummary> {
    let total = draws.len() as f64;
    let mut by_mask: Vec<Vec<usize>> = vec![Vec::new(); 1 << inequality_rows];
    for (i, &id) in draws.pattern_id.iter().enumerate() {
        by_mask[id as usize].push(i);
    }
    by_mask
        .into_iter()
        .enumerate()
        .map(|(mask, idx)| {
            let count = idx.len();
            let f = count as f64 / total;
            let mut mean = Vector::zeros(draws.m);
            let mut se = Vector::from_element(draws.m, f64::NAN);
            let (mut mean_xi, mut mean_inv) = (f64::NAN, f64::NAN);
            if count > 0 {
                for k in 0..draws.m {
                    let vals: Vec<f64> = idx.iter().map(|&i| draws.lambda_row(i)[k]).collect();
                    let (mu, s) = mean_se(&vals);
                    mean[k] = mu;
                    se[k] = if count > 1 { s } else { f64::NAN };
                }
                mean_xi = idx.iter().map(|&i| draws.xi[i]).sum::<f64>() / count as f64;
                mean_inv = idx.iter().map(|&i| 1.0 / draws.xi[i].max(XI_FLOOR)).sum::<f64>() / count as f64;
            } else {
                mean.fill(f64::NAN);
            }
            PatternSummary {
                mask: mask as u64,
                count,
                frequency: f,
                frequency_se: (f * (1.0 - f) / total).sqrt(),
                mean_lambda: mean,
                mean_lambda_se: se,
                mean_xi,
                mean_inverse_xi: mean_inv,
            }
        })
        .collect()
}

/// Pattern table with simulation-truth probabilities, `E[ξ⁻¹ | ι]` and `γ`.
///
/// The empty pattern is left out of the weights for pure inequality
/// problems; patterns never visited get zero weight.
pub fn simulation_truth(cfg: &LimitConfig, draws: &LimitDraws) -> Result<Vec<PatternStats>> {
    let cons = cfg.constraints()?;
    let n_ineq = cons.inequality_rows().len();
    let n_eq = cons.len() - n_ineq;
    let omega = cfg.omega()?;
    let w_half = linalg::sym_sqrt(&cfg.w)?;
    let summaries = pattern_summaries(draws, n_ineq);
    let patterns = shrinkage::enumerate_patterns(n_ineq, n_eq)?;
    let mut table = Vec::with_capacity(patterns.len());
    for (pat, s) in patterns.into_iter().zip(&summaries) {
        let rows = pat.rows(&cfg.equality_mask);
        let r_iota = linalg::select_rows(&cfg.r, &rows);
        let projection = shrinkage::projection_matrix(&cfg.j, &r_iota)?;
        let a = &w_half * &omega * projection.transpose() * &w_half;
        let h_offset = if rows.is_empty() {
            Vector::zeros(cfg.j.nrows())
        } else {
            &projection * linalg::right_inverse(&r_iota)? * linalg::select_entries(&cfg.localizer, &rows)
        };
        let included = (n_eq > 0 || !pat.is_empty()) && s.count > 0;
        table.push(PatternStats {
            count: pat.count(n_eq),
            pattern: pat,
            projection,
            a_trace: a.trace(),
            a_phimax: linalg::max_real_eigenvalue(&a)?,
            probability: s.frequency,
            probability_se: s.frequency_se,
            expected_loss: s.mean_xi,
            inverse_loss: if s.count > 0 { s.mean_inverse_xi } else { 0.0 },
            h_offset,
            gamma: 0.0,
            included,
        });
    }
    let probs: Vec<f64> = table.iter().map(|s| s.probability).collect();
    let inv: Vec<f64> = table.iter().map(|s| s.inverse_loss).collect();
    let inc: Vec<bool> = table.iter().map(|s| s.included).collect();
    if let Ok(gamma) = shrinkage::gamma_from_inverse(&probs, &inv, &inc) {
        for (s, g) in table.iter_mut().zip(gamma) {
            s.gamma = g;
        }
    }
    Ok(table)
}

/// `Σ (tr A − 2φ_max) γ` over included patterns (not clamped).
pub fn optimal_tau(stats: &[PatternStats]) -> f64 {
    stats.iter().filter(|s| s.included).map(|s| s.effective_dim() * s.gamma).sum()
}

/// `Σ p_ι γ_ι` over included patterns.
pub fn expected_binding_count(stats: &[PatternStats]) -> f64 {
    stats.iter().filter(|s| s.included).map(|s| s.count as f64 * s.gamma).sum()
}

/// `tr(WΩ) − τ Σ (2(tr A − 2φ_max) − τ) E[ξ⁻¹|ι] P(ι)` over included patterns.
pub fn risk_bound(tau: f64, stats: &[PatternStats], tr_w_omega: f64) -> f64 {
    let s: f64 = stats
        .iter()
        .filter(|s| s.included)
        .map(|s| (2.0 * s.effective_dim() - tau) * s.inverse_loss * s.probability)
        .sum();
    tr_w_omega - tau * s
}

/// Largest `|ξ − (Z+h_ι)'P'WP(Z+h_ι)|` over all draws, using each draw's pattern.
pub fn projection_form_discrepancy(draws: &LimitDraws, stats: &[PatternStats], w: &Matrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..draws.len() {
        let s = &stats[draws.pattern_id[i] as usize];
        let z = Vector::from_column_slice(draws.z_row(i));
        let v = &s.projection * (z + &s.h_offset);
        let form = linalg::quad_form(w, &v);
        worst = worst.max((form - draws.xi[i]).abs() / (1.0 + draws.xi[i]));
    }
    worst
}

/// Probability and conditional mean of `λ̃` for one pattern of the 2-D closed form.
#[derive(Debug, Clone)]
pub struct PatternLaw {
    pub pattern: BindingPattern,
    pub probability: f64,
    /// `E[λ̃ | pattern]`; NaN when the pattern has probability zero
    pub mean_lambda: [f64; 2],
}

/// Exact law of the restricted limit for `m = 2` with sign restrictions
/// `λ_j + c_j ≥ 0`, patterns in order `∅, {1}, {2}, {1,2}`.
///
/// With `u = Z + c ~ N(c, Ω)` every pattern is the intersection of two
/// half-planes `a'u ≥ 0, b'u ≥ 0`, and `λ̃` is affine in `u` on it.
/// Probabilities use the bivariate normal orthant formula; conditional means
/// use adaptive quadrature over one coordinate with the other integrated in
/// closed form.
pub fn closed_form_2d(j: &Matrix, v: &Matrix, c: &Vector) -> Result<Vec<PatternLaw>> {
    if j.shape() != (2, 2) || v.shape() != (2, 2) || c.len() != 2 {
        return Err(IcseError::shape("closed form requires m = 2 and two sign restrictions"));
    }
    let omega = sandwich(j, v)?;
    let (j11, j12, j22) = (j[(0, 0)], j[(0, 1)], j[(1, 1)]);
    let cv = [c[0], c[1]];
    // (a, b, M) with λ̃ = M u − c on the region
    let regions: [([f64; 2], [f64; 2], [[f64; 2]; 2]); 4] = [
        ([1.0, 0.0], [0.0, 1.0], [[1.0, 0.0], [0.0, 1.0]]),
        ([-1.0, 0.0], [j12 / j22, 1.0], [[0.0, 0.0], [j12 / j22, 1.0]]),
        ([1.0, j12 / j11], [0.0, -1.0], [[1.0, j12 / j11], [0.0, 0.0]]),
        ([-j11, -j12], [-j12, -j22], [[0.0, 0.0], [0.0, 0.0]]),
    ];
    let om = [[omega[(0, 0)], omega[(0, 1)]], [omega[(1, 0)], omega[(1, 1)]]];
    let dot = |a: &[f64; 2], b: &[f64; 2]| a[0] * b[0] + a[1] * b[1];
    let quad = |a: &[f64; 2], b: &[f64; 2]| {
        a[0] * (om[0][0] * b[0] + om[0][1] * b[1]) + a[1] * (om[1][0] * b[0] + om[1][1] * b[1])
    };
    let mut out = Vec::with_capacity(4);
    for (k, (a, b, mmap)) in regions.iter().enumerate() {
        let mean = [dot(a, &cv), dot(b, &cv)];
        let cov = [[quad(a, a), quad(a, b)], [quad(a, b), quad(b, b)]];
        let prob = normal::bvn_positive_quadrant(mean, cov);
        let mean_lambda = if prob < 1e-300 {
            [f64::NAN; 2]
        } else {
            // E[y | y ≥ 0] for y = (a'u, b'u), then u = A⁻¹ y
            let ey = truncated_bvn_mean(mean, cov, prob);
            let det = a[0] * b[1] - a[1] * b[0];
            let eu = [(b[1] * ey[0] - a[1] * ey[1]) / det, (-b[0] * ey[0] + a[0] * ey[1]) / det];
            [mmap[0][0] * eu[0] + mmap[0][1] * eu[1] - cv[0], mmap[1][0] * eu[0] + mmap[1][1] * eu[1] - cv[1]]
        };
        out.push(PatternLaw { pattern: BindingPattern::from_mask(k as u64), probability: prob, mean_lambda });
    }
    Ok(out)
}

/// `E[y | y₁ ≥ 0, y₂ ≥ 0]` for a bivariate normal with the given moments and
/// known orthant probability.
fn truncated_bvn_mean(mean: [f64; 2], cov: [[f64; 2]; 2], prob: f64) -> [f64; 2] {
    let s1 = cov[0][0].sqrt();
    let s2 = cov[1][1].sqrt();
    let rho = (cov[0][1] / (s1 * s2)).clamp(-1.0, 1.0);
    let cond_sd = s2 * (1.0 - rho * rho).max(0.0).sqrt();
    let lo = (mean[0] - 12.0 * s1).max(0.0);
    let hi = mean[0] + 12.0 * s1;
    if hi <= lo {
        return [f64::NAN; 2];
    }
    let dens = |y1: f64| normal::pdf((y1 - mean[0]) / s1) / s1;
    let cond_mean = |y1: f64| mean[1] + rho * s2 / s1 * (y1 - mean[0]);
    // P(y₂ ≥ 0 | y₁) and E[y₂ 1{y₂ ≥ 0} | y₁]
    let tail = |y1: f64| {
        let mu = cond_mean(y1);
        if cond_sd == 0.0 {
            ((mu >= 0.0) as u8 as f64, mu.max(0.0))
        } else {
            let t = mu / cond_sd;
            (normal::cdf(t), mu * normal::cdf(t) + cond_sd * normal::pdf(t))
        }
    };
    let e1 = adaptive_simpson(&|y1| y1 * dens(y1) * tail(y1).0, lo, hi, 1e-10);
    let e2 = adaptive_simpson(&|y1| dens(y1) * tail(y1).1, lo, hi, 1e-10);
    [e1 / prob, e2 / prob]
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    // split first so narrow peaks are not missed by the initial estimate
    let pieces = 64;
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|k| {
            let (x0, x1) = (a + k as f64 * h, a + (k + 1) as f64 * h);
            let (f0, fm, f1) = (f(x0), f(0.5 * (x0 + x1)), f(x1));
            let whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
            rec(f, x0, x1, f0, fm, f1, whole, tol / pieces as f64, 40)
        })
        .sum()
}

/// Result of a Stein-identity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteinCheck {
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    /// `|mean(lhs − rhs)| / se`, per-draw paired
    pub discrepancy: f64,
}

/// Checks `E[η(Z+h)'KZ] = E tr(∂η(Z+h)' K V)` for `Z ~ N(0, V)` and
/// `η(x) = x / (x'Bx)`.
pub fn steins_identity_check(k: &Matrix, h: &Vector, v: &Matrix, b: &Matrix, draws: usize, seed: u64) -> Result<SteinCheck> {
    let m = h.len();
    if k.shape() != (m, m) || v.shape() != (m, m) || b.shape() != (m, m) {
        return Err(IcseError::shape("K, V and B must be m x m"));
    }
    if k.amax() == 0.0 {
        return Ok(SteinCheck { lhs: 0.0, lhs_se: 0.0, rhs: 0.0, rhs_se: 0.0, discrepancy: 0.0 });
    }
    let l = linalg::psd_factor(v)?;
    let kv = k * v;
    let normals = rng::standard_normal_rows(seed, &[0x57E1, m as u64], draws, m);
    let per: Vec<(f64, f64)> = normals
        .par_chunks(rng::BLOCK * m)
        .flat_map_iter(|chunk| {
            chunk
                .chunks(m)
                .map(|e| {
                    let z = &l * Vector::from_column_slice(e);
                    let x = &z + h;
                    let bx = b * &x;
                    let s = x.dot(&bx);
                    let eta = &x / s;
                    let lhs = eta.dot(&(k * &z));
                    // ∂η_i/∂x_k = δ_ik/s − 2 x_i (Bx)_k / s²
                    let d = Matrix::identity(m, m) / s - (&x * bx.transpose()) * (2.0 / (s * s));
                    let rhs = d.component_mul(&kv).sum();
                    (lhs, rhs)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let lhs: Vec<f64> = per.iter().map(|p| p.0).collect();
    let rhs: Vec<f64> = per.iter().map(|p| p.1).collect();
    let diff: Vec<f64> = per.iter().map(|p| p.0 - p.1).collect();
    let (lm, ls) = mean_se(&lhs);
    let (rm, rs) = mean_se(&rhs);
    let (dm, ds) = mean_se(&diff);
    Ok(SteinCheck { lhs: lm, lhs_se: ls, rhs: rm, rhs_se: rs, discrepancy: if ds > 0.0 { dm.abs() / ds } else { 0.0 } })
}
