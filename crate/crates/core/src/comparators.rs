//! Benchmark estimators: positive-part James-Stein and Empirical Bayes
//! with a truncated normal prior.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{IcseError, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::model::{EstimationProblem, FitResult};
use crate::normal;
use crate::orthant::{self, StandardDraws};
use crate::rng;

/// `(1 − (m − 2) / stat)₊`, with no shrinkage for `m ≤ 2`.
pub fn james_stein_weight(m: usize, stat: f64) -> f64 {
    if m <= 2 {
        return 1.0;
    }
    if stat <= 0.0 {
        return 0.0;
    }
    (1.0 - (m as f64 - 2.0) / stat).clamp(0.0, 1.0)
}

/// Shrinks `θ̂` toward the origin with `stat = n θ̂'Ω̂⁻¹θ̂`.
pub fn james_stein(fit: &FitResult) -> Result<Vector> {
    let m = fit.dim();
    if m <= 2 {
        return Ok(fit.theta.clone());
    }
    let prec = linalg::spd_inverse(&fit.omega)?;
    let stat = fit.n as f64 * linalg::quad_form(&prec, &fit.theta);
    Ok(&fit.theta * james_stein_weight(m, stat))
}

/// How the truncation constant `D = P(θ_T ≥ 0 | Y, ν)` is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormalizerMethod {
    /// sequential conditioning (GHK): positive, low variance even when `D` is tiny
    #[default]
    Sequential,
    /// plain sign counting through the orthant module
    Counting,
}

#[derive(Debug, Clone)]
pub struct EBConfig {
    pub nu_min: f64,
    pub nu_max: f64,
    pub grid_points: usize,
    pub gibbs_burn: usize,
    pub gibbs_draws: usize,
    /// draws for the truncation constant, shared across all `ν`
    pub d_draws: usize,
    pub d_method: NormalizerMethod,
    /// coordinates under the `θ ≥ 0` truncation; `None` truncates all
    pub truncated: Option<Vec<usize>>,
    pub seed: u64,
}

impl Default for EBConfig {
    fn default() -> Self {
        EBConfig {
            nu_min: 1e-4,
            nu_max: 1e4,
            grid_points: 41,
            gibbs_burn: 1000,
            gibbs_draws: 10_000,
            d_draws: 1000,
            d_method: NormalizerMethod::Sequential,
            truncated: None,
            seed: 0,
        }
    }
}

impl EBConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu_min > 0.0 && self.nu_min <= 1e-4 && self.nu_max >= 1e4) {
            return Err(IcseError::Config("ν grid must cover at least [1e-4, 1e4]".into()));
        }
        if self.grid_points < 3 {
            return Err(IcseError::Config("ν grid needs at least 3 points".into()));
        }
        if self.gibbs_draws < 1000 {
            return Err(IcseError::Config("gibbs_draws must be at least 1000".into()));
        }
        if self.d_draws == 0 {
            return Err(IcseError::Config("d_draws must be positive".into()));
        }
        Ok(())
    }

    fn truncated_set(&self, m: usize) -> Result<Vec<usize>> {
        let set = match &self.truncated {
            None => (0..m).collect(),
            Some(t) => {
                let mut t = t.clone();
                t.sort_unstable();
                t.dedup();
                t
            }
        };
        if set.iter().any(|&j| j >= m) {
            return Err(IcseError::Config(format!("truncated coordinate out of range for dimension {m}")));
        }
        Ok(set)
    }

    pub fn nu_grid(&self) -> Vec<f64> {
        let (a, b) = (self.nu_min.ln(), self.nu_max.ln());
        let k = self.grid_points - 1;
        (0..=k).map(|i| (a + (b - a) * i as f64 / k as f64).exp()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct EBPosterior {
    pub nu: f64,
    /// `(X'X + νI)⁻¹X'y`
    pub theta_bar: Vector,
    /// `(X'X + νI)⁻¹`
    pub v_bar: Matrix,
    pub d_const: f64,
    pub d_se: f64,
    pub posterior_mean: Vector,
    pub posterior_se: Vector,
}

/// Estimate of a positive-orthant probability with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalizer {
    pub log_value: f64,
    pub value: f64,
    pub std_error: f64,
}

/// `P(θ_T ≥ 0)` for `θ ~ N(mean, cov)` with the supplied standard draws.
pub fn truncation_constant(
    mean: &Vector,
    cov: &Matrix,
    truncated: &[usize],
    method: NormalizerMethod,
    draws: &StandardDraws,
) -> Result<Normalizer> {
    if truncated.is_empty() {
        return Ok(Normalizer { log_value: 0.0, value: 1.0, std_error: 0.0 });
    }
    let mu = linalg::select_entries(mean, truncated);
    let sigma = linalg::select_block(cov, truncated, truncated);
    let k = truncated.len();
    if draws.dim() < k {
        return Err(IcseError::shape("not enough draw coordinates for the truncated block"));
    }
    match method {
        NormalizerMethod::Counting => {
            let sub = StandardDraws::from_rows(draws, k);
            let probs = orthant::mask_probabilities(&mu, &sigma, &sub)?;
            let e = probs[(1usize << k) - 1];
            Ok(Normalizer { log_value: e.estimate.ln(), value: e.estimate, std_error: e.std_error })
        }
        NormalizerMethod::Sequential => {
            let uniforms: Vec<f64> = (0..draws.len()).flat_map(|i| draws.row(i)[..k].to_vec()).map(normal::cdf).collect();
            sequential_normalizer(&mu, &sigma, &uniforms)
        }
    }
}

/// GHK estimate of `P(x ≥ 0)` for `x ~ N(mu, sigma)`, computed in log space;
/// `uniforms` holds one row of `k` uniforms per draw.
fn sequential_normalizer(mu: &Vector, sigma: &Matrix, uniforms: &[f64]) -> Result<Normalizer> {
    let k = mu.len();
    let l = linalg::cholesky(sigma)
        .map_err(|_| IcseError::Covariance("truncated block is not positive definite".into()))?
        .l();
    let n = uniforms.len() / k;
    let mut logs = Vec::with_capacity(n);
    let mut z = vec![0.0; k];
    for row in uniforms.chunks_exact(k) {
        let mut log_w = 0.0;
        for a in 0..k {
            let shift: f64 = (0..a).map(|b| l[(a, b)] * z[b]).sum();
            let lower = -(mu[a] + shift) / l[(a, a)];
            let tail = normal::sf(lower);
            if tail <= 0.0 {
                log_w = f64::NEG_INFINITY;
                break;
            }
            log_w += tail.ln();
            if a + 1 < k {
                z[a] = truncated_above(lower, tail, row[a]);
            }
        }
        logs.push(log_w);
    }
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Ok(Normalizer { log_value: f64::NEG_INFINITY, value: 0.0, std_error: 0.0 });
    }
    let scaled: Vec<f64> = logs.iter().map(|&v| (v - top).exp()).collect();
    let mean_s = scaled.iter().sum::<f64>() / n as f64;
    let var_s = scaled.iter().map(|s| (s - mean_s).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
    let log_value = top + mean_s.ln();
    Ok(Normalizer {
        log_value,
        value: log_value.exp(),
        std_error: top.exp() * (var_s / n as f64).sqrt(),
    })
}

/// Draw from `N(0,1)` restricted to `[lower, ∞)` by inverse CDF, given
/// `tail = P(Z ≥ lower)` and a uniform `u`.
fn truncated_above(lower: f64, tail: f64, u: f64) -> f64 {
    let v = u * tail;
    if v > f64::MIN_POSITIVE {
        let z = -normal::quantile(v);
        if z.is_finite() {
            return z.max(lower);
        }
    }
    // far tail: exponential approximation of the Mills ratio
    let u = u.max(f64::MIN_POSITIVE);
    lower + (-u.ln()) / lower.max(1.0)
}

fn posterior_moments(problem: &EstimationProblem, nu: f64) -> Result<(Vector, Matrix, Matrix)> {
    let x = problem.design();
    let m = problem.dim();
    let q = x.transpose() * x + Matrix::identity(m, m) * nu;
    let v_bar = linalg::spd_inverse(&q)?;
    let theta_bar = &v_bar * (x.transpose() * problem.response());
    Ok((theta_bar, v_bar, q))
}

/// Common random numbers for `D`, shared by every `ν`.
struct ConstantDraws {
    normals: StandardDraws,
    uniforms: Vec<f64>,
}

impl ConstantDraws {
    fn new(cfg: &EBConfig, k: usize) -> Self {
        let normals = StandardDraws::new(cfg.seed, &[0xEB, 1], cfg.d_draws, k);
        let uniforms = match cfg.d_method {
            NormalizerMethod::Sequential => (0..normals.len()).flat_map(|i| normals.row(i).to_vec()).map(normal::cdf).collect(),
            NormalizerMethod::Counting => Vec::new(),
        };
        ConstantDraws { normals, uniforms }
    }

    fn normalizer(&self, mean: &Vector, cov: &Matrix, truncated: &[usize], method: NormalizerMethod) -> Result<Normalizer> {
        match method {
            NormalizerMethod::Sequential if !truncated.is_empty() => sequential_normalizer(
                &linalg::select_entries(mean, truncated),
                &linalg::select_block(cov, truncated, truncated),
                &self.uniforms,
            ),
            _ => truncation_constant(mean, cov, truncated, method, &self.normals),
        }
    }
}

fn log_marginal_with(problem: &EstimationProblem, nu: f64, truncated: &[usize], cfg: &EBConfig, draws: &ConstantDraws) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(IcseError::Config("ν must be positive".into()));
    }
    let (theta_bar, v_bar, q) = posterior_moments(problem, nu)?;
    let n = problem.n() as f64;
    let m = problem.dim() as f64;
    let y = problem.response();
    let d = draws.normalizer(&theta_bar, &v_bar, truncated, cfg.d_method)?;
    let log_det_v = -2.0 * linalg::cholesky(&q)?.l().diagonal().map(f64::ln).sum();
    let fit_term = y.norm_squared() - theta_bar.dot(&(&q * &theta_bar));
    Ok(-0.5 * n * (2.0 * std::f64::consts::PI).ln() + 0.5 * m * nu.ln()
        - truncated.len() as f64 * normal::cdf(0.0).ln()
        + 0.5 * log_det_v
        + d.log_value
        - 0.5 * fit_term)
}

/// `log p(Y | ν)` under the truncated normal prior and unit error variance.
pub fn eb_log_marginal(problem: &EstimationProblem, nu: f64, cfg: &EBConfig) -> Result<f64> {
    let truncated = cfg.truncated_set(problem.dim())?;
    let draws = ConstantDraws::new(cfg, truncated.len());
    log_marginal_with(problem, nu, &truncated, cfg, &draws)
}

/// `E[θ | θ_T ≥ 0]` for `θ ~ N(mean, cov)` by systematic-scan Gibbs sampling,
/// with batch-means standard errors.
pub fn truncated_mvn_mean(mean: &Vector, cov: &Matrix, cfg: &EBConfig) -> Result<(Vector, Vector)> {
    let m = mean.len();
    let truncated = cfg.truncated_set(m)?;
    let precision = linalg::spd_inverse(cov)
        .map_err(|_| IcseError::Covariance("covariance is not positive definite".into()))?;
    let mut is_trunc = vec![false; m];
    for &j in &truncated {
        is_trunc[j] = true;
    }
    let mut rng = rng::stream(cfg.seed, &[0xEB, 2]);
    gibbs(mean, &precision, &is_trunc, cfg.gibbs_burn, cfg.gibbs_draws, &mut rng)
}

fn open_uniform(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.random::<u64>() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

fn gibbs(
    mean: &Vector,
    precision: &Matrix,
    is_trunc: &[bool],
    burn: usize,
    keep: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vector, Vector)> {
    let m = mean.len();
    let mut theta = Vector::from_fn(m, |j, _| if is_trunc[j] { mean[j].max(0.0) } else { mean[j] });
    let sd: Vec<f64> = (0..m).map(|j| 1.0 / precision[(j, j)].sqrt()).collect();
    let batches = 20.min(keep);
    let per_batch = keep / batches;
    let mut batch_sums = vec![Vector::zeros(m); batches];
    let mut total = Vector::zeros(m);
    for it in 0..burn + keep {
        for j in 0..m {
            let mut acc = 0.0;
            for k in 0..m {
                if k != j {
                    acc += precision[(j, k)] * (theta[k] - mean[k]);
                }
            }
            let cond_mean = mean[j] - acc / precision[(j, j)];
            let u = open_uniform(rng);
            theta[j] = if is_trunc[j] {
                let lower = -cond_mean / sd[j];
                cond_mean + sd[j] * truncated_above(lower, normal::sf(lower), u)
            } else {
                cond_mean + sd[j] * normal::quantile(u)
            };
            if !theta[j].is_finite() {
                return Err(IcseError::numerical("Gibbs sampler produced a non-finite state"));
            }
            if is_trunc[j] && theta[j] < 0.0 {
                theta[j] = 0.0;
            }
        }
        if it >= burn {
            let k = it - burn;
            total += &theta;
            let b = k / per_batch;
            if b < batches {
                batch_sums[b] += &theta;
            }
        }
    }
    let post_mean = total / keep as f64;
    let batch_means: Vec<Vector> = batch_sums.into_iter().map(|s| s / per_batch as f64).collect();
    let bm_avg = batch_means.iter().fold(Vector::zeros(m), |a, b| a + b) / batches as f64;
    let se = Vector::from_fn(m, |j, _| {
        let var = batch_means.iter().map(|b| (b[j] - bm_avg[j]).powi(2)).sum::<f64>() / (batches - 1).max(1) as f64;
        (var / batches as f64).sqrt()
    });
    Ok((post_mean, se))
}

#[derive(Debug, Clone)]
pub struct EBFit {
    pub theta: Vector,
    pub nu: f64,
    pub log_marginal: f64,
    pub posterior: EBPosterior,
}

/// Empirical Bayes estimate: `ν̂` maximizes the marginal likelihood over a
/// log grid, refined by golden-section search; the estimate is the
/// posterior mean.
pub fn eb_fit(problem: &EstimationProblem, cfg: &EBConfig) -> Result<EBFit> {
    cfg.validate()?;
    let m = problem.dim();
    let truncated = cfg.truncated_set(m)?;
    let draws = ConstantDraws::new(cfg, truncated.len());
    let objective = |log_nu: f64| -> Result<f64> {
        let v = log_marginal_with(problem, log_nu.exp(), &truncated, cfg, &draws)?;
        Ok(if v.is_nan() { f64::NEG_INFINITY } else { v })
    };
    let grid: Vec<f64> = cfg.nu_grid().iter().map(|v| v.ln()).collect();
    let values: Vec<f64> = grid.iter().map(|&g| objective(g)).collect::<Result<_>>()?;
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    let (mut lo, mut hi) = (grid[best.saturating_sub(1)], grid[(best + 1).min(grid.len() - 1)]);
    let (mut best_x, mut best_v) = (grid[best], values[best]);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = objective(x1)?;
    let mut f2 = objective(x2)?;
    // relative tolerance on ν is an absolute tolerance on log ν
    while hi - lo > 1e-4 {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = objective(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = objective(x2)?;
        }
    }
    for (x, v) in [(x1, f1), (x2, f2)] {
        if v > best_v {
            best_x = x;
            best_v = v;
        }
    }
    let nu = best_x.exp();
    let (theta_bar, v_bar, q) = posterior_moments(problem, nu)?;
    let d = draws.normalizer(&theta_bar, &v_bar, &truncated, cfg.d_method)?;
    let mut is_trunc = vec![false; m];
    for &j in &truncated {
        is_trunc[j] = true;
    }
    let mut rng = rng::stream(cfg.seed, &[0xEB, 2]);
    let (posterior_mean, posterior_se) = gibbs(&theta_bar, &q, &is_trunc, cfg.gibbs_burn, cfg.gibbs_draws, &mut rng)?;
    Ok(EBFit {
        theta: posterior_mean.clone(),
        nu,
        log_marginal: best_v,
        posterior: EBPosterior {
            nu,
            theta_bar,
            v_bar,
            d_const: d.value,
            d_se: d.std_error,
            posterior_mean,
            posterior_se,
        },
    })
}
