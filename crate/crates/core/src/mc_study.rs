//! Monte Carlo comparison of the unrestricted, restricted, James-Stein,
//! Empirical Bayes and shrinkage estimators in a linear regression with
//! sign restrictions on one block of coefficients and zero restrictions on
//! the other.

use std::fmt;
use std::io::Write;
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::comparators::{self, EBConfig};
use crate::error::{IcseError, Result};
use crate::estimators::{self, LinearConstraint};
use crate::linalg::{self, Matrix, Vector};
use crate::model::{self, EstimationProblem, ScoreVariance};
use crate::rng;
use crate::shrinkage::{self, IcseConfig};

/// Regressor correlation off the diagonal.
pub const REGRESSOR_CORRELATION: f64 = 0.5;
/// Largest tolerated share of failed replications.
pub const MAX_FAILURE_RATE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    Unrestricted,
    Restricted,
    JamesStein,
    EB,
    ICSE,
}

impl Estimator {
    pub const ALL: [Estimator; 5] =
        [Estimator::Unrestricted, Estimator::Restricted, Estimator::JamesStein, Estimator::EB, Estimator::ICSE];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Unrestricted => "unrestricted",
            Estimator::Restricted => "restricted",
            Estimator::JamesStein => "james_stein",
            Estimator::EB => "eb",
            Estimator::ICSE => "icse",
        }
    }

    pub fn parse(s: &str) -> Option<Estimator> {
        Estimator::ALL.into_iter().find(|e| e.name() == s.trim().to_ascii_lowercase())
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `points` equispaced values from `lo` to `hi`.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone)]
pub struct MCConfig {
    pub n: usize,
    pub k1: usize,
    pub k2: usize,
    pub b_grid: Vec<f64>,
    pub c_equal: f64,
    pub replications: usize,
    pub seed: u64,
    pub estimators: Vec<Estimator>,
    pub variance: ScoreVariance,
    pub orthant_draws: usize,
    /// seed is replaced per replication; `truncated = None` means the
    /// sign-restricted block
    pub eb: EBConfig,
}

impl Default for MCConfig {
    fn default() -> Self {
        MCConfig {
            n: 200,
            k1: 5,
            k2: 3,
            b_grid: linspace(-0.5, 0.5, 21),
            c_equal: 0.0,
            replications: 2000,
            seed: 0,
            estimators: Estimator::ALL.to_vec(),
            variance: ScoreVariance::Robust,
            orthant_draws: crate::orthant::DEFAULT_DRAWS,
            eb: EBConfig::default(),
        }
    }
}

impl MCConfig {
    pub fn dim(&self) -> usize {
        self.k1 + self.k2
    }

    pub fn validate(&self) -> Result<()> {
        if self.k1 < 3 {
            return Err(IcseError::Config("k1 must be at least 3".into()));
        }
        if self.replications < 100 {
            return Err(IcseError::Config("at least 100 replications are required".into()));
        }
        if self.n <= self.dim() {
            return Err(IcseError::Config("n must exceed k1 + k2".into()));
        }
        if self.b_grid.iter().any(|b| !b.is_finite()) || !self.c_equal.is_finite() {
            return Err(IcseError::Config("b grid and c must be finite".into()));
        }
        self.eb.validate()
    }

    /// `θ₀ = (1, 1, 1, b, …, b | c, …, c)`
    pub fn theta0(&self, b: f64) -> Vector {
        Vector::from_fn(self.dim(), |j, _| match j {
            0..=2 => 1.0,
            j if j < self.k1 => b,
            _ => self.c_equal,
        })
    }

    /// `θ₁ ≥ 0` as inequality rows, then `θ₂ = 0` as equality rows.
    pub fn constraints(&self) -> Result<LinearConstraint> {
        let nonneg: Vec<usize> = (0..self.k1).collect();
        let zero: Vec<usize> = (self.k1..self.dim()).collect();
        LinearConstraint::sign_restrictions(self.dim(), &nonneg, &zero)
    }
}

/// Equicorrelated regressor covariance.
pub fn regressor_covariance(m: usize) -> Matrix {
    Matrix::from_fn(m, m, |i, j| if i == j { 1.0 } else { REGRESSOR_CORRELATION })
}

/// Data set for grid point `b_index` and replication `rep`; a pure
/// function of `(seed, b_index, rep)` and the design settings.
pub fn generate_dgp(cfg: &MCConfig, b_index: usize, rep: usize) -> Result<(EstimationProblem, Vector)> {
    let b = *cfg
        .b_grid
        .get(b_index)
        .ok_or_else(|| IcseError::Config(format!("grid index {b_index} out of range")))?;
    let m = cfg.dim();
    let theta0 = cfg.theta0(b);
    let l = linalg::cholesky(&regressor_covariance(m))?.l();
    let mut rng = rng::stream(cfg.seed, &[0xD6, b_index as u64, rep as u64]);
    let mut x = Matrix::zeros(cfg.n, m);
    let mut z = Vector::zeros(m);
    for i in 0..cfg.n {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let row = &l * &z;
        for j in 0..m {
            x[(i, j)] = row[j];
        }
    }
    let eps = Vector::from_fn(cfg.n, |_, _| StandardNormal.sample(&mut rng));
    let y = &x * &theta0 + eps;
    Ok((model::build_linear_problem(x, y)?, theta0))
}

/// Squared errors of the selected estimators for one replication.
/// The unrestricted error always comes first.
fn replication_losses(cfg: &MCConfig, cons: &LinearConstraint, b_index: usize, rep: usize) -> Result<Vec<f64>> {
    let (problem, theta0) = generate_dgp(cfg, b_index, rep)?;
    let fit = estimators::fit_unrestricted(&problem, cfg.variance)?;
    let sq = |v: &Vector| (v - &theta0).norm_squared();
    let mut out = vec![sq(&fit.theta)];
    let rep_tags = [b_index as u64, rep as u64];
    for &est in &cfg.estimators {
        let loss = match est {
            Estimator::Unrestricted => sq(&fit.theta),
            Estimator::Restricted => sq(&estimators::restrict_fit(&fit, cons)?.0.theta),
            Estimator::JamesStein => sq(&comparators::james_stein(&fit)?),
            Estimator::EB => {
                let eb = EBConfig {
                    seed: rng::derive_key(cfg.seed, &[0xEB, rep_tags[0], rep_tags[1]]),
                    truncated: Some(cfg.eb.truncated.clone().unwrap_or_else(|| (0..cfg.k1).collect())),
                    ..cfg.eb.clone()
                };
                sq(&comparators::eb_fit(&problem, &eb)?.theta)
            }
            Estimator::ICSE => {
                let icse = IcseConfig {
                    variance: cfg.variance,
                    orthant_draws: cfg.orthant_draws,
                    seed: rng::derive_key(cfg.seed, &[0x1C5E, rep_tags[0], rep_tags[1]]),
                    ..IcseConfig::default()
                };
                sq(&shrinkage::fit_icse(&problem, cons, &icse)?.combined)
            }
        };
        out.push(loss);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MCRow {
    pub b: f64,
    pub estimator: Estimator,
    pub raw_mse: f64,
    pub normalized_mse: f64,
    /// standard error of `normalized_mse` (delta method on the paired ratio)
    pub mc_se: f64,
}

#[derive(Debug, Clone)]
pub struct MCResult {
    pub config: MCConfig,
    /// one row per (grid point, estimator), grid-major
    pub rows: Vec<MCRow>,
    /// failed replications per grid point
    pub failures: Vec<usize>,
}

impl MCResult {
    pub fn get(&self, b_index: usize, est: Estimator) -> Option<&MCRow> {
        let k = self.config.estimators.len();
        self.rows[b_index * k..(b_index + 1) * k].iter().find(|r| r.estimator == est)
    }
}

fn summarize(b: f64, estimators: &[Estimator], losses: &[Vec<f64>]) -> Vec<MCRow> {
    let n = losses.len() as f64;
    let base = losses.iter().map(|l| l[0]).sum::<f64>() / n;
    estimators
        .iter()
        .enumerate()
        .map(|(k, &est)| {
            let raw = losses.iter().map(|l| l[k + 1]).sum::<f64>() / n;
            if est == Estimator::Unrestricted {
                return MCRow { b, estimator: est, raw_mse: raw, normalized_mse: 1.0, mc_se: 0.0 };
            }
            let ratio = raw / base;
            let var = losses.iter().map(|l| (l[k + 1] - ratio * l[0]).powi(2)).sum::<f64>() / (n - 1.0);
            MCRow { b, estimator: est, raw_mse: raw, normalized_mse: ratio, mc_se: (var / n).sqrt() / base }
        })
        .collect()
}

/// Runs every replication at every grid point. Replications run in
/// parallel; sums are taken in replication order.
pub fn run_study(cfg: &MCConfig) -> Result<MCResult> {
    cfg.validate()?;
    let cons = cfg.constraints()?;
    let mut rows = Vec::with_capacity(cfg.b_grid.len() * cfg.estimators.len());
    let mut failures = Vec::with_capacity(cfg.b_grid.len());
    for (bi, &b) in cfg.b_grid.iter().enumerate() {
        let outcomes: Vec<Result<Vec<f64>>> =
            (0..cfg.replications).into_par_iter().map(|rep| replication_losses(cfg, &cons, bi, rep)).collect();
        let mut ok = Vec::with_capacity(cfg.replications);
        let mut failed = 0;
        let mut first_error = None;
        for o in outcomes {
            match o {
                Ok(l) if l.iter().all(|v| v.is_finite()) => ok.push(l),
                Ok(_) => failed += 1,
                Err(e) => {
                    failed += 1;
                    first_error.get_or_insert(e);
                }
            }
        }
        if failed as f64 >= MAX_FAILURE_RATE * cfg.replications as f64 {
            let cause = first_error.map(|e| format!(": {e}")).unwrap_or_default();
            return Err(IcseError::Study(format!(
                "{failed} of {} replications failed at b = {b}{cause}",
                cfg.replications
            )));
        }
        rows.extend(summarize(b, &cfg.estimators, &ok));
        failures.push(failed);
    }
    Ok(MCResult { config: cfg.clone(), rows, failures })
}

/// Formats with 10 significant digits, trailing zeros dropped.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let exp = x.abs().log10().floor() as i32;
    let s = if (-5..15).contains(&exp) {
        format!("{:.*}", (9 - exp).max(0) as usize, x)
    } else {
        format!("{:.9e}", x)
    };
    trim_zeros(&s)
}

fn trim_zeros(s: &str) -> String {
    let (mant, exp) = match s.find('e') {
        Some(i) => (&s[..i], &s[i..]),
        None => (s, ""),
    };
    let mant = if mant.contains('.') { mant.trim_end_matches('0').trim_end_matches('.') } else { mant };
    let mant = if mant == "-0" { "0" } else { mant };
    format!("{mant}{exp}")
}

pub const CSV_HEADER: &str = "b,estimator,raw_mse,normalized_mse,mc_se,n,k1,k2,c,replications,seed";

/// Comment line heading every generated table.
pub fn comment_header(seed: u64) -> String {
    format!("# icse-kit {} seed={seed}", env!("CARGO_PKG_VERSION"))
}

pub fn write_table<W: Write>(res: &MCResult, mut out: W) -> std::io::Result<()> {
    let c = &res.config;
    writeln!(out, "{}", comment_header(c.seed))?;
    writeln!(out, "{CSV_HEADER}")?;
    for r in &res.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            format_sig(r.b),
            r.estimator,
            format_sig(r.raw_mse),
            format_sig(r.normalized_mse),
            format_sig(r.mc_se),
            c.n,
            c.k1,
            c.k2,
            format_sig(c.c_equal),
            c.replications,
            c.seed
        )?;
    }
    Ok(())
}

pub fn emit_tables(res: &MCResult, path: &Path) -> Result<()> {
    let io = |e: std::io::Error| IcseError::Study(format!("{}: {e}", path.display()));
    let mut buf = Vec::new();
    write_table(res, &mut buf).map_err(io)?;
    std::fs::write(path, buf).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(estimators: Vec<Estimator>) -> MCConfig {
        MCConfig {
            n: 100,
            b_grid: vec![-0.5, 0.5],
            replications: 100,
            seed: 11,
            estimators,
            orthant_draws: 5000,
            eb: EBConfig { gibbs_burn: 200, gibbs_draws: 1000, d_draws: 500, ..EBConfig::default() },
            ..MCConfig::default()
        }
    }

    #[test]
    fn theta0_assembly() {
        let cfg = MCConfig { b_grid: vec![0.0], ..MCConfig::default() };
        assert_eq!(cfg.theta0(0.0).as_slice(), &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let cfg = MCConfig { c_equal: 0.2, ..MCConfig::default() };
        assert_eq!(cfg.theta0(-0.5).as_slice(), &[1.0, 1.0, 1.0, -0.5, -0.5, 0.2, 0.2, 0.2]);
    }

    #[test]
    fn dgp_is_deterministic() {
        let cfg = small(vec![]);
        let (a, _) = generate_dgp(&cfg, 1, 7).unwrap();
        let (b, _) = generate_dgp(&cfg, 1, 7).unwrap();
        let (c, _) = generate_dgp(&cfg, 1, 8).unwrap();
        assert_eq!(a.design(), b.design());
        assert_eq!(a.response(), b.response());
        assert_ne!(a.response(), c.response());
    }

    #[test]
    fn dgp_regressor_covariance() {
        let cfg = MCConfig { n: 100_000, k1: 3, k2: 1, b_grid: vec![0.0], ..MCConfig::default() };
        let (p, _) = generate_dgp(&cfg, 0, 0).unwrap();
        let x = p.design();
        let n = cfg.n as f64;
        let sigma = regressor_covariance(4);
        for a in 0..4 {
            for b in 0..4 {
                let prod: Vec<f64> = (0..cfg.n).map(|i| x[(i, a)] * x[(i, b)]).collect();
                let mean = prod.iter().sum::<f64>() / n;
                let sd = (prod.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
                assert!((mean - sigma[(a, b)]).abs() < 3.0 * sd / n.sqrt() + 1e-3, "({a},{b}) {mean}");
            }
        }
    }

    #[test]
    fn validation() {
        assert!(MCConfig { k1: 2, ..MCConfig::default() }.validate().is_err());
        assert!(MCConfig { replications: 99, ..MCConfig::default() }.validate().is_err());
        assert!(MCConfig::default().validate().is_ok());
    }

    #[test]
    fn formatting() {
        assert_eq!(format_sig(0.30000000000000004), "0.3");
        assert_eq!(format_sig(-0.5), "-0.5");
        assert_eq!(format_sig(1.0), "1");
        assert_eq!(format_sig(123.456789012345), "123.456789");
        assert_eq!(format_sig(1.5e-7), "1.5e-7");
        assert_eq!(format_sig(0.0), "0");
    }

    #[test]
    fn empty_estimator_set_gives_header_only() {
        let res = run_study(&small(vec![])).unwrap();
        let mut buf = Vec::new();
        write_table(&res, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().nth(1).unwrap(), CSV_HEADER);
    }

    #[test]
    fn cheap_estimators_regime() {
        let cfg = small(vec![Estimator::Unrestricted, Estimator::Restricted, Estimator::JamesStein]);
        let res = run_study(&cfg).unwrap();
        assert_eq!(res.rows.len(), 6);
        assert!(res.failures.iter().all(|&f| f == 0));
        for bi in 0..2 {
            assert_eq!(res.get(bi, Estimator::Unrestricted).unwrap().normalized_mse, 1.0);
        }
        let violated = res.get(0, Estimator::Restricted).unwrap().normalized_mse;
        let satisfied = res.get(1, Estimator::Restricted).unwrap().normalized_mse;
        assert!(violated > 1.0 && satisfied < 1.0 && violated > satisfied);
        let again = run_study(&cfg).unwrap();
        assert_eq!(res.rows, again.rows);
    }

    #[test]
    fn all_estimators_finite() {
        let mut cfg = small(Estimator::ALL.to_vec());
        cfg.b_grid = vec![0.0];
        let res = run_study(&cfg).unwrap();
        for r in &res.rows {
            assert!(r.raw_mse.is_finite() && r.normalized_mse.is_finite() && r.mc_se.is_finite(), "{r:?}");
        }
        assert!(res.get(0, Estimator::ICSE).unwrap().normalized_mse <= 1.05);
    }
}
