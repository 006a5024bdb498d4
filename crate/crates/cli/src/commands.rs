//! One function per subcommand; each returns the bytes of its output CSV.

use icse_core::asymptotics::{self, LimitConfig};
use icse_core::comparators::{self, EBConfig};
use icse_core::estimators::LinearConstraint;
use icse_core::mc_study::{self, Estimator, MCConfig};
use icse_core::orthant;
use icse_core::shrinkage::{self, BindingPattern, IcseConfig};
use icse_core::{IcseError, LossSpec, Matrix, Vector};

use crate::config::{self, EbSection, IndexSpec, FitSection, LimitSection, OrthantSection, StudySection};
use crate::data;
use crate::error::{CliError, CliResult};
use crate::report::Report;

/// Inputs that come straight from the config file: a malformed matrix there
/// is a configuration problem, not a data problem.
fn from_config(e: IcseError) -> CliError {
    match e {
        IcseError::Shape(m) | IcseError::Rank(m) | IcseError::Covariance(m) => CliError::Config(m),
        other => other.into(),
    }
}

fn matrix(rows: &[Vec<f64>], what: &str) -> CliResult<Matrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(CliError::config(format!("`{what}` must be a non-empty rectangular array of rows")));
    }
    Ok(Matrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn fit_constraints(sec: &FitSection, dim: usize) -> CliResult<LinearConstraint> {
    let shorthand = sec.sign_restrictions.is_some() || sec.zero_restrictions.is_some();
    match (&sec.constraints, shorthand) {
        (Some(_), true) => Err(CliError::config(
            "give either `constraints` or the sign/zero restriction shorthand, not both",
        )),
        (Some(path), false) => data::read_constraints(path, dim),
        (None, true) => {
            let sign = sec.sign_restrictions.as_ref().map_or(Ok(Vec::new()), IndexSpec::indices)?;
            let zero = sec.zero_restrictions.as_ref().map_or(Ok(Vec::new()), IndexSpec::indices)?;
            if sign.iter().any(|j| zero.contains(j)) {
                return Err(CliError::config("a coordinate is both sign and zero restricted"));
            }
            LinearConstraint::sign_restrictions(dim, &sign, &zero).map_err(from_config)
        }
        (None, false) => Err(CliError::config("no restrictions given for `fit`")),
    }
}

pub fn fit(sec: &FitSection, seed: u64) -> CliResult<Vec<u8>> {
    let path = sec.data.as_ref().ok_or_else(|| CliError::config("`fit.data` is required"))?;
    let problem = data::read_regression(path)?;
    let cons = fit_constraints(sec, problem.dim())?;
    let cfg = IcseConfig {
        loss: sec.loss.spec(),
        variance: sec.variance.variance(),
        orthant_draws: sec.orthant_draws,
        seed,
        prune_below: sec.prune_below,
    };
    let res = shrinkage::fit_icse(&problem, &cons, &cfg)?;

    let mut out = Report::new(seed);
    out.scalar("summary", "n", problem.n() as f64);
    out.scalar("summary", "weight", res.weight);
    out.scalar("summary", "tau_star", res.tau_star);
    out.scalar("summary", "scaled_loss", res.scaled_loss);
    out.scalar("summary", "degenerate_gamma", f64::from(u8::from(res.degenerate_gamma)));
    out.vector("estimate", "theta_hat", &res.theta_hat);
    out.vector("estimate", "theta_tilde", &res.theta_tilde);
    out.vector("estimate", "theta_star", &res.combined);
    out.vector("constraint", "c_hat", &res.c_hat);
    out.vector("constraint", "multiplier", &res.kt.mu);
    out.vector("constraint", "active", &Vector::from_fn(res.c_hat.len(), |i, _| {
        f64::from(u8::from(res.kt.active.contains(&i)))
    }));
    for s in &res.pattern_table {
        let label = s.pattern.label();
        let mut row = |name: &str, v: f64| out.value("pattern", name, &label, v);
        row("count", s.count as f64);
        row("included", f64::from(u8::from(s.included)));
        row("probability", s.probability);
        row("probability_se", s.probability_se);
        row("expected_loss", s.expected_loss);
        row("inverse_loss", s.inverse_loss);
        row("gamma", s.gamma);
        row("a_trace", s.a_trace);
        row("a_phimax", s.a_phimax);
        for (k, h) in s.h_offset.iter().enumerate() {
            row(&format!("h_offset_{}", k + 1), *h);
        }
    }
    Ok(out.finish())
}

pub fn mc_study(sec: &StudySection, seed: u64) -> CliResult<Vec<u8>> {
    let b_grid = match &sec.b_grid {
        Some(g) => g.clone(),
        None => {
            if sec.b_points == 0 {
                return Err(CliError::config("`b_points` must be positive"));
            }
            mc_study::linspace(sec.b_min, sec.b_max, sec.b_points)
        }
    };
    if b_grid.is_empty() {
        return Err(CliError::config("the b grid is empty"));
    }
    let estimators = match &sec.estimators {
        None => Estimator::ALL.to_vec(),
        Some(names) => names
            .iter()
            .map(|n| Estimator::parse(n).ok_or_else(|| CliError::config(format!("unknown estimator `{n}`"))))
            .collect::<CliResult<_>>()?,
    };
    let truncated = sec.eb_truncated.as_ref().map(IndexSpec::indices).transpose()?;
    let cfg = MCConfig {
        n: sec.n,
        k1: sec.k1,
        k2: sec.k2,
        b_grid,
        c_equal: sec.c,
        replications: sec.replications,
        seed,
        estimators,
        variance: sec.variance.variance(),
        orthant_draws: sec.orthant_draws,
        eb: EBConfig {
            nu_min: sec.eb_nu_min,
            nu_max: sec.eb_nu_max,
            grid_points: sec.eb_grid_points,
            gibbs_burn: sec.eb_gibbs_burn,
            gibbs_draws: sec.eb_gibbs_draws,
            d_draws: sec.eb_d_draws,
            d_method: config::normalizer(sec.eb_d_method),
            truncated,
            seed,
        },
    };
    cfg.validate()?;
    let res = mc_study::run_study(&cfg)?;
    let mut buf = Vec::new();
    mc_study::write_table(&res, &mut buf).map_err(|e| CliError::Numerical(e.to_string()))?;
    Ok(buf)
}

fn limit_config(sec: &LimitSection, seed: u64) -> CliResult<LimitConfig> {
    let j = match (&sec.j, sec.m) {
        (Some(rows), _) => matrix(rows, "j")?,
        (None, Some(m)) if m > 0 => Matrix::from_fn(m, m, |a, b| if a == b { 1.0 } else { sec.rho }),
        _ => return Err(CliError::config("give `j` or `m` (with optional `rho`) for limit-sim")),
    };
    let m = j.nrows();
    let v = match &sec.v {
        Some(rows) => matrix(rows, "v")?,
        None => j.clone(),
    };
    let r = match (&sec.r, &sec.sign_restrictions) {
        (Some(_), Some(_)) => return Err(CliError::config("give either `r` or `sign_restrictions`, not both")),
        (Some(rows), None) => matrix(rows, "r")?,
        (None, Some(spec)) => {
            let idx = spec.indices()?;
            if idx.iter().any(|&k| k >= m) {
                return Err(CliError::config("sign restriction out of range"));
            }
            Matrix::from_fn(idx.len(), m, |i, k| if idx[i] == k { 1.0 } else { 0.0 })
        }
        (None, None) => return Err(CliError::config("give `r` or `sign_restrictions` for limit-sim")),
    };
    if r.nrows() == 0 {
        return Err(CliError::config("at least one restriction is required"));
    }
    let p = r.nrows();
    let c = if sec.c.is_empty() { Vector::zeros(p) } else { Vector::from_row_slice(&sec.c) };
    let mut cfg = LimitConfig::canonical(j, v, r, c, sec.draws, seed).map_err(from_config)?;
    if let Some(mask) = &sec.equality {
        cfg.equality_mask = mask.clone();
    }
    if matches!(sec.loss.spec(), LossSpec::Identity) {
        cfg.w = Matrix::identity(m, m);
    }
    cfg.zeta = sec.zeta;
    cfg.validate().map_err(from_config)?;
    cfg.constraints().map_err(from_config)?;
    Ok(cfg)
}

pub fn limit_sim(sec: &LimitSection, seed: u64) -> CliResult<Vec<u8>> {
    let cfg = limit_config(sec, seed)?;
    let n_ineq = cfg.equality_mask.iter().filter(|e| !**e).count();
    let draws = asymptotics::draw_limit(&cfg)?;
    let stats = asymptotics::simulation_truth(&cfg, &draws)?;
    let tau_star = asymptotics::optimal_tau(&stats);
    let binding = asymptotics::expected_binding_count(&stats);
    let tr = (&cfg.w * cfg.omega()?).trace();
    let summaries = asymptotics::pattern_summaries(&draws, n_ineq);

    let closed = if cfg.j.nrows() == 2 && n_ineq == 2 && cfg.r == Matrix::identity(2, 2) {
        Some(asymptotics::closed_form_2d(&cfg.j, &cfg.v, &cfg.localizer)?)
    } else {
        None
    };

    let mut out = Report::new(seed);
    out.scalar("summary", "draws", draws.len() as f64);
    out.scalar("summary", "tr_w_omega", tr);
    out.scalar("summary", "tau_star", tau_star);
    out.scalar("summary", "expected_binding_count", binding);
    for (k, s) in summaries.iter().enumerate() {
        let label = BindingPattern::from_mask(s.mask).label();
        let mut row = |name: &str, v: f64| out.value("pattern", name, &label, v);
        row("frequency", s.frequency);
        row("frequency_se", s.frequency_se);
        row("mean_xi", s.mean_xi);
        row("mean_inverse_xi", s.mean_inverse_xi);
        if let Some(st) = stats.get(k) {
            row("gamma", st.gamma);
        }
        for (d, (m, se)) in s.mean_lambda.iter().zip(&s.mean_lambda_se).enumerate() {
            row(&format!("mean_lambda_{}", d + 1), *m);
            row(&format!("mean_lambda_se_{}", d + 1), *se);
        }
        if let Some(law) = &closed {
            row("closed_form_probability", law[k].probability);
            row("closed_form_mean_lambda_1", law[k].mean_lambda[0]);
            row("closed_form_mean_lambda_2", law[k].mean_lambda[1]);
        }
    }

    let grid = match &sec.tau_grid {
        Some(g) => {
            if g.iter().any(|t| !(*t >= 0.0)) {
                return Err(CliError::config("`tau_grid` values must be non-negative"));
            }
            g.clone()
        }
        None => {
            let top = 2.0 * tau_star.max(0.5);
            let mut g = mc_study::linspace(0.0, top, 11);
            if tau_star > 0.0 {
                g.push(tau_star);
            }
            g.sort_by(f64::total_cmp);
            g.dedup();
            g
        }
    };
    let mut at_star = None;
    for &tau in &grid {
        let risk = asymptotics::estimate_risk(&draws.with_tau(tau), &cfg.w, cfg.zeta, Some(tr));
        let bound = asymptotics::risk_bound(tau, &stats, tr);
        let index = tau.to_string();
        for (name, v) in [
            ("risk", risk.risk),
            ("risk_se", risk.se),
            ("risk_cv", risk.risk_cv),
            ("risk_cv_se", risk.se_cv),
            ("trimmed_risk", risk.trimmed_risk),
            ("trimmed_risk_se", risk.trimmed_se),
            ("bound", bound),
        ] {
            out.value("tau", name, &index, v);
        }
        if tau == tau_star {
            at_star = Some(risk);
        }
    }
    let at_star = match at_star {
        Some(r) => r,
        None => asymptotics::estimate_risk(&draws.with_tau(tau_star.max(0.0)), &cfg.w, cfg.zeta, Some(tr)),
    };
    let verdict = if tau_star <= 0.0 {
        format!("dominance: not applicable (optimal shrinkage {tau_star} is not positive)")
    } else if at_star.risk_cv + 3.0 * at_star.se_cv < tr {
        format!(
            "dominance: holds at tau={tau_star} (risk {} +- {} below {tr} by more than 3 SE)",
            at_star.risk_cv, at_star.se_cv
        )
    } else {
        format!(
            "dominance: not established at tau={tau_star} (risk {} +- {} vs {tr})",
            at_star.risk_cv, at_star.se_cv
        )
    };
    out.note(verdict);
    Ok(out.finish())
}

pub fn orthant(sec: &OrthantSection, seed: u64) -> CliResult<Vec<u8>> {
    let p = sec.mean.len();
    if p == 0 {
        return Err(CliError::config("`orthant.mean` is required"));
    }
    let cov = matrix(&sec.covariance, "covariance")?;
    let mean = Vector::from_row_slice(&sec.mean);
    let sets: Vec<Vec<usize>> = match &sec.positive_sets {
        Some(specs) => specs.iter().map(IndexSpec::indices).collect::<CliResult<_>>()?,
        None if p <= 16 => (0..1u64 << p).map(|m| BindingPattern::from_mask(m).indices().to_vec()).collect(),
        None => return Err(CliError::config("list `positive_sets` explicitly above 16 dimensions")),
    };
    let est = orthant::all_pattern_probabilities(&mean, &cov, &sets, sec.draws, seed).map_err(from_config)?;
    let mut out = Report::new(seed);
    out.scalar("summary", "draws", sec.draws as f64);
    for (set, e) in sets.iter().zip(&est) {
        let label = BindingPattern::new(set.clone()).label();
        out.value("probability", "estimate", &label, e.estimate);
        out.value("probability", "std_error", &label, e.std_error);
    }
    Ok(out.finish())
}

pub fn eb(sec: &EbSection, seed: u64) -> CliResult<Vec<u8>> {
    let path = sec.data.as_ref().ok_or_else(|| CliError::config("`eb.data` is required"))?;
    let problem = data::read_regression(path)?;
    let cfg = EBConfig {
        nu_min: sec.nu_min,
        nu_max: sec.nu_max,
        grid_points: sec.grid_points,
        gibbs_burn: sec.gibbs_burn,
        gibbs_draws: sec.gibbs_draws,
        d_draws: sec.d_draws,
        d_method: config::normalizer(sec.d_method),
        truncated: sec.truncated.as_ref().map(IndexSpec::indices).transpose()?,
        seed,
    };
    let res = comparators::eb_fit(&problem, &cfg)?;
    let mut out = Report::new(seed);
    out.scalar("summary", "nu", res.nu);
    out.scalar("summary", "log_marginal", res.log_marginal);
    out.scalar("summary", "truncation_constant", res.posterior.d_const);
    out.scalar("summary", "truncation_constant_se", res.posterior.d_se);
    out.vector("estimate", "theta", &res.theta);
    out.vector("estimate", "posterior_se", &res.posterior.posterior_se);
    out.vector("estimate", "theta_bar", &res.posterior.theta_bar);
    let sd = res.posterior.v_bar.diagonal().map(f64::sqrt);
    out.vector("estimate", "theta_bar_sd", &sd);
    Ok(out.finish())
}
