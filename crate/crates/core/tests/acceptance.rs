//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use icse_core::asymptotics::{self, LimitConfig};
use icse_core::comparators::{self, EBConfig, NormalizerMethod};
use icse_core::estimators::LinearConstraint;
use icse_core::mc_study::{self, Estimator, MCConfig};
use icse_core::orthant::{self, OrthantQuery, StandardDraws};
use icse_core::qp::{self, LinearConstraints, QuadraticProblem};
use icse_core::shrinkage::{self, IcseConfig};
use icse_core::{build_linear_problem, normal, rng, Matrix, Vector};
use rand::Rng;
use rand_distr::StandardNormal;

struct Outcome {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(id: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, pass, detail }
}

fn gaussian_matrix(rng: &mut impl Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn random_spd(rng: &mut impl Rng, m: usize) -> Matrix {
    let a = gaussian_matrix(rng, m, m);
    &a * a.transpose() + Matrix::identity(m, m) * 0.2
}

fn qp_oracle() -> Vec<Outcome> {
    let start = Instant::now();
    let mut rng = rng::stream(1, &[0xACC, 1]);
    let (mut worst_obj, mut worst_kkt) = (0.0f64, 0.0f64);
    for _ in 0..500 {
        let m = rng.random_range(1..=5);
        let p = rng.random_range(1..=m.min(4));
        let j = random_spd(&mut rng, m);
        let z = Vector::from_fn(m, |_, _| rng.sample(StandardNormal));
        let r = gaussian_matrix(&mut rng, p, m);
        let c = Vector::from_fn(p, |_, _| 2.0 * rng.sample::<f64, _>(StandardNormal));
        let mask: Vec<bool> = (0..p).map(|_| rng.random_bool(0.2)).collect();
        let problem = QuadraticProblem::new(j, z).unwrap();
        let cons = LinearConstraints::new(r, c, mask).unwrap();
        let sol = qp::solve_qp(&problem, &cons).unwrap();
        let oracle = qp::brute_force_qp(&problem, &cons).unwrap();
        worst_obj = worst_obj.max((sol.objective - oracle.objective).abs());
        worst_kkt = worst_kkt.max(qp::kt_residuals(&sol, &problem, &cons).max());
    }
    let secs = start.elapsed().as_secs_f64();
    vec![outcome(
        "1",
        worst_obj <= 1e-8 && worst_kkt <= 1e-8 && secs < 5.0,
        format!("500 instances, max objective gap {worst_obj:.2e}, max KKT residual {worst_kkt:.2e}, {secs:.2}s"),
    )]
}

fn closed_form() -> Vec<Outcome> {
    let start = Instant::now();
    let i2 = Matrix::identity(2, 2);
    let mut worst: f64 = 0.0;
    for (k, c) in [[0.0, 0.0], [1.0, -1.0], [-2.0, -2.0]].iter().enumerate() {
        let c = Vector::from_row_slice(c);
        let law = asymptotics::closed_form_2d(&i2, &i2, &c).unwrap();
        let cfg = LimitConfig::canonical(i2.clone(), i2.clone(), i2.clone(), c, 100_000, 20 + k as u64).unwrap();
        let draws = asymptotics::draw_limit(&cfg).unwrap();
        for (l, s) in law.iter().zip(asymptotics::pattern_summaries(&draws, 2)) {
            worst = worst.max((l.probability - s.frequency).abs() / s.frequency_se.max(1e-12));
            if s.count < 2 {
                continue;
            }
            for d in 0..2 {
                let gap = (l.mean_lambda[d] - s.mean_lambda[d]).abs();
                let se = s.mean_lambda_se[d];
                // coordinates pinned at −c carry only rounding noise
                let z = if se > 1e-12 { gap / se } else if gap < 1e-9 { 0.0 } else { f64::INFINITY };
                worst = worst.max(z);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    vec![outcome(
        "2",
        worst <= 3.0 && secs < 30.0,
        format!("worst deviation {worst:.2} MC SEs over probabilities and conditional means, {secs:.2}s"),
    )]
}

fn dominance() -> Vec<Outcome> {
    let start = Instant::now();
    let m = 5;
    let j = Matrix::from_fn(m, m, |a, b| if a == b { 1.0 } else { 0.5 });
    let r = Matrix::from_fn(3, m, |a, b| if a == b { 1.0 } else { 0.0 });
    let grid = [-2.0, 0.0, 2.0];
    let mut tested = Vec::new();
    let mut all_pass = true;
    let mut k = 0u64;
    for &c1 in &grid {
        for &c2 in &grid {
            for &c3 in &grid {
                let c = Vector::from_row_slice(&[c1, c2, c3]);
                k += 1;
                let cfg = LimitConfig::canonical(j.clone(), j.clone(), r.clone(), c.clone(), 100_000, 300 + k).unwrap();
                let draws = asymptotics::draw_limit(&cfg).unwrap();
                let stats = asymptotics::simulation_truth(&cfg, &draws).unwrap();
                let binding = asymptotics::expected_binding_count(&stats);
                // the dominance claim only covers points whose expected binding count exceeds two
                if binding <= 2.0 {
                    continue;
                }
                let tau = asymptotics::optimal_tau(&stats);
                let tr = (&cfg.w * cfg.omega().unwrap()).trace();
                let risk = asymptotics::estimate_risk(&draws.with_tau(tau), &cfg.w, cfg.zeta, Some(tr));
                let pass = risk.risk_cv + 3.0 * risk.se_cv < tr;
                all_pass &= pass;
                tested.push(format!(
                    "c=({c1},{c2},{c3}) Σpγ={binding:.3} τ*={tau:.3} risk={:.4}±{:.4} (plain {:.4}±{:.4}) vs {tr:.1}",
                    risk.risk_cv, risk.se_cv, risk.risk, risk.se
                ));
                if tested.len() == 5 {
                    break;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    vec![outcome(
        "3",
        all_pass && !tested.is_empty() && secs < 120.0,
        format!("{} of 27 grid points have Σpγ > 2, {secs:.1}s; {}", tested.len(), tested.join("; ")),
    )]
}

fn canonical_identities() -> Vec<Outcome> {
    let mut worst_tr: f64 = 0.0;
    let mut worst_phi: f64 = 0.0;
    let mut count = 0;
    let cfg = MCConfig { b_grid: vec![-0.2], ..MCConfig::default() };
    let cons = cfg.constraints().unwrap();
    for rep in 0..3 {
        let (problem, _) = mc_study::generate_dgp(&cfg, 0, rep).unwrap();
        let res = shrinkage::fit_icse(&problem, &cons, &IcseConfig { seed: rep as u64, ..IcseConfig::default() }).unwrap();
        for s in &res.pattern_table {
            worst_tr = worst_tr.max((s.a_trace - s.count as f64).abs());
            worst_phi = worst_phi.max((s.a_phimax - 1.0).abs());
            count += 1;
        }
    }
    // pure inequality problem with a general design
    let mut rng = rng::stream(4, &[0xACC, 4]);
    let x = gaussian_matrix(&mut rng, 300, 4);
    let y = Vector::from_fn(300, |i, _| x[(i, 0)] - 0.1 * x[(i, 2)] + rng.sample::<f64, _>(StandardNormal));
    let problem = build_linear_problem(x, y).unwrap();
    let r = Matrix::from_row_slice(3, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, -1.0]);
    let cons = LinearConstraint::new(r, Vector::zeros(3), vec![false; 3]).unwrap();
    let res = shrinkage::fit_icse(&problem, &cons, &IcseConfig::default()).unwrap();
    for s in res.pattern_table.iter().filter(|s| s.count > 0) {
        worst_tr = worst_tr.max((s.a_trace - s.count as f64).abs());
        worst_phi = worst_phi.max((s.a_phimax - 1.0).abs());
        count += 1;
    }
    vec![outcome(
        "4",
        worst_tr <= 1e-8 && worst_phi <= 1e-8,
        format!("{count} patterns, max |tr A − p| {worst_tr:.2e}, max |φmax − 1| {worst_phi:.2e}"),
    )]
}

fn orthant_probabilities() -> Vec<Outcome> {
    let q = |cov: Matrix, seed| OrthantQuery {
        mean: Vector::zeros(2),
        covariance: cov,
        positive_set: vec![0, 1],
        draws: 100_000,
        seed,
    };
    let indep = orthant::region_probability(&q(Matrix::identity(2, 2), 5)).unwrap();
    let corr = orthant::region_probability(&q(Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]), 6)).unwrap();
    let truth = 0.25 + 0.5f64.asin() / (2.0 * PI);
    let z1 = (indep.estimate - 0.25).abs() / indep.std_error;
    let z2 = (corr.estimate - truth).abs() / corr.std_error;
    let cov = Matrix::from_row_slice(3, 3, &[1.0, 0.3, -0.2, 0.3, 1.0, 0.4, -0.2, 0.4, 1.0]);
    let draws = StandardDraws::new(7, &[], 100_000, 3);
    let all = orthant::mask_probabilities(&Vector::from_row_slice(&[0.2, -0.1, 0.4]), &cov, &draws).unwrap();
    let hits: u64 = all.iter().map(|e| (e.estimate * 100_000.0).round() as u64).sum();
    let sum: f64 = all.iter().map(|e| e.estimate).sum();
    vec![outcome(
        "5",
        z1 <= 3.0 && z2 <= 3.0 && hits == 100_000,
        format!(
            "quadrant {:.5} ({z1:.2} SE), ρ=0.5 {:.5} vs {truth:.5} ({z2:.2} SE), {} of {} draws classified, sum {sum}",
            indep.estimate,
            corr.estimate,
            hits,
            100_000
        ),
    )]
}

fn study() -> Vec<Outcome> {
    let start = Instant::now();
    let cfg = MCConfig {
        n: 200,
        k1: 5,
        k2: 3,
        c_equal: 0.0,
        replications: 500,
        b_grid: mc_study::linspace(-0.5, 0.5, 11),
        seed: 2024,
        ..MCConfig::default()
    };
    let res = mc_study::run_study(&cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let last = cfg.b_grid.len() - 1;
    let at = |bi: usize, e| res.get(bi, e).unwrap().normalized_mse;
    let b04 = cfg.b_grid.iter().position(|b| (b - 0.4).abs() < 1e-9).unwrap();

    let icse: Vec<f64> = (0..=last).map(|bi| at(bi, Estimator::ICSE)).collect();
    let js: Vec<f64> = (0..=last).map(|bi| at(bi, Estimator::JamesStein)).collect();
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    let icse_max = icse.iter().cloned().fold(f64::MIN, f64::max);
    let (js_min, js_max) = js.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let (rv, ebv) = (at(0, Estimator::Restricted), at(0, Estimator::EB));
    let rs = at(last, Estimator::Restricted);
    let (eb4, ic4) = (at(b04, Estimator::EB), at(b04, Estimator::ICSE));
    let failures: usize = res.failures.iter().sum();
    vec![
        outcome("6a", icse_max <= 1.02, format!("ICSE normalized MSE over b grid: {} ({secs:.0}s, {failures} failed replications)", fmt(&icse))),
        outcome("6b", rv > 1.05 && ebv > 1.05, format!("b=-0.5: restricted {rv:.3}, EB {ebv:.3}")),
        outcome("6c", rs < 0.95, format!("b=+0.5: restricted {rs:.3}")),
        outcome("6d", js_min >= 0.95 && js_max <= 1.05, format!("James-Stein range [{js_min:.3}, {js_max:.3}]")),
        outcome(
            "6e",
            eb4 < ic4,
            format!(
                "b=+0.4: EB {eb4:.3} ± {:.3}, ICSE {ic4:.3} ± {:.3}",
                res.get(b04, Estimator::EB).unwrap().mc_se,
                res.get(b04, Estimator::ICSE).unwrap().mc_se
            ),
        ),
    ]
}

fn monotone_in_k1() -> Vec<Outcome> {
    let start = Instant::now();
    let run = |k1| {
        let cfg = MCConfig {
            n: 200,
            k1,
            k2: 3,
            b_grid: vec![-0.3],
            replications: 1000,
            seed: 2025,
            estimators: vec![Estimator::Unrestricted, Estimator::ICSE],
            ..MCConfig::default()
        };
        let res = mc_study::run_study(&cfg).unwrap();
        let row = res.get(0, Estimator::ICSE).unwrap().clone();
        (1.0 - row.normalized_mse, row.mc_se)
    };
    let (r5, s5) = run(5);
    let (r10, s10) = run(10);
    let combined = (s5 * s5 + s10 * s10).sqrt();
    vec![outcome(
        "7",
        r10 - r5 > combined,
        format!(
            "ICSE MSE reduction at b=-0.3: k1=5 {r5:.4} ± {s5:.4}, k1=10 {r10:.4} ± {s10:.4}, difference {:.4} vs combined SE {combined:.4} ({:.0}s)",
            r10 - r5,
            start.elapsed().as_secs_f64()
        ),
    )]
}

fn stein() -> Vec<Outcome> {
    let mut worst: f64 = 0.0;
    let mut rng = rng::stream(8, &[0xACC, 8]);
    for k in 0..10 {
        let kmat = gaussian_matrix(&mut rng, 3, 3);
        let v = random_spd(&mut rng, 3);
        let w = random_spd(&mut rng, 3);
        let j = random_spd(&mut rng, 3);
        // all three constraints binding: the projection is the identity
        let r_iota = gaussian_matrix(&mut rng, 3, 3);
        let p = shrinkage::projection_matrix(&j, &r_iota).unwrap();
        let b = p.transpose() * &w * &p;
        let dir = Vector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let h = dir.normalize() * 2.5;
        let res = asymptotics::steins_identity_check(&kmat, &h, &v, &b, 100_000, 80 + k).unwrap();
        worst = worst.max(res.discrepancy);
    }
    vec![outcome("8", worst <= 3.0, format!("10 instances, worst discrepancy {worst:.2} SEs"))]
}

fn eb_oracles() -> Vec<Outcome> {
    let cfg = EBConfig { truncated: None, gibbs_draws: 50_000, seed: 9, ..EBConfig::default() };
    let (mean, se) = comparators::truncated_mvn_mean(&Vector::zeros(1), &Matrix::identity(1, 1), &cfg).unwrap();
    let target = (2.0 / PI).sqrt();
    let z_mean = (mean[0] - target).abs() / se[0];

    let mut rng = rng::stream(9, &[0xACC, 9]);
    let n = 50;
    let x = Matrix::from_fn(n, 1, |_, _| rng.sample(StandardNormal));
    let y = Vector::from_fn(n, |i, _| -0.05 * x[(i, 0)] + rng.sample::<f64, _>(StandardNormal));
    let nu = 3.0;
    let q = x.column(0).norm_squared() + nu;
    let theta_bar = x.column(0).dot(&y) / q;
    let v_bar = 1.0 / q;
    let exact = normal::cdf(theta_bar / v_bar.sqrt());
    let draws = StandardDraws::new(10, &[], 100_000, 1);
    let d = comparators::truncation_constant(
        &Vector::from_element(1, theta_bar),
        &Matrix::from_element(1, 1, v_bar),
        &[0],
        NormalizerMethod::Counting,
        &draws,
    )
    .unwrap();
    let z_d = (d.value - exact).abs() / d.std_error;
    vec![outcome(
        "9",
        z_mean <= 3.0 && z_d <= 3.0,
        format!(
            "half-normal mean {:.5} vs {target:.5} ({z_mean:.2} SE); D {:.5} vs Φ(θ̄/√v̄) {exact:.5} ({z_d:.2} SE)",
            mean[0], d.value
        ),
    )]
}

fn determinism() -> Vec<Outcome> {
    let artifacts = || -> Vec<u8> {
        let mut out = Vec::new();
        let cfg = MCConfig {
            n: 60,
            b_grid: vec![-0.3, 0.3],
            replications: 100,
            seed: 5,
            orthant_draws: 5000,
            eb: EBConfig { gibbs_burn: 200, gibbs_draws: 1000, d_draws: 300, ..EBConfig::default() },
            ..MCConfig::default()
        };
        mc_study::write_table(&mc_study::run_study(&cfg).unwrap(), &mut out).unwrap();
        let j = Matrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.0]);
        let lim = LimitConfig::canonical(j.clone(), j, Matrix::identity(2, 2), Vector::from_row_slice(&[0.5, -0.5]), 20_000, 3).unwrap();
        let d = asymptotics::draw_limit(&LimitConfig { tau: 0.5, ..lim }).unwrap();
        for v in d.psi_star.iter().chain(&d.xi) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let std = StandardDraws::new(4, &[], 50_000, 3);
        for e in orthant::mask_probabilities(&Vector::zeros(3), &Matrix::identity(3, 3), &std).unwrap() {
            out.extend_from_slice(&e.estimate.to_le_bytes());
        }
        out
    };
    let runs: Vec<(usize, Vec<u8>)> = [1, 4, 8]
        .iter()
        .map(|&t| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap();
            (t, pool.install(artifacts))
        })
        .collect();
    let again = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(artifacts);
    let same = runs.iter().all(|(_, b)| *b == runs[0].1) && again == runs[0].1;
    vec![outcome(
        "10",
        same,
        format!("library artifacts byte-identical at 1, 4 and 8 threads and on re-run ({} bytes)", runs[0].1.len()),
    )]
}

fn main() {
    let criteria: [(&str, fn() -> Vec<Outcome>); 10] = [
        ("QP oracle equivalence", qp_oracle),
        ("two-constraint closed form", closed_form),
        ("asymptotic risk dominance", dominance),
        ("canonical trace and eigenvalue identities", canonical_identities),
        ("orthant probabilities", orthant_probabilities),
        ("Monte Carlo study orderings", study),
        ("shrinkage gain grows with k1", monotone_in_k1),
        ("Stein identity", stein),
        ("Empirical Bayes univariate oracles", eb_oracles),
        ("determinism across thread counts", determinism),
    ];
    // `cargo test -- <filter>` runs the criteria whose number matches
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = Vec::new();
    for (k, (name, run)) in criteria.iter().enumerate() {
        let id = (k + 1).to_string();
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        for o in run() {
            let verdict = if o.pass { "PASS" } else { "FAIL" };
            println!("criterion {:<3} {verdict}  {name}: {}", o.id, o.detail);
            if !o.pass {
                failed.push(o.id);
            }
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {}", failed.join(", "));
        std::process::exit(1);
    }
}
