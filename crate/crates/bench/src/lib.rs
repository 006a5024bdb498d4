//! Fixtures shared by the benchmarks.

use icse_core::mc_study::{self, MCConfig};
use icse_core::{rng, EstimationProblem, LinearConstraints, Matrix, QuadraticProblem, Vector};
use icse_core::estimators::LinearConstraint;
use rand::Rng;
use rand_distr::StandardNormal;

/// Random strictly convex QP with `p` inequality rows in `m` dimensions.
pub fn random_qp(m: usize, p: usize, seed: u64) -> (QuadraticProblem, LinearConstraints) {
    let mut g = rng::stream(seed, &[0xBE, m as u64, p as u64]);
    let a = Matrix::from_fn(m, m, |_, _| g.sample(StandardNormal));
    let j = &a * a.transpose() + Matrix::identity(m, m);
    let z = Vector::from_fn(m, |_, _| g.sample(StandardNormal));
    let r = Matrix::from_fn(p, m, |_, _| g.sample(StandardNormal));
    let c = Vector::from_fn(p, |_, _| g.sample::<f64, _>(StandardNormal));
    let problem = QuadraticProblem::new(j, z).expect("SPD by construction");
    let cons = LinearConstraints::new(r, c, vec![false; p]).expect("generic rows have full rank");
    (problem, cons)
}

/// One data set from the simulation design with its restrictions.
pub fn study_problem(k1: usize, b: f64) -> (EstimationProblem, LinearConstraint) {
    let cfg = MCConfig { k1, b_grid: vec![b], ..MCConfig::default() };
    let (problem, _) = mc_study::generate_dgp(&cfg, 0, 0).expect("valid design");
    (problem, cfg.constraints().expect("valid restrictions"))
}
