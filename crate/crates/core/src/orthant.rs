//! Monte Carlo probabilities of sign regions of a multivariate normal.
//!
//! A region is named by the set of coordinates that must be strictly
//! positive; every other coordinate must be `≤ 0`. Each draw is classified
//! once into its sign mask (bit `j` set when coordinate `j` is positive), so
//! the estimates over all `2^p` regions share random numbers and sum to one.

use rayon::prelude::*;

use crate::error::{IcseError, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::rng;

pub const DEFAULT_DRAWS: usize = 100_000;
pub const MIN_DRAWS: usize = 1000;
pub const MAX_DIM: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

impl ProbabilityEstimate {
    fn from_count(count: u64, total: usize) -> Self {
        let p = count as f64 / total as f64;
        ProbabilityEstimate { estimate: p, std_error: (p * (1.0 - p) / total as f64).sqrt() }
    }
}

/// Standard normal draws, `draws x dim`, reusable across means and covariances.
#[derive(Debug, Clone)]
pub struct StandardDraws {
    dim: usize,
    draws: usize,
    data: Vec<f64>,
}

impl StandardDraws {
    pub fn new(seed: u64, tags: &[u64], draws: usize, dim: usize) -> Self {
        StandardDraws { dim, draws, data: rng::standard_normal_rows(seed, tags, draws, dim) }
    }

    /// First `k` coordinates of every draw.
    pub fn from_rows(other: &StandardDraws, k: usize) -> Self {
        assert!(k <= other.dim, "cannot widen draws");
        let mut data = Vec::with_capacity(other.draws * k);
        for i in 0..other.draws {
            data.extend_from_slice(&other.row(i)[..k]);
        }
        StandardDraws { dim: k, draws: other.draws, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.draws
    }

    pub fn is_empty(&self) -> bool {
        self.draws == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

#[derive(Debug, Clone)]
pub struct OrthantQuery {
    pub mean: Vector,
    pub covariance: Matrix,
    /// coordinates required to be positive (0-based)
    pub positive_set: Vec<usize>,
    pub draws: usize,
    pub seed: u64,
}

fn check_inputs(mean: &Vector, cov: &Matrix) -> Result<Matrix> {
    let p = mean.len();
    if cov.shape() != (p, p) {
        return Err(IcseError::shape("covariance must be p x p for a p-vector mean"));
    }
    if p > MAX_DIM {
        return Err(IcseError::Capacity(format!("dimension {p} exceeds {MAX_DIM}")));
    }
    linalg::psd_factor(cov)
}

/// Sign mask of `mean + L z` for every draw, in draw order.
pub fn sign_masks(mean: &Vector, cov: &Matrix, draws: &StandardDraws) -> Result<Vec<u32>> {
    let l = check_inputs(mean, cov)?;
    let p = mean.len();
    if draws.dim() != p {
        return Err(IcseError::shape("draw dimension does not match the mean"));
    }
    let mut masks = vec![0u32; draws.len()];
    masks
        .par_chunks_mut(rng::BLOCK)
        .enumerate()
        .for_each(|(b, chunk)| {
            for (k, out) in chunk.iter_mut().enumerate() {
                let z = draws.row(b * rng::BLOCK + k);
                let mut mask = 0u32;
                for i in 0..p {
                    let mut x = mean[i];
                    for (j, zj) in z.iter().enumerate() {
                        x += l[(i, j)] * zj;
                    }
                    if x > 0.0 {
                        mask |= 1 << i;
                    }
                }
                *out = mask;
            }
        });
    Ok(masks)
}

fn mask_of(positive_set: &[usize], p: usize) -> Result<u32> {
    let mut mask = 0u32;
    for &j in positive_set {
        if j >= p {
            return Err(IcseError::shape(format!("coordinate {j} out of range for dimension {p}")));
        }
        mask |= 1 << j;
    }
    Ok(mask)
}

/// Probability that exactly the coordinates in `positive_set` are positive.
pub fn region_probability(q: &OrthantQuery) -> Result<ProbabilityEstimate> {
    if q.draws < MIN_DRAWS {
        return Err(IcseError::Config(format!("at least {MIN_DRAWS} draws are required")));
    }
    let p = q.mean.len();
    let target = mask_of(&q.positive_set, p)?;
    let draws = StandardDraws::new(q.seed, &[0x0A7A, p as u64], q.draws, p);
    let masks = sign_masks(&q.mean, &q.covariance, &draws)?;
    let hits = masks.iter().filter(|&&m| m == target).count() as u64;
    Ok(ProbabilityEstimate::from_count(hits, q.draws))
}

/// Estimates for every sign mask `0..2^p` (entry `k` is the region whose
/// positive set is the bits of `k`).
pub fn mask_probabilities(mean: &Vector, cov: &Matrix, draws: &StandardDraws) -> Result<Vec<ProbabilityEstimate>> {
    let p = mean.len();
    let masks = sign_masks(mean, cov, draws)?;
    let mut counts = vec![0u64; 1 << p];
    for m in masks {
        counts[m as usize] += 1;
    }
    Ok(counts
        .into_iter()
        .map(|c| ProbabilityEstimate::from_count(c, draws.len()))
        .collect())
}

/// Estimates for the requested positive sets from one shared draw set.
pub fn all_pattern_probabilities(
    mean: &Vector,
    cov: &Matrix,
    positive_sets: &[Vec<usize>],
    draws: usize,
    seed: u64,
) -> Result<Vec<ProbabilityEstimate>> {
    if draws < MIN_DRAWS {
        return Err(IcseError::Config(format!("at least {MIN_DRAWS} draws are required")));
    }
    let p = mean.len();
    let std = StandardDraws::new(seed, &[0x0A7A, p as u64], draws, p);
    let all = mask_probabilities(mean, cov, &std)?;
    positive_sets
        .iter()
        .map(|s| Ok(all[mask_of(s, p)? as usize]))
        .collect()
}
