//! Progressive sampling: Monte-Carlo range-query inference over any model
//! that exposes per-column conditional distributions.
//!
//! Each sample walks the model's column order, masks the conditional to the
//! query range, multiplies the in-range mass into the sample weight, and
//! draws the next value from the renormalized masked distribution. The
//! estimate is `row_count * mean(weight)`. A column whose predicate covers
//! the whole domain contributes mass exactly 1, so full-domain queries return
//! the row count bit-exactly regardless of seed.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::query::Query;

/// A model that factorizes the joint distribution into per-column
/// conditionals along a fixed column order.
pub trait ConditionalOracle {
    /// Column visit order; every column appears exactly once.
    fn order(&self) -> &[usize];

    /// Sorted distinct encoded values of a column.
    fn domain(&self, col: usize) -> &[f64];

    /// Writes the distribution over `domain(col)` given the values assigned
    /// so far (by domain index, indexed by column).
    fn conditional_into(&self, col: usize, assignment: &[Option<usize>], out: &mut Vec<f64>);

    fn row_count(&self) -> usize;
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProgressiveSamplerConfig {
    pub samples: usize,
}

impl Default for ProgressiveSamplerConfig {
    fn default() -> Self {
        ProgressiveSamplerConfig { samples: 512 }
    }
}

/// Runs progressive sampling and returns the cardinality estimate.
pub fn progressive_estimate(
    oracle: &dyn ConditionalOracle,
    query: &Query,
    cfg: ProgressiveSamplerConfig,
    seed: u64,
) -> f64 {
    progressive_estimate_detailed(oracle, query, cfg, seed).0
}

/// As [`progressive_estimate`], also returning the standard error of the
/// estimate derived from the sample-weight variance.
pub fn progressive_estimate_detailed(
    oracle: &dyn ConditionalOracle,
    query: &Query,
    cfg: ProgressiveSamplerConfig,
    seed: u64,
) -> (f64, f64) {
    assert!(cfg.samples >= 1, "need at least one sample");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = oracle.order().to_vec();
    let n_cols = order.iter().copied().max().map_or(0, |m| m + 1);

    // Per-column in-range masks; None marks "no predicate / full coverage".
    let mut masks: Vec<Option<Vec<bool>>> = vec![None; n_cols];
    for &col in &order {
        if let Some(pred) = query.predicate_on(col) {
            let mask: Vec<bool> = oracle
                .domain(col)
                .iter()
                .map(|&v| pred.matches(v))
                .collect();
            if !mask.iter().all(|&m| m) {
                masks[col] = Some(mask);
            }
        }
    }

    let mut weights_sum = 0.0;
    let mut weights_sq_sum = 0.0;
    let mut dist: Vec<f64> = Vec::new();
    let mut assignment: Vec<Option<usize>> = vec![None; n_cols];

    for _ in 0..cfg.samples {
        assignment.iter_mut().for_each(|a| *a = None);
        let mut weight = 1.0;
        for &col in &order {
            oracle.conditional_into(col, &assignment, &mut dist);
            let drawn = match &masks[col] {
                None => draw_from(&dist, None, 1.0, &mut rng),
                Some(mask) => {
                    let mass: f64 = dist
                        .iter()
                        .zip(mask)
                        .filter(|(_, &m)| m)
                        .map(|(p, _)| p)
                        .sum();
                    if mass <= 0.0 {
                        weight = 0.0;
                        break;
                    }
                    weight *= mass.min(1.0);
                    draw_from(&dist, Some(mask), mass, &mut rng)
                }
            };
            assignment[col] = Some(drawn);
        }
        weights_sum += weight;
        weights_sq_sum += weight * weight;
    }

    let s = cfg.samples as f64;
    let mean = weights_sum / s;
    let var = ((weights_sq_sum / s) - mean * mean).max(0.0);
    let se = if cfg.samples > 1 {
        (var / (s - 1.0)).sqrt()
    } else {
        0.0
    };
    let n = oracle.row_count() as f64;
    (n * mean, n * se)
}

fn draw_from(dist: &[f64], mask: Option<&Vec<bool>>, mass: f64, rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen_range(0.0..1.0) * mass;
    let mut acc = 0.0;
    let mut last_valid = 0;
    for (i, &p) in dist.iter().enumerate() {
        if mask.is_some_and(|m| !m[i]) {
            continue;
        }
        acc += p;
        last_valid = i;
        if u < acc {
            return i;
        }
    }
    last_valid
}
