//! Controlled two-column synthetic datasets with tunable skew, correlation,
//! and domain size.
//!
//! Column one is uniform on `[0,1)` for skew 0, otherwise a generalized
//! Pareto draw (shape = skew, scale 1) truncated at its 99.9th percentile.
//! Column two copies column one with probability `correlation`, otherwise
//! redraws from the same distribution. Both columns are binned equi-width
//! into `domain_size` integer bins over the shared truncated support, so a
//! copied value always lands in the same bin.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::table::Table;
use crate::{Error, Result};

const TRUNCATION_QUANTILE: f64 = 0.999;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Distribution skew in `[0, 2]`; 0 is uniform, larger is heavier-tailed.
    pub skew: f64,
    /// Probability in `[0, 1]` that a row's second value copies the first.
    pub correlation: f64,
    /// Number of integer bins per column (>= 2).
    pub domain_size: usize,
    pub rows: usize,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=2.0).contains(&self.skew) {
            return Err(Error::InvalidConfig("skew must be in [0, 2]".into()));
        }
        if !(0.0..=1.0).contains(&self.correlation) {
            return Err(Error::InvalidConfig("correlation must be in [0, 1]".into()));
        }
        if self.domain_size < 2 {
            return Err(Error::InvalidConfig("domain_size must be >= 2".into()));
        }
        if self.rows == 0 {
            return Err(Error::InvalidConfig("rows must be >= 1".into()));
        }
        Ok(())
    }

    /// The truncated support `[lo, hi)` shared by both columns.
    pub fn support(&self) -> (f64, f64) {
        if self.skew == 0.0 {
            (0.0, 1.0)
        } else {
            (0.0, pareto_quantile(TRUNCATION_QUANTILE, self.skew))
        }
    }

    fn draw(&self, rng: &mut impl Rng) -> f64 {
        if self.skew == 0.0 {
            rng.gen_range(0.0..1.0)
        } else {
            // Inverse-CDF draw of the truncated distribution.
            let u = rng.gen_range(0.0..TRUNCATION_QUANTILE);
            pareto_quantile(u, self.skew)
        }
    }
}

/// Quantile of the generalized Pareto distribution with shape `s > 0`,
/// scale 1, location 0.
fn pareto_quantile(p: f64, s: f64) -> f64 {
    ((1.0 - p).powf(-s) - 1.0) / s
}

/// Continuous first column.
pub fn gen_first_column(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..cfg.rows).map(|_| cfg.draw(rng)).collect()
}

/// Second column: per row a copy of the first with probability
/// `cfg.correlation`, otherwise a fresh draw from the same distribution.
pub fn derive_second_column(col1: &[f64], cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    col1.iter()
        .map(|&v1| {
            if rng.gen_bool(cfg.correlation) {
                v1
            } else {
                cfg.draw(rng)
            }
        })
        .collect()
}

/// Equi-width binning over `[lo, hi]`: `floor(d * (v - lo) / (hi - lo))`
/// clamped to `[0, d-1]`. A degenerate support maps everything to bin 0.
pub fn bin_columns(values: &[f64], d: usize, support: (f64, f64)) -> Vec<f64> {
    let (lo, hi) = support;
    let width = hi - lo;
    values
        .iter()
        .map(|&v| {
            if width <= 0.0 {
                0.0
            } else {
                let bin = ((d as f64) * (v - lo) / width).floor();
                bin.clamp(0.0, (d - 1) as f64)
            }
        })
        .collect()
}

/// Generates the full two-column binned table, deterministic given the seed.
pub fn gen_synth(cfg: &SynthConfig) -> Result<Table> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let col1 = gen_first_column(cfg, &mut rng);
    let col2 = derive_second_column(&col1, cfg, &mut rng);
    let support = cfg.support();
    let b1 = bin_columns(&col1, cfg.domain_size, support);
    let b2 = bin_columns(&col2, cfg.domain_size, support);
    Table::from_numeric_columns(&["a1", "a2"], vec![b1, b2])
}
