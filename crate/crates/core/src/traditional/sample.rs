//! Uniform-sample estimators.
//!
//! Sample-A scales the sample match fraction to the table size and returns 0
//! when nothing in the sample matches. Sample-B is identical while matches
//! exist, but falls back to assuming independence between predicates in the
//! zero-tuple case, multiplying per-predicate sample selectivities (each
//! floored at one sample row).

use std::time::{Duration, Instant};

use rand::seq::index::sample as sample_indices;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::estimator::Estimator;
use crate::query::Query;
use crate::table::Table;
use crate::{Error, Result};

#[derive(Clone, Serialize, Deserialize)]
pub struct SampleEstimator {
    columns: Vec<Vec<f64>>,
    sample_size: usize,
    table_rows: usize,
    rate: f64,
    seed: u64,
    independence_fallback: bool,
}

impl SampleEstimator {
    /// Sample-A: plain uniform-sample scaling.
    pub fn build_sample_a(table: &Table, rate: f64, seed: u64) -> Result<Self> {
        Self::build(table, rate, seed, false)
    }

    /// Sample-B: Sample-A plus the independence fallback for zero matches.
    pub fn build_sample_b(table: &Table, rate: f64, seed: u64) -> Result<Self> {
        Self::build(table, rate, seed, true)
    }

    fn build(table: &Table, rate: f64, seed: u64, fallback: bool) -> Result<Self> {
        if !(0.0 < rate && rate <= 1.0) {
            return Err(Error::InvalidConfig("sample rate must be in (0, 1]".into()));
        }
        let sample_size = (rate * table.row_count() as f64).round() as usize;
        if sample_size == 0 {
            return Err(Error::InvalidConfig(format!(
                "rate {rate} rounds to an empty sample on {} rows",
                table.row_count()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = sample_indices(&mut rng, table.row_count(), sample_size).into_vec();
        idx.sort_unstable();
        let columns = (0..table.n_cols())
            .map(|c| idx.iter().map(|&r| table.value(c, r)).collect())
            .collect();
        Ok(SampleEstimator {
            columns,
            sample_size,
            table_rows: table.row_count(),
            rate,
            seed,
            independence_fallback: fallback,
        })
    }

    pub fn sample_size(&self) -> usize {
        self.sample_size
    }

    fn matches(&self, query: &Query) -> usize {
        let mut count = 0;
        'rows: for row in 0..self.sample_size {
            for p in &query.predicates {
                if !p.matches(self.columns[p.col][row]) {
                    continue 'rows;
                }
            }
            count += 1;
        }
        count
    }
}

impl Estimator for SampleEstimator {
    fn name(&self) -> &str {
        if self.independence_fallback {
            "sample-b"
        } else {
            "sample-a"
        }
    }

    fn estimate(&self, query: &Query, _seed: u64) -> f64 {
        let m = self.sample_size as f64;
        let n = self.table_rows as f64;
        let matched = self.matches(query);
        if matched > 0 || !self.independence_fallback || query.predicates.is_empty() {
            return matched as f64 / m * n;
        }
        // Zero-tuple fallback: product of per-predicate sample selectivities,
        // each floored at one sample row.
        let mut sel = 1.0;
        for p in &query.predicates {
            let single = self.columns.get(p.col).map_or(0, |col| {
                col[..self.sample_size]
                    .iter()
                    .filter(|&&v| p.matches(v))
                    .count()
            });
            sel *= (single.max(1)) as f64 / m;
        }
        sel * n
    }

    fn update(&mut self, new_table: &Table) -> Result<Duration> {
        let t0 = Instant::now();
        *self = Self::build(new_table, self.rate, self.seed, self.independence_fallback)?;
        Ok(t0.elapsed())
    }

    fn snapshot(&self) -> Box<dyn Estimator> {
        Box::new(self.clone())
    }

    fn size_bytes(&self) -> usize {
        self.sample_size * self.columns.len() * 4
    }
}
