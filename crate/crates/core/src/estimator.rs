//! The uniform estimator capability set, the q-error metric, and error
//! summarization.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::query::Query;
use crate::table::Table;
use crate::workload::LabeledQuery;
use crate::{Error, Result};

/// The capability set every estimator provides. Implementations are built by
/// their own constructors; estimates must be nonnegative and finite. The
/// `seed` argument makes stochastic estimators reproducible per call;
/// deterministic estimators ignore it.
pub trait Estimator: Send + Sync {
    fn name(&self) -> &str;

    /// Estimated cardinality for the query.
    fn estimate(&self, query: &Query, seed: u64) -> f64;

    /// Rebuilds or retrains against the new table, returning the elapsed
    /// wall-clock time.
    fn update(&mut self, new_table: &Table) -> Result<Duration>;

    /// An independent frozen copy, unaffected by later updates.
    fn snapshot(&self) -> Box<dyn Estimator>;

    /// Model footprint in bytes under each model's documented accounting.
    fn size_bytes(&self) -> usize;
}

/// Multiplicative error factor between estimate and actual, both clamped to
/// at least 1 so zero-cardinality queries stay finite. Always >= 1.
pub fn q_error(est: f64, act: f64) -> f64 {
    assert!(
        est.is_finite() && act.is_finite() && est >= 0.0 && act >= 0.0,
        "q_error requires finite nonnegative inputs, got est={est}, act={act}"
    );
    let e = est.max(1.0);
    let a = act.max(1.0);
    e.max(a) / e.min(a)
}

/// Percentile summary of a batch of q-errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub p50: f64,
    pub p95: f64,
    pub p99: f64,
    pub max: f64,
    pub count: usize,
}

/// Nearest-rank percentile: the `ceil(p * n)`-th order statistic of the
/// ascending sort, with `p` given as `num/den` to keep the rank exact.
fn nearest_rank(sorted: &[f64], num: usize, den: usize) -> f64 {
    let n = sorted.len();
    let rank = (num * n).div_ceil(den).max(1);
    sorted[rank - 1]
}

/// Summarizes q-errors with nearest-rank percentiles plus the maximum.
pub fn summarize(errors: &[f64]) -> Result<ErrorSummary> {
    if errors.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(ErrorSummary {
        p50: nearest_rank(&sorted, 50, 100),
        p95: nearest_rank(&sorted, 95, 100),
        p99: nearest_rank(&sorted, 99, 100),
        max: *sorted.last().unwrap(),
        count: sorted.len(),
    })
}

/// Buckets parallel (query, q-error) arrays by predicate count and summarizes
/// each bucket. Counts with no queries are absent from the map.
pub fn group_by_predicate_count(
    labeled: &[LabeledQuery],
    errors: &[f64],
) -> Result<BTreeMap<usize, ErrorSummary>> {
    if labeled.len() != errors.len() {
        return Err(Error::LengthMismatch {
            left: labeled.len(),
            right: errors.len(),
        });
    }
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (lq, &err) in labeled.iter().zip(errors) {
        groups
            .entry(lq.query.predicate_count())
            .or_default()
            .push(err);
    }
    groups
        .into_iter()
        .map(|(k, v)| Ok((k, summarize(&v)?)))
        .collect()
}

/// Evaluates an estimator against labeled queries, returning per-query
/// q-errors. Per-query seeds are derived from `seed` and the query index.
pub fn qerrors_for(est: &dyn Estimator, labeled: &[LabeledQuery], seed: u64) -> Vec<f64> {
    labeled
        .iter()
        .enumerate()
        .map(|(i, lq)| {
            let s = derive_seed(seed, i as u64);
            q_error(est.estimate(&lq.query, s), lq.cardinality as f64)
        })
        .collect()
}

/// Cheap SplitMix64-style derivation of per-task seeds from a master seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The exact-count oracle wrapped as an estimator; its q-error is identically
/// 1 by construction. Used for harness sanity checks.
#[derive(Clone)]
pub struct ExactOracle {
    table: Table,
}

impl ExactOracle {
    pub fn new(table: &Table) -> Self {
        ExactOracle {
            table: table.clone(),
        }
    }
}

impl Estimator for ExactOracle {
    fn name(&self) -> &str {
        "exact"
    }

    fn estimate(&self, query: &Query, _seed: u64) -> f64 {
        self.table.exact_count(query) as f64
    }

    fn update(&mut self, new_table: &Table) -> Result<Duration> {
        let t0 = Instant::now();
        self.table = new_table.clone();
        Ok(t0.elapsed())
    }

    fn snapshot(&self) -> Box<dyn Estimator> {
        Box::new(self.clone())
    }

    fn size_bytes(&self) -> usize {
        self.table.data_size_bytes()
    }
}
