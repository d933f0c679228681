//! Per-column equi-depth histograms combined under the attribute-value
//! independence assumption.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::estimator::Estimator;
use crate::query::{Predicate, PredicateKind, Query};
use crate::table::Table;
use crate::traditional::Budget;
use crate::{Error, Result};

pub const DEFAULT_BUCKETS: usize = 100;

/// Accounting: lo, hi, count, distinct at 4 bytes each.
const BUCKET_COST_BYTES: usize = 16;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct Bucket {
    lo: f64,
    hi: f64,
    count: usize,
    distinct: usize,
}

/// Equi-depth histogram over one column. Bucket value ranges are disjoint
/// (a run of equal values never straddles a boundary) and counts sum to the
/// row count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Hist1D {
    buckets: Vec<Bucket>,
    total: usize,
}

impl Hist1D {
    pub fn build(values: &[f64], max_buckets: usize) -> Self {
        assert!(max_buckets >= 1, "need at least one bucket");
        if values.is_empty() {
            return Hist1D {
                buckets: Vec::new(),
                total: 0,
            };
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = sorted.len();
        let depth = n.div_ceil(max_buckets);
        let mut buckets = Vec::new();
        let mut start = 0;
        while start < n {
            let mut end = (start + depth).min(n);
            // keep equal values in one bucket
            while end < n && sorted[end] == sorted[end - 1] {
                end += 1;
            }
            let slice = &sorted[start..end];
            let mut distinct = 1;
            for w in slice.windows(2) {
                if w[0] != w[1] {
                    distinct += 1;
                }
            }
            buckets.push(Bucket {
                lo: slice[0],
                hi: slice[end - start - 1],
                count: end - start,
                distinct,
            });
            start = end;
        }
        Hist1D { buckets, total: n }
    }

    pub fn n_buckets(&self) -> usize {
        self.buckets.len()
    }

    /// Selectivity of a range `[lo, hi]` (open sides as infinities) using
    /// inclusive interval lengths: a bucket contributes
    /// `count * overlap / (hi - lo + 1)`, which makes estimates exactly
    /// additive under `[l,k] / [k+1,h]` splits.
    fn range_selectivity(&self, lo: f64, hi: f64) -> f64 {
        if self.total == 0 || lo > hi {
            return 0.0;
        }
        let mut rows = 0.0;
        for b in &self.buckets {
            let overlap = (hi.min(b.hi) - lo.max(b.lo) + 1.0).max(0.0);
            if overlap > 0.0 {
                let width = b.hi - b.lo + 1.0;
                rows += b.count as f64 * (overlap / width).min(1.0);
            }
        }
        rows / self.total as f64
    }

    fn equality_selectivity(&self, v: f64) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        for b in &self.buckets {
            if v >= b.lo && v <= b.hi {
                return b.count as f64 / b.distinct as f64 / self.total as f64;
            }
        }
        0.0
    }

    /// Selectivity of one predicate against this column's histogram.
    pub fn selectivity(&self, pred: &Predicate) -> f64 {
        match pred.kind {
            PredicateKind::Equality => self.equality_selectivity(pred.lo.unwrap_or(f64::NAN)),
            PredicateKind::Invalid => 0.0,
            _ => {
                let (lo, hi) = pred.interval();
                self.range_selectivity(lo, hi)
            }
        }
    }

    pub fn size_bytes(&self) -> usize {
        self.buckets.len() * BUCKET_COST_BYTES
    }
}

/// The AVI estimator: per-column equi-depth histograms; query selectivity is
/// the product of per-predicate selectivities.
#[derive(Clone, Serialize, Deserialize)]
pub struct AviEstimator {
    hists: Vec<Hist1D>,
    row_count: usize,
    buckets_per_column: usize,
    budget: Budget,
}

impl AviEstimator {
    pub fn build(table: &Table, buckets_per_column: usize, budget: Budget) -> Result<Self> {
        if buckets_per_column == 0 {
            return Err(Error::InvalidConfig(
                "buckets_per_column must be >= 1".into(),
            ));
        }
        let budget_bytes = budget.resolve(table);
        let per_column = budget_bytes / (table.n_cols().max(1) * BUCKET_COST_BYTES);
        let capped = buckets_per_column.min(per_column);
        if capped == 0 {
            return Err(Error::BudgetTooSmall {
                budget: budget_bytes,
                minimum: table.n_cols() * BUCKET_COST_BYTES,
            });
        }
        let hists = (0..table.n_cols())
            .map(|c| Hist1D::build(table.column(c), capped))
            .collect();
        Ok(AviEstimator {
            hists,
            row_count: table.row_count(),
            buckets_per_column,
            budget,
        })
    }

    pub fn with_defaults(table: &Table) -> Result<Self> {
        Self::build(table, DEFAULT_BUCKETS, Budget::default())
    }

    pub fn histograms(&self) -> &[Hist1D] {
        &self.hists
    }

    pub fn selectivity(&self, query: &Query) -> f64 {
        query
            .predicates
            .iter()
            .map(|p| self.hists[p.col].selectivity(p))
            .product()
    }
}

impl Estimator for AviEstimator {
    fn name(&self) -> &str {
        "avi"
    }

    fn estimate(&self, query: &Query, _seed: u64) -> f64 {
        self.selectivity(query) * self.row_count as f64
    }

    fn update(&mut self, new_table: &Table) -> Result<Duration> {
        let t0 = Instant::now();
        *self = Self::build(new_table, self.buckets_per_column, self.budget)?;
        Ok(t0.elapsed())
    }

    fn snapshot(&self) -> Box<dyn Estimator> {
        Box::new(self.clone())
    }

    fn size_bytes(&self) -> usize {
        self.hists.iter().map(Hist1D::size_bytes).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_column(n: usize, domain: usize) -> Vec<f64> {
        (0..n).map(|i| (i % domain) as f64).collect()
    }

    #[test]
    fn histogram_counts_sum_to_rows() {
        let values = uniform_column(1000, 37);
        let h = Hist1D::build(&values, 10);
        let total: usize = (0..h.n_buckets()).map(|i| h.buckets[i].count).sum();
        assert_eq!(total, 1000);
        assert!(h.n_buckets() <= 10);
        for w in h.buckets.windows(2) {
            assert!(w[0].hi < w[1].lo, "bucket ranges must be disjoint");
        }
    }

    #[test]
    fn full_domain_range_is_exact() {
        let t = Table::from_numeric_columns(&["a"], vec![uniform_column(1000, 50)]).unwrap();
        let est = AviEstimator::build(&t, 20, Budget::Bytes(usize::MAX)).unwrap();
        let q = Query::new(vec![Predicate::closed(0, 0.0, 49.0)]);
        assert_eq!(est.estimate(&q, 0), 1000.0);
    }

    #[test]
    fn equality_uses_count_over_distinct() {
        // 100 rows of values 0..9, ten each; one bucket per distinct value.
        let t = Table::from_numeric_columns(&["a"], vec![uniform_column(100, 10)]).unwrap();
        let est = AviEstimator::build(&t, 10, Budget::Bytes(usize::MAX)).unwrap();
        let q = Query::new(vec![Predicate::equality(0, 3.0)]);
        assert!((est.estimate(&q, 0) - 10.0).abs() < 1e-9);
    }

    #[test]
    fn range_split_additivity_exact() {
        let t = Table::from_numeric_columns(&["a"], vec![uniform_column(997, 61)]).unwrap();
        let est = AviEstimator::build(&t, 8, Budget::Bytes(usize::MAX)).unwrap();
        for (l, k, h) in [(0.0, 30.0, 60.0), (5.5, 20.0, 44.5), (10.0, 10.0, 12.0)] {
            let whole = est.estimate(&Query::new(vec![Predicate::closed(0, l, h)]), 0);
            let left = est.estimate(&Query::new(vec![Predicate::closed(0, l, k)]), 0);
            let right = est.estimate(&Query::new(vec![Predicate::closed(0, k + 1.0, h)]), 0);
            assert!(
                (whole - left - right).abs() < 1e-9 * whole.max(1.0),
                "split at {k}: {whole} vs {left} + {right}"
            );
        }
    }

    #[test]
    fn independence_assumption_on_dependent_columns_overestimates() {
        // a2 == a1 functionally; query a1 = 0 AND a2 = 1 has truth 0 but AVI
        // multiplies marginal selectivities and overestimates.
        let col: Vec<f64> = uniform_column(100, 4);
        let t = Table::from_numeric_columns(&["a1", "a2"], vec![col.clone(), col]).unwrap();
        let est = AviEstimator::build(&t, 10, Budget::Bytes(usize::MAX)).unwrap();
        let q = Query::new(vec![
            Predicate::equality(0, 0.0),
            Predicate::equality(1, 1.0),
        ]);
        assert_eq!(t.exact_count(&q), 0);
        assert!(est.estimate(&q, 0) > 1.0);
    }

    #[test]
    fn budget_caps_bucket_count() {
        let t = Table::from_numeric_columns(&["a"], vec![uniform_column(10_000, 5000)]).unwrap();
        // 1.5% of 10_000 * 1 * 4 bytes = 600 bytes -> 37 buckets max
        let est = AviEstimator::with_defaults(&t).unwrap();
        assert!(est.size_bytes() <= Budget::default().resolve(&t));
        assert!(est.hists[0].n_buckets() <= 37);
    }

    #[test]
    fn independent_synthetic_regression_bound() {
        // Oracle run on this pinned independent-column configuration (c = 0)
        // measured a median q-error of 1.0030 over the selectivity >= 1%
        // slice; the regression bound is twice that value.
        let table = crate::synth::gen_synth(&crate::synth::SynthConfig {
            skew: 1.0,
            correlation: 0.0,
            domain_size: 100,
            rows: 20_000,
            seed: 12,
        })
        .unwrap();
        let est = AviEstimator::with_defaults(&table).unwrap();
        let queries =
            crate::workload::gen_workload(&table, &crate::workload::WorkloadConfig::new(3000, 23))
                .unwrap();
        let labeled = crate::workload::label(&table, &queries);
        let errors: Vec<f64> = labeled
            .iter()
            .filter(|lq| lq.selectivity >= 0.01)
            .map(|lq| crate::estimator::q_error(est.estimate(&lq.query, 0), lq.cardinality as f64))
            .collect();
        assert!(errors.len() >= 1000);
        let p50 = crate::estimator::summarize(&errors).unwrap().p50;
        assert!(p50 <= 2.006, "median q-error {p50}");
    }

    #[test]
    fn invalid_predicate_estimates_zero() {
        let t = Table::from_numeric_columns(&["a"], vec![uniform_column(100, 10)]).unwrap();
        let est = AviEstimator::build(&t, 10, Budget::Bytes(usize::MAX)).unwrap();
        let q = Query::new(vec![Predicate::invalid(0, 100.0, 10.0)]);
        assert_eq!(est.estimate(&q, 0), 0.0);
    }
}
