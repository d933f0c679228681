//! MaxDiff multidimensional histogram (MHIST-2 style greedy construction).
//!
//! Construction starts from one bucket over all rows and repeatedly splits
//! the globally highest-scoring (bucket, dimension) pair, where the score of
//! a dimension within a bucket is the largest difference between adjacent
//! "areas" (value frequency times spread to the next distinct value, with
//! spread 1 for the last value). Splitting stops when the next bucket would
//! exceed the byte budget or no bucket has two distinct values in any
//! dimension. Estimation assumes uniform spread inside each bucket, using
//! inclusive integer interval lengths on the encoded domain.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::estimator::Estimator;
use crate::query::{PredicateKind, Query};
use crate::table::Table;
use crate::traditional::Budget;
use crate::{Error, Result};

/// lo, hi, distinct per dimension plus the count, at 4 bytes per field.
fn bucket_cost_bytes(dims: usize) -> usize {
    4 * (3 * dims + 1)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BucketSummary {
    lo: Vec<f64>,
    hi: Vec<f64>,
    distinct: Vec<usize>,
    count: usize,
}

#[derive(Debug, Clone, Copy)]
struct SplitCandidate {
    score: f64,
    dim: usize,
    /// Split at `value`: rows with `v <= value` go left.
    value: f64,
}

struct BuildBucket {
    rows: Vec<u32>,
    best: Option<SplitCandidate>,
}

fn best_split(table: &Table, rows: &[u32]) -> Option<SplitCandidate> {
    let mut best: Option<SplitCandidate> = None;
    for dim in 0..table.n_cols() {
        let col = table.column(dim);
        let mut vals: Vec<f64> = rows.iter().map(|&r| col[r as usize]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // distinct values with frequencies
        let mut distinct: Vec<(f64, usize)> = Vec::new();
        for &v in &vals {
            match distinct.last_mut() {
                Some((dv, f)) if *dv == v => *f += 1,
                _ => distinct.push((v, 1)),
            }
        }
        let k = distinct.len();
        if k < 2 {
            continue;
        }
        let areas: Vec<f64> = distinct
            .iter()
            .enumerate()
            .map(|(j, &(v, f))| {
                let spread = if j + 1 < k {
                    distinct[j + 1].0 - v
                } else {
                    1.0
                };
                f as f64 * spread
            })
            .collect();
        for j in 0..k - 1 {
            let score = (areas[j + 1] - areas[j]).abs();
            let better = match best {
                None => true,
                Some(b) => score > b.score,
            };
            if better {
                best = Some(SplitCandidate {
                    score,
                    dim,
                    value: distinct[j].0,
                });
            }
        }
    }
    best
}

/// MaxDiff(Value, Area) multidimensional histogram estimator.
#[derive(Clone, Serialize, Deserialize)]
pub struct MhistEstimator {
    buckets: Vec<BucketSummary>,
    dims: usize,
    budget: Budget,
}

impl MhistEstimator {
    pub fn build(table: &Table, budget: Budget) -> Result<Self> {
        let dims = table.n_cols();
        let cost = bucket_cost_bytes(dims);
        let budget_bytes = budget.resolve(table);
        let max_buckets = budget_bytes / cost;
        if max_buckets == 0 {
            return Err(Error::BudgetTooSmall {
                budget: budget_bytes,
                minimum: cost,
            });
        }

        let all_rows: Vec<u32> = (0..table.row_count() as u32).collect();
        let best = best_split(table, &all_rows);
        let mut building = vec![BuildBucket {
            rows: all_rows,
            best,
        }];

        while building.len() < max_buckets {
            // Globally best candidate; ties resolved by creation order, then
            // the per-bucket scan already prefers lower dimension and value.
            let mut chosen: Option<(usize, SplitCandidate)> = None;
            for (i, b) in building.iter().enumerate() {
                if let Some(c) = b.best {
                    let better = match chosen {
                        None => true,
                        Some((_, cur)) => c.score > cur.score,
                    };
                    if better {
                        chosen = Some((i, c));
                    }
                }
            }
            let Some((idx, cand)) = chosen else { break };

            let col = table.column(cand.dim);
            let parent_rows = std::mem::take(&mut building[idx].rows);
            let (left, right): (Vec<u32>, Vec<u32>) = parent_rows
                .into_iter()
                .partition(|&r| col[r as usize] <= cand.value);
            debug_assert!(!left.is_empty() && !right.is_empty());
            let left_best = best_split(table, &left);
            let right_best = best_split(table, &right);
            building[idx] = BuildBucket {
                rows: left,
                best: left_best,
            };
            building.push(BuildBucket {
                rows: right,
                best: right_best,
            });
        }

        let buckets = building
            .iter()
            .filter(|b| !b.rows.is_empty())
            .map(|b| {
                let mut lo = vec![f64::INFINITY; dims];
                let mut hi = vec![f64::NEG_INFINITY; dims];
                let mut distinct = vec![0usize; dims];
                for dim in 0..dims {
                    let col = table.column(dim);
                    let mut vals: Vec<f64> = b.rows.iter().map(|&r| col[r as usize]).collect();
                    vals.sort_by(|a, c| a.partial_cmp(c).unwrap());
                    lo[dim] = vals[0];
                    hi[dim] = *vals.last().unwrap();
                    distinct[dim] = 1 + vals.windows(2).filter(|w| w[0] != w[1]).count();
                }
                BucketSummary {
                    lo,
                    hi,
                    distinct,
                    count: b.rows.len(),
                }
            })
            .collect();

        Ok(MhistEstimator {
            buckets,
            dims,
            budget,
        })
    }

    pub fn with_defaults(table: &Table) -> Result<Self> {
        Self::build(table, Budget::default())
    }

    pub fn n_buckets(&self) -> usize {
        self.buckets.len()
    }

    /// Sum of bucket counts; equals the row count by construction.
    pub fn total_count(&self) -> usize {
        self.buckets.iter().map(|b| b.count).sum()
    }
}

impl Estimator for MhistEstimator {
    fn name(&self) -> &str {
        "mhist"
    }

    fn estimate(&self, query: &Query, _seed: u64) -> f64 {
        let mut total = 0.0;
        for b in &self.buckets {
            let mut frac = b.count as f64;
            for p in &query.predicates {
                let dim = p.col;
                let (blo, bhi) = (b.lo[dim], b.hi[dim]);
                let width = bhi - blo + 1.0;
                let f = if p.kind == PredicateKind::Equality {
                    let v = p.lo.unwrap_or(f64::NAN);
                    if v >= blo && v <= bhi {
                        1.0 / width
                    } else {
                        0.0
                    }
                } else {
                    // Snap range bounds to the integer lattice of the encoded
                    // domain; an invalid predicate contains no lattice point.
                    let (lo, hi) = p.interval();
                    let qlo = if lo.is_finite() { lo.ceil() } else { blo };
                    let qhi = if hi.is_finite() { hi.floor() } else { bhi };
                    let overlap = (qhi.min(bhi) - qlo.max(blo) + 1.0).max(0.0);
                    (overlap / width).min(1.0)
                };
                frac *= f;
                if frac == 0.0 {
                    break;
                }
            }
            total += frac;
        }
        total
    }

    fn update(&mut self, new_table: &Table) -> Result<Duration> {
        let t0 = Instant::now();
        *self = Self::build(new_table, self.budget)?;
        Ok(t0.elapsed())
    }

    fn snapshot(&self) -> Box<dyn Estimator> {
        Box::new(self.clone())
    }

    fn size_bytes(&self) -> usize {
        self.buckets.len() * bucket_cost_bytes(self.dims)
    }
}
