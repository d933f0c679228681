//! Dynamic-environment simulation: correlated data append, measured model
//! update, and timeline routing between the stale snapshot and the updated
//! model.
//!
//! The timeline is `[0, T]` with `n` queries arriving uniformly. The model
//! update starts at time 0 and takes `t_u`; the first `floor(n * t_u / T)`
//! queries are answered by the pre-update snapshot, the rest by the updated
//! model. Updates that do not finish within `T` route everything to the
//! stale model and flag the run.

use std::time::{Duration, Instant};

use rand::seq::index::sample as sample_indices;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::estimator::{derive_seed, q_error, summarize, ErrorSummary, Estimator};
use crate::query::Query;
use crate::table::Table;
use crate::workload::LabeledQuery;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct UpdateSpec {
    /// Fraction of the original row count to append, in `(0, 1]`.
    pub append_fraction: f64,
    pub seed: u64,
}

impl Default for UpdateSpec {
    fn default() -> Self {
        UpdateSpec {
            append_fraction: 0.2,
            seed: 0,
        }
    }
}

/// Builds the updated table: a copy of the original with every column sorted
/// individually (maximizing rank correlation between all column pairs), from
/// which `ceil(fraction * rows)` rows are sampled without replacement and
/// appended to the original.
pub fn make_appended_table(table: &Table, spec: &UpdateSpec) -> Result<Table> {
    if table.row_count() == 0 {
        return Err(Error::EmptyTable);
    }
    if !(0.0 < spec.append_fraction && spec.append_fraction <= 1.0) {
        return Err(Error::InvalidConfig(
            "append_fraction must be in (0, 1]".into(),
        ));
    }
    let n = table.row_count();
    let take = ((spec.append_fraction * n as f64).ceil() as usize).max(1);

    let sorted_columns: Vec<Vec<f64>> = (0..table.n_cols())
        .map(|c| {
            let mut col = table.column(c).to_vec();
            col.sort_by(|a, b| a.partial_cmp(b).unwrap());
            col
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut picks = sample_indices(&mut rng, n, take).into_vec();
    picks.sort_unstable();

    let columns: Vec<Vec<f64>> = (0..table.n_cols())
        .map(|c| {
            let mut col = table.column(c).to_vec();
            col.extend(picks.iter().map(|&r| sorted_columns[c][r]));
            col
        })
        .collect();
    let dictionaries = (0..table.n_cols())
        .map(|c| table.dictionary(c).map(<[String]>::to_vec))
        .collect();
    Table::new(table.schema().to_vec(), columns, dictionaries)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DynamicConfig {
    /// Timeline length `T`, in the same unit as `t_u` (seconds).
    pub t_total: f64,
    /// Master seed for per-query estimate seeds.
    pub seed: u64,
    /// Mock clock: when set, routing uses this instead of the measured
    /// update time, keeping the arithmetic deterministic in tests.
    pub t_u_override: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DynamicReport {
    pub estimator: String,
    pub t_u: f64,
    pub t_total: f64,
    /// Whether `t_u` came from the mock clock.
    pub injected: bool,
    pub finished: bool,
    pub failed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub stale_count: usize,
    pub updated_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stale: Option<ErrorSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub updated: Option<ErrorSummary>,
    pub combined: ErrorSummary,
    /// Headline metric: the combined 99th-percentile q-error.
    pub headline_p99: f64,
}

/// Runs the timeline: snapshot, update against `new_table`, route the
/// labeled queries (labels must come from `new_table`), and summarize
/// q-errors per phase. An update error routes everything to the stale model
/// and marks the report failed.
pub fn run_dynamic(
    estimator: &mut dyn Estimator,
    new_table: &Table,
    queries: &[LabeledQuery],
    cfg: &DynamicConfig,
) -> Result<DynamicReport> {
    if queries.is_empty() {
        return Err(Error::EmptyInput);
    }
    if cfg.t_total <= 0.0 {
        return Err(Error::InvalidConfig("t_total must be positive".into()));
    }
    let n = queries.len();
    let stale_model = estimator.snapshot();

    let (t_u_measured, failure) = match estimator.update(new_table) {
        Ok(d) => (d.as_secs_f64(), None),
        Err(e) => (f64::INFINITY, Some(e.to_string())),
    };
    let t_u = cfg.t_u_override.unwrap_or(t_u_measured);
    let failed = failure.is_some();
    let finished = !failed && t_u <= cfg.t_total;

    let stale_count = if finished {
        ((n as f64) * t_u / cfg.t_total).floor() as usize
    } else {
        n
    };
    let updated_count = n - stale_count;

    let mut stale_errors = Vec::with_capacity(stale_count);
    let mut updated_errors = Vec::with_capacity(updated_count);
    for (i, lq) in queries.iter().enumerate() {
        let seed = derive_seed(cfg.seed, i as u64);
        let act = lq.cardinality as f64;
        if i < stale_count {
            stale_errors.push(q_error(stale_model.estimate(&lq.query, seed), act));
        } else {
            updated_errors.push(q_error(estimator.estimate(&lq.query, seed), act));
        }
    }

    let combined: Vec<f64> = stale_errors
        .iter()
        .chain(updated_errors.iter())
        .copied()
        .collect();
    let combined = summarize(&combined)?;
    Ok(DynamicReport {
        estimator: estimator.name().to_owned(),
        t_u,
        t_total: cfg.t_total,
        injected: cfg.t_u_override.is_some(),
        finished,
        failed,
        error: failure,
        stale_count,
        updated_count,
        stale: (!stale_errors.is_empty()).then(|| summarize(&stale_errors).unwrap()),
        updated: (!updated_errors.is_empty()).then(|| summarize(&updated_errors).unwrap()),
        headline_p99: combined.p99,
        combined,
    })
}

/// An estimator stub whose update takes a configured amount of (virtual)
/// time; used to exercise the routing arithmetic deterministically.
#[derive(Clone)]
pub struct FixedDelayEstimator {
    pub value: f64,
    pub update_delay: Duration,
}

impl Estimator for FixedDelayEstimator {
    fn name(&self) -> &str {
        "mock"
    }

    fn estimate(&self, _query: &Query, _seed: u64) -> f64 {
        self.value
    }

    fn update(&mut self, _new_table: &Table) -> Result<Duration> {
        let _ = Instant::now();
        Ok(self.update_delay)
    }

    fn snapshot(&self) -> Box<dyn Estimator> {
        Box::new(self.clone())
    }

    fn size_bytes(&self) -> usize {
        16
    }
}
