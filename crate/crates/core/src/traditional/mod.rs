//! Traditional estimators: uniform sampling (with and without the
//! independence fallback), per-column equi-depth histograms combined under
//! attribute-value independence, a MaxDiff multidimensional histogram, and
//! Gaussian kernel density estimation.

mod avi;
mod kde;
mod mhist;
mod sample;

pub use avi::{AviEstimator, Hist1D};
pub use kde::KdeEstimator;
pub use mhist::MhistEstimator;
pub use sample::SampleEstimator;

use serde::{Deserialize, Serialize};

use crate::table::Table;

/// The default model budget: 1.5% of the data size.
pub const DEFAULT_BUDGET_FRACTION: f64 = 0.015;

/// Size budget for a model, either relative to the table's data size
/// (`row_count * column_count * 4` bytes) or absolute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    FractionOfData(f64),
    Bytes(usize),
}

impl Default for Budget {
    fn default() -> Self {
        Budget::FractionOfData(DEFAULT_BUDGET_FRACTION)
    }
}

impl Budget {
    pub fn resolve(&self, table: &Table) -> usize {
        match *self {
            Budget::FractionOfData(f) => (f * table.data_size_bytes() as f64).floor() as usize,
            Budget::Bytes(b) => b,
        }
    }
}
