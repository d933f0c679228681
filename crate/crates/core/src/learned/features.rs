//! Query featurization for the regression estimator: normalized per-column
//! range bounds plus three cheap heuristic selectivity features (AVI, MinSel,
//! EBO), log-transformed with a floor of one row.

use serde::{Deserialize, Serialize};

use crate::query::{PredicateKind, Query};
use crate::table::{DomainStats, Table};
use crate::traditional::Hist1D;
use crate::Result;

/// Per-column histograms and domain stats backing featurization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureExtractor {
    hists: Vec<Hist1D>,
    stats: Vec<DomainStats>,
    row_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryFeatures {
    /// Normalized `(lo, hi)` per column; unconstrained columns are `(0, 1)`.
    pub bounds: Vec<(f64, f64)>,
    pub log_avi: f64,
    pub log_min_sel: f64,
    pub log_ebo: f64,
}

impl QueryFeatures {
    /// Flat feature vector: `2n` bounds followed by the three CE features.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.bounds.len() * 2 + 3);
        for &(lo, hi) in &self.bounds {
            v.push(lo);
            v.push(hi);
        }
        v.push(self.log_avi);
        v.push(self.log_min_sel);
        v.push(self.log_ebo);
        v
    }
}

impl FeatureExtractor {
    pub fn build(table: &Table, buckets_per_column: usize) -> Result<Self> {
        let hists = (0..table.n_cols())
            .map(|c| Hist1D::build(table.column(c), buckets_per_column))
            .collect();
        Ok(FeatureExtractor {
            hists,
            stats: table.all_domain_stats()?,
            row_count: table.row_count(),
        })
    }

    pub fn n_cols(&self) -> usize {
        self.stats.len()
    }

    fn normalize(&self, col: usize, v: f64) -> f64 {
        let st = &self.stats[col];
        if st.size <= 0.0 {
            0.5
        } else {
            ((v - st.min) / st.size).clamp(0.0, 1.0)
        }
    }

    /// Featurizes a query. Invalid predicates keep their inverted normalized
    /// bounds; their heuristic selectivity is zero before the one-row floor.
    pub fn featurize(&self, query: &Query) -> QueryFeatures {
        let mut bounds = vec![(0.0, 1.0); self.stats.len()];
        let mut sels: Vec<f64> = Vec::with_capacity(query.predicates.len());
        for p in &query.predicates {
            let (lo, hi) = p.interval();
            bounds[p.col] = match p.kind {
                PredicateKind::OpenLow => (0.0, self.normalize(p.col, hi)),
                PredicateKind::OpenHigh => (self.normalize(p.col, lo), 1.0),
                _ => (self.normalize(p.col, lo), self.normalize(p.col, hi)),
            };
            sels.push(self.hists[p.col].selectivity(p));
        }

        let avi: f64 = sels.iter().product();
        let min_sel = sels.iter().copied().fold(1.0, f64::min);
        sels.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let ebo: f64 = sels
            .iter()
            .take(4)
            .enumerate()
            .map(|(k, &s)| s.powf(1.0 / (1 << k) as f64))
            .product();

        let floor = if self.row_count > 0 {
            1.0 / self.row_count as f64
        } else {
            1.0
        };
        QueryFeatures {
            bounds,
            log_avi: avi.max(floor).ln(),
            log_min_sel: min_sel.max(floor).ln(),
            log_ebo: ebo.max(floor).ln(),
        }
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::Predicate;
    use crate::table::Table;

    /// 100 rows, values 0..9 ten times each: equality selectivities are
    /// exactly 0.1 and ranges are exact multiples of 0.1.
    fn extractor() -> FeatureExtractor {
        let col: Vec<f64> = (0..100).map(|i| (i % 10) as f64).collect();
        let t = Table::from_numeric_columns(&["a", "b"], vec![col.clone(), col]).unwrap();
        FeatureExtractor::build(&t, 10).unwrap()
    }

    #[test]
    fn empty_query_is_neutral() {
        let fx = extractor();
        let f = fx.featurize(&Query::all());
        assert_eq!(f.bounds, vec![(0.0, 1.0), (0.0, 1.0)]);
        assert_eq!(f.log_avi, 0.0);
        assert_eq!(f.log_min_sel, 0.0);
        assert_eq!(f.log_ebo, 0.0);
    }

    #[test]
    fn single_predicate_features_coincide() {
        let fx = extractor();
        let q = Query::new(vec![Predicate::equality(0, 3.0)]);
        let f = fx.featurize(&q);
        let expected = (0.1f64).ln();
        assert!((f.log_avi - expected).abs() < 1e-12);
        assert!((f.log_min_sel - expected).abs() < 1e-12);
        assert!((f.log_ebo - expected).abs() < 1e-12);
        assert_eq!(f.bounds[0], (3.0 / 9.0, 3.0 / 9.0));
    }

    #[test]
    fn ebo_formula_hand_example() {
        // selectivities 0.1 (equality) and 0.4 (range over values 0..3):
        // AVI 0.04, MinSel 0.1, EBO = 0.1 * 0.4^(1/2).
        let fx = extractor();
        let q = Query::new(vec![
            Predicate::equality(0, 7.0),
            Predicate::closed(1, 0.0, 3.0),
        ]);
        let f = fx.featurize(&q);
        assert!((f.log_avi - (0.04f64).ln()).abs() < 1e-9);
        assert!((f.log_min_sel - (0.1f64).ln()).abs() < 1e-9);
        let ebo = 0.1 * (0.4f64).sqrt();
        assert!((f.log_ebo - ebo.ln()).abs() < 1e-9, "log_ebo {}", f.log_ebo);
    }

    #[test]
    fn open_ranges_normalize_one_side() {
        let fx = extractor();
        let q = Query::new(vec![Predicate::open_low(0, 4.5)]);
        let f = fx.featurize(&q);
        assert_eq!(f.bounds[0], (0.0, 0.5));
        let q = Query::new(vec![Predicate::open_high(1, 4.5)]);
        let f = fx.featurize(&q);
        assert_eq!(f.bounds[1], (0.5, 1.0));
    }

    #[test]
    fn invalid_predicate_keeps_inverted_bounds_and_floors_sel() {
        let fx = extractor();
        let q = Query::new(vec![Predicate::invalid(0, 100.0, 1.0)]);
        let f = fx.featurize(&q);
        let (lo, hi) = f.bounds[0];
        assert!(lo > hi, "bounds stay inverted: ({lo}, {hi})");
        assert!((f.log_avi - (0.01f64).ln()).abs() < 1e-12); // floored at 1/100
    }

    #[test]
    fn feature_vector_layout() {
        let fx = extractor();
        let v = fx.featurize(&Query::all()).to_vec();
        assert_eq!(v.len(), 2 * 2 + 3);
    }
}
