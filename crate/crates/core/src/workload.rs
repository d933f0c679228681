//! Seeded workload generator and exact labeling.
//!
//! Queries are hyper-rectangles controlled by a per-column center and width.
//! Centers come from a random data tuple (probability `p_center_data`) or are
//! drawn independently per column from the column domain (out-of-domain);
//! widths are uniform over `[0, size_i]` or exponential with rate
//! `lambda_factor / size_i`. Bounds falling outside the column domain turn
//! that side into an open range. Categorical columns always receive an
//! equality predicate on the center value.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::query::{Predicate, Query};
use crate::table::{ColumnKind, DomainStats, Table};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorkloadConfig {
    pub n_queries: usize,
    pub seed: u64,
    /// Probability that the query center is a data tuple (vs out-of-domain).
    #[serde(default = "default_p_center_data")]
    pub p_center_data: f64,
    /// Probability that a width is uniform over `[0, size_i]` (vs exponential).
    #[serde(default = "default_p_width_uniform")]
    pub p_width_uniform: f64,
    /// Exponential width rate is `lambda_factor / size_i`.
    #[serde(default = "default_lambda_factor")]
    pub lambda_factor: f64,
}

fn default_p_center_data() -> f64 {
    0.9
}
fn default_p_width_uniform() -> f64 {
    0.5
}
fn default_lambda_factor() -> f64 {
    10.0
}

impl WorkloadConfig {
    pub fn new(n_queries: usize, seed: u64) -> Self {
        WorkloadConfig {
            n_queries,
            seed,
            p_center_data: default_p_center_data(),
            p_width_uniform: default_p_width_uniform(),
            lambda_factor: default_lambda_factor(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_queries == 0 {
            return Err(Error::InvalidConfig("n_queries must be >= 1".into()));
        }
        for (name, p) in [
            ("p_center_data", self.p_center_data),
            ("p_width_uniform", self.p_width_uniform),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} must be in [0,1]")));
            }
        }
        if self.lambda_factor <= 0.0 {
            return Err(Error::InvalidConfig(
                "lambda_factor must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// How a query was generated; useful for workload diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryMeta {
    pub ood_center: bool,
}

/// A query paired with its exact cardinality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledQuery {
    pub query: Query,
    pub cardinality: u64,
    pub selectivity: f64,
}

/// Builds the range predicate for a numeric column from a center and width,
/// converting any side that leaves `[min, max]` into an open range. When both
/// sides leave the domain the predicate degenerates to the full-domain closed
/// range.
pub fn range_predicate(col: usize, center: f64, width: f64, stats: &DomainStats) -> Predicate {
    let lo = center - width / 2.0;
    let hi = center + width / 2.0;
    let below = lo < stats.min;
    let above = hi > stats.max;
    match (below, above) {
        (true, true) => Predicate::closed(col, stats.min, stats.max),
        (true, false) => Predicate::open_low(col, hi),
        (false, true) => Predicate::open_high(col, lo),
        (false, false) => Predicate::closed(col, lo, hi),
    }
}

fn draw_width(stats: &DomainStats, cfg: &WorkloadConfig, rng: &mut impl Rng) -> f64 {
    if stats.size <= 0.0 {
        return 0.0;
    }
    if rng.gen_bool(cfg.p_width_uniform) {
        rng.gen_range(0.0..=stats.size)
    } else {
        // Inverse-CDF exponential draw, capped at the domain size.
        let rate = cfg.lambda_factor / stats.size;
        let u: f64 = rng.gen_range(0.0..1.0);
        (-(1.0 - u).ln() / rate).min(stats.size)
    }
}

/// Generates one query; `stats` must be `table.all_domain_stats()`.
pub fn gen_query_with_meta(
    table: &Table,
    stats: &[DomainStats],
    cfg: &WorkloadConfig,
    rng: &mut ChaCha8Rng,
) -> (Query, QueryMeta) {
    let n_cols = table.n_cols();
    let d = rng.gen_range(1..=n_cols);
    let mut cols: Vec<usize> = sample(rng, n_cols, d).into_vec();
    cols.sort_unstable();

    let ood = !rng.gen_bool(cfg.p_center_data);
    let data_row = if ood {
        None
    } else {
        Some(rng.gen_range(0..table.row_count()))
    };

    let mut predicates = Vec::with_capacity(d);
    for &col in &cols {
        let st = &stats[col];
        let categorical = table.schema()[col].kind == ColumnKind::Categorical;
        let center = match data_row {
            Some(row) => table.value(col, row),
            None => {
                if categorical {
                    let dict_len = table.dictionary(col).map_or(1, <[String]>::len);
                    rng.gen_range(0..dict_len) as f64
                } else {
                    rng.gen_range(st.min..=st.max)
                }
            }
        };
        if categorical {
            predicates.push(Predicate::equality(col, center));
        } else {
            let width = draw_width(st, cfg, rng);
            predicates.push(range_predicate(col, center, width, st));
        }
    }
    (Query::new(predicates), QueryMeta { ood_center: ood })
}

/// Generates `cfg.n_queries` queries, deterministic given the seed.
pub fn gen_workload(table: &Table, cfg: &WorkloadConfig) -> Result<Vec<Query>> {
    Ok(gen_workload_with_meta(table, cfg)?
        .into_iter()
        .map(|(q, _)| q)
        .collect())
}

/// As [`gen_workload`], additionally reporting per-query generation metadata.
pub fn gen_workload_with_meta(
    table: &Table,
    cfg: &WorkloadConfig,
) -> Result<Vec<(Query, QueryMeta)>> {
    cfg.validate()?;
    if table.row_count() == 0 {
        return Err(Error::EmptyTable);
    }
    let stats = table.all_domain_stats()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok((0..cfg.n_queries)
        .map(|_| gen_query_with_meta(table, &stats, cfg, &mut rng))
        .collect())
}

/// Labels every query with its exact cardinality (fan-out across queries;
/// output order matches input order).
pub fn label(table: &Table, queries: &[Query]) -> Vec<LabeledQuery> {
    let rows = table.row_count().max(1) as f64;
    queries
        .par_iter()
        .map(|q| {
            let cardinality = table.exact_count(q);
            LabeledQuery {
                query: q.clone(),
                cardinality,
                selectivity: cardinality as f64 / rows,
            }
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct QueryLine {
    predicates: Vec<Predicate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cardinality: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    selectivity: Option<f64>,
}

/// Writes queries as JSON lines (one object per line, fixed field order).
pub fn write_queries(path: impl AsRef<Path>, queries: &[Query]) -> Result<()> {
    write_lines(
        path,
        queries.iter().map(|q| QueryLine {
            predicates: q.predicates.clone(),
            cardinality: None,
            selectivity: None,
        }),
    )
}

/// Writes labeled queries as JSON lines.
pub fn write_labeled(path: impl AsRef<Path>, labeled: &[LabeledQuery]) -> Result<()> {
    write_lines(
        path,
        labeled.iter().map(|l| QueryLine {
            predicates: l.query.predicates.clone(),
            cardinality: Some(l.cardinality),
            selectivity: Some(l.selectivity),
        }),
    )
}

fn write_lines(path: impl AsRef<Path>, lines: impl Iterator<Item = QueryLine>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for line in lines {
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Reads a workload file; labels are present only if the file carried them.
pub fn read_workload(path: impl AsRef<Path>) -> Result<Vec<(Query, Option<LabeledQuery>)>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: QueryLine = serde_json::from_str(&line)?;
        let query = Query::new(rec.predicates);
        let labeled = match (rec.cardinality, rec.selectivity) {
            (Some(c), Some(s)) => Some(LabeledQuery {
                query: query.clone(),
                cardinality: c,
                selectivity: s,
            }),
            _ => None,
        };
        out.push((query, labeled));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::PredicateKind;

    fn toy_table() -> Table {
        // 100 rows, two numeric columns over 0..10.
        let c1: Vec<f64> = (0..100).map(|i| (i % 10) as f64).collect();
        let c2: Vec<f64> = (0..100).map(|i| ((i * 3) % 10) as f64).collect();
        Table::from_numeric_columns(&["a", "b"], vec![c1, c2]).unwrap()
    }

    #[test]
    fn clamping_converts_to_open_low() {
        // Domain [0,100], center 10, width 40: lo = -10 < 0 so the predicate
        // becomes A <= 30 with the upper bound kept as computed.
        let stats = DomainStats {
            min: 0.0,
            max: 100.0,
            size: 100.0,
            distinct: 101,
        };
        let p = range_predicate(0, 10.0, 40.0, &stats);
        assert_eq!(p.kind, PredicateKind::OpenLow);
        assert_eq!(p.hi, Some(30.0));
        assert_eq!(p.lo, None);
    }

    #[test]
    fn both_sides_out_becomes_full_domain() {
        let stats = DomainStats {
            min: 0.0,
            max: 10.0,
            size: 10.0,
            distinct: 11,
        };
        let p = range_predicate(0, 5.0, 100.0, &stats);
        assert_eq!(p.kind, PredicateKind::ClosedRange);
        assert_eq!((p.lo, p.hi), (Some(0.0), Some(10.0)));
    }

    #[test]
    fn deterministic_given_seed() {
        let t = toy_table();
        let cfg = WorkloadConfig::new(50, 7);
        let a = gen_workload(&t, &cfg).unwrap();
        let b = gen_workload(&t, &cfg).unwrap();
        assert_eq!(a, b);
        let c = gen_workload(&t, &WorkloadConfig::new(50, 8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn predicate_counts_uniform_on_two_columns() {
        // Chi-square goodness of fit for d in {1,2} over 10K queries,
        // significance 0.01 (critical value 6.635 at 1 dof).
        let t = toy_table();
        let cfg = WorkloadConfig::new(10_000, 42);
        let queries = gen_workload(&t, &cfg).unwrap();
        let ones = queries.iter().filter(|q| q.predicate_count() == 1).count() as f64;
        let twos = queries.len() as f64 - ones;
        let expected = queries.len() as f64 / 2.0;
        let chi2 = (ones - expected).powi(2) / expected + (twos - expected).powi(2) / expected;
        assert!(chi2 < 6.635, "chi2 = {chi2}");
    }

    #[test]
    fn ood_fraction_near_ten_percent() {
        let t = toy_table();
        let cfg = WorkloadConfig::new(10_000, 11);
        let meta = gen_workload_with_meta(&t, &cfg).unwrap();
        let ood = meta.iter().filter(|(_, m)| m.ood_center).count() as f64;
        let frac = ood / meta.len() as f64;
        assert!((frac - 0.10).abs() < 0.01, "ood fraction {frac}");
    }

    #[test]
    fn generated_closed_ranges_stay_in_domain() {
        let t = toy_table();
        let stats = t.all_domain_stats().unwrap();
        let cfg = WorkloadConfig::new(5_000, 3);
        for q in gen_workload(&t, &cfg).unwrap() {
            for p in &q.predicates {
                if p.kind == PredicateKind::ClosedRange {
                    let st = &stats[p.col];
                    let (lo, hi) = p.interval();
                    assert!(st.min <= lo && lo <= hi && hi <= st.max);
                }
            }
        }
    }

    #[test]
    fn labels_match_hand_counts() {
        let t = Table::from_numeric_columns(
            &["a", "b"],
            vec![
                vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0],
                vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 3.0],
            ],
        )
        .unwrap();
        let queries = vec![
            Query::all(),
            Query::new(vec![
                Predicate::closed(0, 2.0, 5.0),
                Predicate::equality(1, 1.0),
            ]),
            Query::new(vec![Predicate::invalid(0, 9.0, 1.0)]),
        ];
        let labeled = label(&t, &queries);
        assert_eq!(labeled[0].cardinality, 10);
        assert_eq!(labeled[0].selectivity, 1.0);
        // rows with 2<=a<=5 and b==1: a in {4,5} -> 2 rows
        assert_eq!(labeled[1].cardinality, 2);
        assert_eq!(labeled[2].cardinality, 0);
    }

    #[test]
    fn workload_file_roundtrip() {
        let t = toy_table();
        let cfg = WorkloadConfig::new(20, 5);
        let queries = gen_workload(&t, &cfg).unwrap();
        let labeled = label(&t, &queries);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wl.jsonl");
        write_labeled(&path, &labeled).unwrap();
        let back = read_workload(&path).unwrap();
        assert_eq!(back.len(), labeled.len());
        for ((q, lab), orig) in back.iter().zip(&labeled) {
            assert_eq!(q, &orig.query);
            assert_eq!(lab.as_ref().unwrap().cardinality, orig.cardinality);
        }
    }
}
