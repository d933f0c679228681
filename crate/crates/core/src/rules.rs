//! Five logical rules probed against any estimator: monotonicity under
//! predicate tightening, consistency under range splits, stability across
//! seeds, and the two fidelity rules (full-domain queries estimate the row
//! count; unsatisfiable predicates estimate zero).
//!
//! Probe queries and perturbations derive from per-probe seed streams, so a
//! report is reproducible given (estimator, seed). Stochastic estimators are
//! probed with one fixed seed per comparison pair by default, which tests
//! the model's logic rather than its sampling noise; the independent-seeds
//! mode reproduces how instability induces the other violations.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::estimator::{derive_seed, Estimator};
use crate::query::{Predicate, PredicateKind, Query};
use crate::table::{DomainStats, Table};
use crate::workload::{gen_query_with_meta, WorkloadConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedMode {
    /// One seed per probe pair: both sides of a comparison use it.
    Paired,
    /// Each estimate draws its own seed; instability leaks into the rules.
    Independent,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RuleCheckConfig {
    pub probes: usize,
    pub stability_repeats: usize,
    pub seed: u64,
    pub seed_mode: SeedMode,
    pub eps_monotonicity: f64,
    pub eps_consistency: f64,
    pub eps_fidelity_a: f64,
    pub eps_fidelity_b: f64,
}

impl Default for RuleCheckConfig {
    fn default() -> Self {
        RuleCheckConfig {
            probes: 10_000,
            stability_repeats: 2_000,
            seed: 0,
            seed_mode: SeedMode::Paired,
            eps_monotonicity: 1e-9,
            eps_consistency: 1e-6,
            eps_fidelity_a: 1e-6,
            eps_fidelity_b: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Monotonicity,
    Consistency,
    Stability,
    FidelityA,
    FidelityB,
}

impl RuleKind {
    pub const ALL: [RuleKind; 5] = [
        RuleKind::Monotonicity,
        RuleKind::Consistency,
        RuleKind::Stability,
        RuleKind::FidelityA,
        RuleKind::FidelityB,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            RuleKind::Monotonicity => "monotonicity",
            RuleKind::Consistency => "consistency",
            RuleKind::Stability => "stability",
            RuleKind::FidelityA => "fidelity-a",
            RuleKind::FidelityB => "fidelity-b",
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RuleResult {
    pub rule: RuleKind,
    /// Probes actually evaluated (skipped ones are not counted).
    pub probes: usize,
    pub skipped: usize,
    pub violations: usize,
    pub violation_rate: f64,
    /// Largest observed violation in rule-specific units (relative excess
    /// for monotonicity/consistency/fidelity-A, rows for fidelity-B, result
    /// spread for stability).
    pub max_violation: f64,
    /// Stability only: smallest and largest observed estimate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result_range: Option<(f64, f64)>,
    /// Zero violations over the probe budget.
    pub satisfied: bool,
}

impl RuleResult {
    fn new(
        rule: RuleKind,
        probes: usize,
        skipped: usize,
        violations: usize,
        max_violation: f64,
    ) -> Self {
        RuleResult {
            rule,
            probes,
            skipped,
            violations,
            violation_rate: if probes > 0 {
                violations as f64 / probes as f64
            } else {
                0.0
            },
            max_violation,
            result_range: None,
            satisfied: violations == 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleReport {
    pub estimator: String,
    pub results: Vec<RuleResult>,
}

impl RuleReport {
    pub fn result(&self, rule: RuleKind) -> &RuleResult {
        self.results.iter().find(|r| r.rule == rule).unwrap()
    }

    pub fn all_satisfied(&self) -> bool {
        self.results.iter().all(|r| r.satisfied)
    }
}

fn probe_rng(master: u64, salt: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master ^ salt);
    rng.set_stream(index);
    rng
}

fn pair_seeds(cfg: &RuleCheckConfig, salt: u64, index: u64) -> (u64, u64) {
    let base = derive_seed(cfg.seed ^ salt, index);
    match cfg.seed_mode {
        SeedMode::Paired => (base, base),
        SeedMode::Independent => (base, derive_seed(base, 1)),
    }
}

fn gen_probe_query(
    table: &Table,
    stats: &[DomainStats],
    rng: &mut ChaCha8Rng,
    cfg_seed: u64,
) -> Query {
    let wl = WorkloadConfig::new(1, cfg_seed);
    gen_query_with_meta(table, stats, &wl, rng).0
}

/// Rule 1: tightening a range predicate must not increase the estimate.
pub fn probe_monotonicity(
    estimator: &dyn Estimator,
    table: &Table,
    cfg: &RuleCheckConfig,
) -> Result<RuleResult> {
    let stats = table.all_domain_stats()?;
    let mut violations = 0;
    let mut skipped = 0;
    let mut max_violation: f64 = 0.0;
    for i in 0..cfg.probes as u64 {
        let mut rng = probe_rng(cfg.seed, 0x1, i);
        let query = gen_probe_query(table, &stats, &mut rng, cfg.seed);
        let tightenable: Vec<usize> = query
            .predicates
            .iter()
            .enumerate()
            .filter(|(_, p)| p.is_range())
            .map(|(idx, _)| idx)
            .collect();
        if tightenable.is_empty() {
            skipped += 1;
            continue;
        }
        let which = tightenable[rng.gen_range(0..tightenable.len())];
        let p = query.predicates[which];
        let st = &stats[p.col];
        let tightened = match p.kind {
            PredicateKind::ClosedRange => {
                let (lo, hi) = p.interval();
                let new_lo = rng.gen_range(lo..=hi);
                let new_hi = rng.gen_range(new_lo..=hi);
                Predicate::closed(p.col, new_lo, new_hi)
            }
            PredicateKind::OpenLow => {
                let hi = p.hi.unwrap();
                Predicate::open_low(p.col, rng.gen_range(st.min.min(hi)..=hi))
            }
            PredicateKind::OpenHigh => {
                let lo = p.lo.unwrap();
                Predicate::open_high(p.col, rng.gen_range(lo..=st.max.max(lo)))
            }
            _ => unreachable!("is_range filtered kinds"),
        };
        let mut tighter = query.clone();
        tighter.predicates[which] = tightened;

        let (s1, s2) = pair_seeds(cfg, 0x1, i);
        let before = estimator.estimate(&query, s1);
        let after = estimator.estimate(&tighter, s2);
        if after > before * (1.0 + cfg.eps_monotonicity) {
            violations += 1;
            max_violation = max_violation.max((after - before) / before.max(1.0));
        }
    }
    Ok(RuleResult::new(
        RuleKind::Monotonicity,
        cfg.probes - skipped,
        skipped,
        violations,
        max_violation,
    ))
}

/// Rule 2: an estimate must equal the sum of the estimates of the two
/// queries obtained by splitting a closed range at an interior integer.
pub fn probe_consistency(
    estimator: &dyn Estimator,
    table: &Table,
    cfg: &RuleCheckConfig,
) -> Result<RuleResult> {
    let stats = table.all_domain_stats()?;
    let mut violations = 0;
    let mut skipped = 0;
    let mut max_violation: f64 = 0.0;
    for i in 0..cfg.probes as u64 {
        let mut rng = probe_rng(cfg.seed, 0x2, i);
        let query = gen_probe_query(table, &stats, &mut rng, cfg.seed);
        // splittable: closed range containing at least two integers
        let splittable: Vec<usize> = query
            .predicates
            .iter()
            .enumerate()
            .filter(|(_, p)| {
                p.kind == PredicateKind::ClosedRange && {
                    let (lo, hi) = p.interval();
                    hi.floor() - lo.ceil() >= 1.0
                }
            })
            .map(|(idx, _)| idx)
            .collect();
        if splittable.is_empty() {
            skipped += 1;
            continue;
        }
        let which = splittable[rng.gen_range(0..splittable.len())];
        let p = query.predicates[which];
        let (lo, hi) = p.interval();
        let k = rng.gen_range(lo.ceil() as i64..=(hi.floor() as i64 - 1)) as f64;
        let mut left = query.clone();
        left.predicates[which] = Predicate::closed(p.col, lo, k);
        let mut right = query.clone();
        right.predicates[which] = Predicate::closed(p.col, k + 1.0, hi);

        let (s1, s2) = pair_seeds(cfg, 0x2, i);
        let whole = estimator.estimate(&query, s1);
        let parts = estimator.estimate(&left, s2) + estimator.estimate(&right, s2);
        let diff = (whole - parts).abs();
        if diff > cfg.eps_consistency * whole.max(1.0) {
            violations += 1;
            max_violation = max_violation.max(diff / whole.max(1.0));
        }
    }
    Ok(RuleResult::new(
        RuleKind::Consistency,
        cfg.probes - skipped,
        skipped,
        violations,
        max_violation,
    ))
}

/// Rule 3: repeated estimates of one query must be identical. Returns the
/// spread via `max_violation`.
pub fn probe_stability(
    estimator: &dyn Estimator,
    query: &Query,
    repeats: usize,
    seed: u64,
) -> RuleResult {
    let results: Vec<f64> = (0..repeats as u64)
        .map(|i| estimator.estimate(query, derive_seed(seed ^ 0x3, i)))
        .collect();
    let first = results[0];
    let violations = results.iter().filter(|&&r| r != first).count();
    let min = results.iter().copied().fold(f64::INFINITY, f64::min);
    let max = results.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut result = RuleResult::new(RuleKind::Stability, repeats, 0, violations, max - min);
    result.result_range = Some((min, max));
    result
}

/// Rule 4: querying the entire domain must estimate the row count.
pub fn probe_fidelity_a(
    estimator: &dyn Estimator,
    table: &Table,
    eps: f64,
    seed: u64,
) -> Result<RuleResult> {
    let stats = table.all_domain_stats()?;
    let query = full_domain_query(&stats);
    let n = table.row_count() as f64;
    let est = estimator.estimate(&query, derive_seed(seed, 0x4));
    let deviation = (est - n).abs();
    let violated = deviation > eps * n;
    Ok(RuleResult::new(
        RuleKind::FidelityA,
        1,
        0,
        usize::from(violated),
        deviation / n.max(1.0),
    ))
}

/// The all-columns full-domain query used by fidelity-A.
pub fn full_domain_query(stats: &[DomainStats]) -> Query {
    Query::new(
        stats
            .iter()
            .enumerate()
            .map(|(c, st)| Predicate::closed(c, st.min, st.max))
            .collect(),
    )
}

/// Rule 5: a query with an inverted-bound predicate must estimate zero.
pub fn probe_fidelity_b(
    estimator: &dyn Estimator,
    table: &Table,
    eps: f64,
    probes: usize,
    seed: u64,
) -> Result<RuleResult> {
    let stats = table.all_domain_stats()?;
    let mut violations = 0;
    let mut max_violation: f64 = 0.0;
    for i in 0..probes as u64 {
        let mut rng = probe_rng(seed, 0x5, i);
        let mut query = gen_probe_query(table, &stats, &mut rng, seed);
        let slot = rng.gen_range(0..query.predicates.len());
        let col = query.predicates[slot].col;
        let st = &stats[col];
        let hi = rng.gen_range(st.min..=st.max);
        let lo = hi + 1.0 + rng.gen_range(0.0..=st.size.max(1.0));
        query.predicates[slot] = Predicate::invalid(col, lo, hi);

        let est = estimator.estimate(&query, derive_seed(seed ^ 0x5, i));
        if est > eps {
            violations += 1;
            max_violation = max_violation.max(est);
        }
    }
    Ok(RuleResult::new(
        RuleKind::FidelityB,
        probes,
        0,
        violations,
        max_violation,
    ))
}

/// Picks a deterministic non-trivial probe query for the stability rule: the
/// first generated query that constrains some non-leading column to a strict
/// subset of its values while every earlier column still admits at least two
/// values. A query without such a shape forces a progressive sampler onto a
/// single path, which would hide any instability.
pub fn stability_probe_query(table: &Table, seed: u64) -> Result<Query> {
    let stats = table.all_domain_stats()?;
    let distinct: Vec<Vec<f64>> = (0..table.n_cols())
        .map(|c| {
            let mut vals = table.column(c).to_vec();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals.dedup();
            vals
        })
        .collect();
    let admissible = |q: &Query, col: usize| -> usize {
        match q.predicate_on(col) {
            None => distinct[col].len(),
            Some(p) => distinct[col].iter().filter(|&&v| p.matches(v)).count(),
        }
    };
    for i in 0..1000 {
        let mut rng = probe_rng(seed, 0x3, i);
        let q = gen_probe_query(table, &stats, &mut rng, seed);
        let nontrivial = (1..table.n_cols()).any(|col| {
            let here = admissible(&q, col);
            here >= 1
                && here < distinct[col].len()
                && (0..col).all(|earlier| admissible(&q, earlier) >= 2)
        });
        if nontrivial {
            return Ok(q);
        }
    }
    Err(Error::InvalidConfig(
        "no non-trivial stability query found in 1000 draws".into(),
    ))
}

/// Runs all five rules and assembles the report.
pub fn check_all(
    estimator: &dyn Estimator,
    table: &Table,
    cfg: &RuleCheckConfig,
) -> Result<RuleReport> {
    let stability_query = stability_probe_query(table, cfg.seed)?;
    let results = vec![
        probe_monotonicity(estimator, table, cfg)?,
        probe_consistency(estimator, table, cfg)?,
        probe_stability(estimator, &stability_query, cfg.stability_repeats, cfg.seed),
        probe_fidelity_a(estimator, table, cfg.eps_fidelity_a, cfg.seed)?,
        probe_fidelity_b(estimator, table, cfg.eps_fidelity_b, cfg.probes, cfg.seed)?,
    ];
    Ok(RuleReport {
        estimator: estimator.name().to_owned(),
        results,
    })
}
