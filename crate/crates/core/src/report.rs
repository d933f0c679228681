//! Report rows and their CSV / text renderings. All emission is
//! deterministic: fixed column order, fixed float formatting.

use serde::{Deserialize, Serialize};

use crate::estimator::ErrorSummary;
use crate::rules::{RuleKind, RuleReport};

/// One line of a static-evaluation error report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorReportRow {
    pub estimator: String,
    pub dataset: String,
    /// "overall" or "d=<predicate count>".
    pub group: String,
    pub p50: f64,
    pub p95: f64,
    pub p99: f64,
    pub max: f64,
    pub count: usize,
}

impl ErrorReportRow {
    pub fn new(estimator: &str, dataset: &str, group: &str, s: &ErrorSummary) -> Self {
        ErrorReportRow {
            estimator: estimator.to_owned(),
            dataset: dataset.to_owned(),
            group: group.to_owned(),
            p50: s.p50,
            p95: s.p95,
            p99: s.p99,
            max: s.max,
            count: s.count,
        }
    }
}

pub fn error_rows_csv(rows: &[ErrorReportRow]) -> String {
    let mut out = String::from("estimator,dataset,group,p50,p95,p99,max,count\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.estimator, r.dataset, r.group, r.p50, r.p95, r.p99, r.max, r.count
        ));
    }
    out
}

/// Rules-by-estimators verdict matrix, one glyph per cell plus the violation
/// rate for violated cells.
pub fn rules_matrix_text(reports: &[RuleReport]) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<14}", "rule"));
    for r in reports {
        out.push_str(&format!("{:>12}", r.estimator));
    }
    out.push('\n');
    for rule in RuleKind::ALL {
        out.push_str(&format!("{:<14}", rule.label()));
        for rep in reports {
            let res = rep.result(rule);
            let cell = if res.satisfied {
                "ok".to_string()
            } else {
                format!("x({:.4})", res.violation_rate)
            };
            out.push_str(&format!("{cell:>12}"));
        }
        out.push('\n');
    }
    out
}

pub fn rules_matrix_csv(reports: &[RuleReport]) -> String {
    let mut out = String::from(
        "estimator,rule,probes,skipped,violations,violation_rate,max_violation,verdict\n",
    );
    for rep in reports {
        for res in &rep.results {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                rep.estimator,
                res.rule.label(),
                res.probes,
                res.skipped,
                res.violations,
                res.violation_rate,
                res.max_violation,
                if res.satisfied {
                    "satisfied"
                } else {
                    "violated"
                }
            ));
        }
    }
    out
}

/// One (estimator, T) cell of a dynamic sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DynamicSweepRow {
    pub estimator: String,
    pub t_total: f64,
    pub t_u: f64,
    pub finished: bool,
    pub p99: f64,
}

pub fn dynamic_sweep_csv(rows: &[DynamicSweepRow]) -> String {
    let mut out = String::from("estimator,t_total,t_u,finished,p99\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.estimator, r.t_total, r.t_u, r.finished, r.p99
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::RuleResult;

    #[test]
    fn csv_shapes() {
        let s = ErrorSummary {
            p50: 1.0,
            p95: 2.0,
            p99: 4.0,
            max: 8.0,
            count: 100,
        };
        let rows = vec![ErrorReportRow::new("avi", "synth", "overall", &s)];
        let csv = error_rows_csv(&rows);
        assert!(csv.starts_with("estimator,dataset,group,p50,p95,p99,max,count\n"));
        assert!(csv.contains("avi,synth,overall,1,2,4,8,100\n"));
    }

    #[test]
    fn matrix_renders_all_rules() {
        let report = RuleReport {
            estimator: "avi".into(),
            results: RuleKind::ALL
                .iter()
                .map(|&rule| RuleResult {
                    rule,
                    probes: 10,
                    skipped: 0,
                    violations: 0,
                    violation_rate: 0.0,
                    max_violation: 0.0,
                    result_range: None,
                    satisfied: true,
                })
                .collect(),
        };
        let text = rules_matrix_text(std::slice::from_ref(&report));
        for rule in RuleKind::ALL {
            assert!(text.contains(rule.label()));
        }
        let csv = rules_matrix_csv(&[report]);
        assert_eq!(csv.lines().count(), 6);
    }
}
