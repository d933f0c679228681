//! Conjunctive range/equality queries over encoded column values.

use serde::{Deserialize, Serialize};

/// The shape of a single-column predicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredicateKind {
    /// `A = v` (stored as `lo = hi = v`).
    Equality,
    /// `lo <= A <= hi` with `lo <= hi`.
    ClosedRange,
    /// `A <= hi` (no lower bound).
    OpenLow,
    /// `lo <= A` (no upper bound).
    OpenHigh,
    /// `lo <= A <= hi` with `lo > hi`; satisfiable by no value.
    Invalid,
}

/// A predicate on one column, in encoded-value space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub col: usize,
    pub kind: PredicateKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
}

impl Predicate {
    pub fn equality(col: usize, value: f64) -> Self {
        Predicate {
            col,
            kind: PredicateKind::Equality,
            lo: Some(value),
            hi: Some(value),
        }
    }

    pub fn closed(col: usize, lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "closed range requires lo <= hi");
        Predicate {
            col,
            kind: PredicateKind::ClosedRange,
            lo: Some(lo),
            hi: Some(hi),
        }
    }

    pub fn open_low(col: usize, hi: f64) -> Self {
        Predicate {
            col,
            kind: PredicateKind::OpenLow,
            lo: None,
            hi: Some(hi),
        }
    }

    pub fn open_high(col: usize, lo: f64) -> Self {
        Predicate {
            col,
            kind: PredicateKind::OpenHigh,
            lo: Some(lo),
            hi: None,
        }
    }

    /// An explicitly unsatisfiable predicate (`lo > hi`). Only the rule
    /// checker constructs these; the workload generator never emits one.
    pub fn invalid(col: usize, lo: f64, hi: f64) -> Self {
        debug_assert!(lo > hi, "invalid predicate requires lo > hi");
        Predicate {
            col,
            kind: PredicateKind::Invalid,
            lo: Some(lo),
            hi: Some(hi),
        }
    }

    /// Does the encoded value satisfy this predicate?
    #[inline]
    pub fn matches(&self, v: f64) -> bool {
        match self.kind {
            PredicateKind::Equality => v == self.lo.unwrap_or(f64::NAN),
            PredicateKind::ClosedRange => {
                self.lo.is_some_and(|lo| v >= lo) && self.hi.is_some_and(|hi| v <= hi)
            }
            PredicateKind::OpenLow => self.hi.is_some_and(|hi| v <= hi),
            PredicateKind::OpenHigh => self.lo.is_some_and(|lo| v >= lo),
            PredicateKind::Invalid => false,
        }
    }

    /// Effective interval `[lo, hi]` with missing sides mapped to infinities.
    /// `Invalid` keeps its inverted bounds (`lo > hi`).
    #[inline]
    pub fn interval(&self) -> (f64, f64) {
        (
            self.lo.unwrap_or(f64::NEG_INFINITY),
            self.hi.unwrap_or(f64::INFINITY),
        )
    }

    /// A range predicate (anything but equality) that can be tightened.
    pub fn is_range(&self) -> bool {
        !matches!(self.kind, PredicateKind::Equality | PredicateKind::Invalid)
    }
}

/// A conjunction of predicates, at most one per column.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Query {
    pub predicates: Vec<Predicate>,
}

impl Query {
    pub fn new(predicates: Vec<Predicate>) -> Self {
        Query { predicates }
    }

    /// Query with no predicates; matches every row.
    pub fn all() -> Self {
        Query::default()
    }

    pub fn predicate_count(&self) -> usize {
        self.predicates.len()
    }

    /// The predicate on `col`, if any.
    pub fn predicate_on(&self, col: usize) -> Option<&Predicate> {
        self.predicates.iter().find(|p| p.col == col)
    }

    /// Checks the structural invariants against a column count: valid column
    /// indices, at most one predicate per column, ordered closed ranges.
    pub fn validate(&self, n_cols: usize) -> crate::Result<()> {
        let mut seen = vec![false; n_cols];
        for p in &self.predicates {
            if p.col >= n_cols {
                return Err(crate::Error::InvalidQuery(format!(
                    "predicate references column {} but table has {}",
                    p.col, n_cols
                )));
            }
            if seen[p.col] {
                return Err(crate::Error::InvalidQuery(format!(
                    "duplicate predicate on column {}",
                    p.col
                )));
            }
            seen[p.col] = true;
            match p.kind {
                PredicateKind::ClosedRange => {
                    let (lo, hi) = p.interval();
                    if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less)
                        && lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Equal)
                    {
                        return Err(crate::Error::InvalidQuery(format!(
                            "closed range on column {} has lo {} > hi {}",
                            p.col, lo, hi
                        )));
                    }
                }
                PredicateKind::Invalid => {
                    let (lo, hi) = p.interval();
                    if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Greater) {
                        return Err(crate::Error::InvalidQuery(format!(
                            "invalid predicate on column {} must have lo > hi",
                            p.col
                        )));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_by_kind() {
        assert!(Predicate::equality(0, 3.0).matches(3.0));
        assert!(!Predicate::equality(0, 3.0).matches(3.5));
        assert!(Predicate::closed(0, 2.0, 3.0).matches(2.0));
        assert!(Predicate::closed(0, 2.0, 3.0).matches(3.0));
        assert!(!Predicate::closed(0, 2.0, 3.0).matches(1.9));
        assert!(Predicate::open_low(0, 5.0).matches(-100.0));
        assert!(!Predicate::open_low(0, 5.0).matches(5.1));
        assert!(Predicate::open_high(0, 5.0).matches(100.0));
        assert!(!Predicate::invalid(0, 100.0, 10.0).matches(50.0));
    }

    #[test]
    fn validate_rejects_duplicates_and_bad_columns() {
        let q = Query::new(vec![
            Predicate::equality(0, 1.0),
            Predicate::equality(0, 2.0),
        ]);
        assert!(q.validate(2).is_err());
        let q = Query::new(vec![Predicate::equality(5, 1.0)]);
        assert!(q.validate(2).is_err());
        let q = Query::new(vec![Predicate::equality(1, 1.0)]);
        assert!(q.validate(2).is_ok());
    }
}
