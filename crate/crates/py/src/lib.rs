//! Python bindings exposing the laboratory's main types and operations:
//! tables, queries, workload generation, the estimator suite, q-error
//! analytics, the dynamic-environment simulator, and the rule checker.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use celab_core::dynamic::{make_appended_table as core_append, run_dynamic as core_run_dynamic};
use celab_core::dynamic::{DynamicConfig, UpdateSpec};
use celab_core::estimator::{
    group_by_predicate_count, q_error as core_q_error, summarize as core_summarize,
    Estimator as CoreEstimator,
};
use celab_core::query::{Predicate as CorePredicate, Query as CoreQuery};
use celab_core::registry::EstimatorSpec;
use celab_core::rules::{check_all, RuleCheckConfig, SeedMode};
use celab_core::synth::SynthConfig;
use celab_core::table::{read_schema, Table as CoreTable};
use celab_core::workload::{
    gen_workload as core_gen_workload, label as core_label, LabeledQuery as CoreLabeled,
    WorkloadConfig,
};

fn to_py_err(e: celab_core::Error) -> PyErr {
    match e {
        celab_core::Error::Io { .. } | celab_core::Error::Csv(_) => {
            PyIOError::new_err(e.to_string())
        }
        other => PyValueError::new_err(other.to_string()),
    }
}

fn json_to_py(py: Python<'_>, value: &serde_json::Value) -> PyResult<Py<PyAny>> {
    Ok(match value {
        serde_json::Value::Null => py.None(),
        serde_json::Value::Bool(b) => b.into_pyobject(py)?.to_owned().unbind().into(),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.unbind().into()
            } else {
                n.as_f64()
                    .unwrap_or(f64::NAN)
                    .into_pyobject(py)?
                    .unbind()
                    .into()
            }
        }
        serde_json::Value::String(s) => s.into_pyobject(py)?.unbind().into(),
        serde_json::Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.unbind().into()
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, json_to_py(py, v)?)?;
            }
            dict.unbind().into()
        }
    })
}

fn serialize_to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_to_py(py, &v)
}

/// Columnar dataset with an exact counting oracle.
#[pyclass(frozen)]
struct Table {
    inner: CoreTable,
}

#[pymethods]
impl Table {
    /// Reads a CSV with a JSON schema sidecar (list of {name, kind}).
    #[staticmethod]
    fn from_csv(csv_path: &str, schema_path: &str) -> PyResult<Self> {
        let schema = read_schema(schema_path).map_err(to_py_err)?;
        Ok(Table {
            inner: CoreTable::ingest_csv(csv_path, schema).map_err(to_py_err)?,
        })
    }

    /// Generates the two-column synthetic dataset.
    #[staticmethod]
    #[pyo3(signature = (skew, correlation, domain_size, rows, seed))]
    fn synth(
        skew: f64,
        correlation: f64,
        domain_size: usize,
        rows: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let cfg = SynthConfig {
            skew,
            correlation,
            domain_size,
            rows,
            seed,
        };
        Ok(Table {
            inner: celab_core::synth::gen_synth(&cfg).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn row_count(&self) -> usize {
        self.inner.row_count()
    }

    #[getter]
    fn n_cols(&self) -> usize {
        self.inner.n_cols()
    }

    fn column(&self, col: usize) -> PyResult<Vec<f64>> {
        if col >= self.inner.n_cols() {
            return Err(PyValueError::new_err(format!("no column {col}")));
        }
        Ok(self.inner.column(col).to_vec())
    }

    fn domain_stats(&self, py: Python<'_>, col: usize) -> PyResult<Py<PyAny>> {
        let stats = self.inner.domain_stats(col).map_err(to_py_err)?;
        serialize_to_py(py, &stats)
    }

    fn data_size_bytes(&self) -> usize {
        self.inner.data_size_bytes()
    }

    fn exact_count(&self, query: &Query) -> PyResult<u64> {
        query
            .inner
            .validate(self.inner.n_cols())
            .map_err(to_py_err)?;
        Ok(self.inner.exact_count(&query.inner))
    }

    fn write_csv(&self, path: &str) -> PyResult<()> {
        self.inner.write_csv(path).map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Table(rows={}, cols={})",
            self.inner.row_count(),
            self.inner.n_cols()
        )
    }
}

/// Single-column predicate in encoded-value space.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct Predicate {
    inner: CorePredicate,
}

#[pymethods]
impl Predicate {
    #[staticmethod]
    fn equality(col: usize, value: f64) -> Self {
        Predicate {
            inner: CorePredicate::equality(col, value),
        }
    }

    #[staticmethod]
    fn closed(col: usize, lo: f64, hi: f64) -> PyResult<Self> {
        if lo > hi {
            return Err(PyValueError::new_err("closed range requires lo <= hi"));
        }
        Ok(Predicate {
            inner: CorePredicate::closed(col, lo, hi),
        })
    }

    #[staticmethod]
    fn open_low(col: usize, hi: f64) -> Self {
        Predicate {
            inner: CorePredicate::open_low(col, hi),
        }
    }

    #[staticmethod]
    fn open_high(col: usize, lo: f64) -> Self {
        Predicate {
            inner: CorePredicate::open_high(col, lo),
        }
    }

    /// Unsatisfiable predicate (lo > hi), as probed by the rule checker.
    #[staticmethod]
    fn invalid(col: usize, lo: f64, hi: f64) -> PyResult<Self> {
        if lo <= hi {
            return Err(PyValueError::new_err("invalid predicate requires lo > hi"));
        }
        Ok(Predicate {
            inner: CorePredicate::invalid(col, lo, hi),
        })
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

/// Conjunction of predicates, at most one per column.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct Query {
    inner: CoreQuery,
}

#[pymethods]
impl Query {
    #[new]
    #[pyo3(signature = (predicates = Vec::new()))]
    fn new(predicates: Vec<Predicate>) -> Self {
        Query {
            inner: CoreQuery::new(predicates.into_iter().map(|p| p.inner).collect()),
        }
    }

    #[getter]
    fn predicate_count(&self) -> usize {
        self.inner.predicate_count()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

/// Query plus its exact cardinality.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct LabeledQuery {
    inner: CoreLabeled,
}

#[pymethods]
impl LabeledQuery {
    #[getter]
    fn query(&self) -> Query {
        Query {
            inner: self.inner.query.clone(),
        }
    }

    #[getter]
    fn cardinality(&self) -> u64 {
        self.inner.cardinality
    }

    #[getter]
    fn selectivity(&self) -> f64 {
        self.inner.selectivity
    }

    fn __repr__(&self) -> String {
        format!(
            "LabeledQuery(cardinality={}, selectivity={})",
            self.inner.cardinality, self.inner.selectivity
        )
    }
}

/// Any of the suite's estimators behind the uniform capability set.
#[pyclass]
struct Estimator {
    inner: Box<dyn CoreEstimator>,
}

#[pymethods]
impl Estimator {
    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_owned()
    }

    /// Estimated cardinality; the seed makes stochastic estimators
    /// reproducible per call.
    #[pyo3(signature = (query, seed = 0))]
    fn estimate(&self, query: &Query, seed: u64) -> f64 {
        self.inner.estimate(&query.inner, seed)
    }

    /// Rebuild/retrain against a new table; returns elapsed seconds.
    fn update(&mut self, table: &Table) -> PyResult<f64> {
        let d = self.inner.update(&table.inner).map_err(to_py_err)?;
        Ok(d.as_secs_f64())
    }

    /// Independent frozen copy.
    fn snapshot(&self) -> Estimator {
        Estimator {
            inner: self.inner.snapshot(),
        }
    }

    fn size_bytes(&self) -> usize {
        self.inner.size_bytes()
    }

    fn __repr__(&self) -> String {
        format!("Estimator({})", self.inner.name())
    }
}

/// Builds an estimator from a bare name ("avi", "mhist", ...) or a JSON
/// spec object like {"kind": "bayes", "samples": 256}.
#[pyfunction]
#[pyo3(signature = (spec, table, seed = 0))]
fn build_estimator(spec: &str, table: &Table, seed: u64) -> PyResult<Estimator> {
    let parsed: EstimatorSpec = if spec.trim_start().starts_with('{') {
        serde_json::from_str(spec).map_err(|e| PyValueError::new_err(e.to_string()))?
    } else {
        EstimatorSpec::from_name(spec).map_err(to_py_err)?
    };
    Ok(Estimator {
        inner: parsed.build(&table.inner, seed).map_err(to_py_err)?,
    })
}

/// Generates a seeded workload against the table.
#[pyfunction]
#[pyo3(signature = (table, n_queries, seed, p_center_data = 0.9, p_width_uniform = 0.5, lambda_factor = 10.0))]
fn gen_workload(
    table: &Table,
    n_queries: usize,
    seed: u64,
    p_center_data: f64,
    p_width_uniform: f64,
    lambda_factor: f64,
) -> PyResult<Vec<Query>> {
    let cfg = WorkloadConfig {
        n_queries,
        seed,
        p_center_data,
        p_width_uniform,
        lambda_factor,
    };
    let queries = core_gen_workload(&table.inner, &cfg).map_err(to_py_err)?;
    Ok(queries.into_iter().map(|q| Query { inner: q }).collect())
}

/// Labels queries with exact cardinalities.
#[pyfunction]
fn label(table: &Table, queries: Vec<Query>) -> PyResult<Vec<LabeledQuery>> {
    let qs: Vec<CoreQuery> = queries.into_iter().map(|q| q.inner).collect();
    for q in &qs {
        q.validate(table.inner.n_cols()).map_err(to_py_err)?;
    }
    Ok(core_label(&table.inner, &qs)
        .into_iter()
        .map(|l| LabeledQuery { inner: l })
        .collect())
}

/// max(est, act) / min(est, act), both clamped to at least 1.
#[pyfunction]
fn q_error(est: f64, act: f64) -> f64 {
    core_q_error(est, act)
}

/// Nearest-rank percentile summary of a batch of q-errors.
#[pyfunction]
fn summarize(py: Python<'_>, errors: Vec<f64>) -> PyResult<Py<PyAny>> {
    let s = core_summarize(&errors).map_err(to_py_err)?;
    serialize_to_py(py, &s)
}

/// Per-predicate-count q-error summaries, keyed by predicate count.
#[pyfunction]
fn summarize_by_predicate_count(
    py: Python<'_>,
    labeled: Vec<LabeledQuery>,
    errors: Vec<f64>,
) -> PyResult<Py<PyAny>> {
    let core: Vec<CoreLabeled> = labeled.into_iter().map(|l| l.inner).collect();
    let groups = group_by_predicate_count(&core, &errors).map_err(to_py_err)?;
    serialize_to_py(py, &groups)
}

/// Appends a sorted-copy sample of `fraction * rows` rows to the table.
#[pyfunction]
fn make_appended_table(table: &Table, fraction: f64, seed: u64) -> PyResult<Table> {
    let spec = UpdateSpec {
        append_fraction: fraction,
        seed,
    };
    Ok(Table {
        inner: core_append(&table.inner, &spec).map_err(to_py_err)?,
    })
}

/// Runs the stale/updated timeline; labels must come from `new_table`.
#[pyfunction]
#[pyo3(signature = (estimator, new_table, labeled, t_total, seed = 0, t_u_override = None))]
fn run_dynamic(
    py: Python<'_>,
    estimator: &mut Estimator,
    new_table: &Table,
    labeled: Vec<LabeledQuery>,
    t_total: f64,
    seed: u64,
    t_u_override: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let queries: Vec<CoreLabeled> = labeled.into_iter().map(|l| l.inner).collect();
    let cfg = DynamicConfig {
        t_total,
        seed,
        t_u_override,
    };
    let report = core_run_dynamic(estimator.inner.as_mut(), &new_table.inner, &queries, &cfg)
        .map_err(to_py_err)?;
    serialize_to_py(py, &report)
}

/// Probes the five logical rules and returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (estimator, table, probes = 1000, stability_repeats = 200, seed = 0, independent_seeds = false))]
fn check_rules(
    py: Python<'_>,
    estimator: &Estimator,
    table: &Table,
    probes: usize,
    stability_repeats: usize,
    seed: u64,
    independent_seeds: bool,
) -> PyResult<Py<PyAny>> {
    let cfg = RuleCheckConfig {
        probes,
        stability_repeats,
        seed,
        seed_mode: if independent_seeds {
            SeedMode::Independent
        } else {
            SeedMode::Paired
        },
        ..RuleCheckConfig::default()
    };
    let report = check_all(estimator.inner.as_ref(), &table.inner, &cfg).map_err(to_py_err)?;
    serialize_to_py(py, &report)
}

#[pymodule]
fn celab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Table>()?;
    m.add_class::<Predicate>()?;
    m.add_class::<Query>()?;
    m.add_class::<LabeledQuery>()?;
    m.add_class::<Estimator>()?;
    m.add_function(wrap_pyfunction!(build_estimator, m)?)?;
    m.add_function(wrap_pyfunction!(gen_workload, m)?)?;
    m.add_function(wrap_pyfunction!(label, m)?)?;
    m.add_function(wrap_pyfunction!(q_error, m)?)?;
    m.add_function(wrap_pyfunction!(summarize, m)?)?;
    m.add_function(wrap_pyfunction!(summarize_by_predicate_count, m)?)?;
    m.add_function(wrap_pyfunction!(make_appended_table, m)?)?;
    m.add_function(wrap_pyfunction!(run_dynamic, m)?)?;
    m.add_function(wrap_pyfunction!(check_rules, m)?)?;
    Ok(())
}
