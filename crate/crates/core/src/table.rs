//! Columnar dataset with dictionary-encoded categorical columns and the
//! exact counting oracle used for ground-truth labels.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::query::Query;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
}

impl ColumnSchema {
    pub fn numeric(name: impl Into<String>) -> Self {
        ColumnSchema {
            name: name.into(),
            kind: ColumnKind::Numeric,
        }
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        ColumnSchema {
            name: name.into(),
            kind: ColumnKind::Categorical,
        }
    }
}

/// Per-column domain statistics over the stored (encoded) values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainStats {
    pub min: f64,
    pub max: f64,
    /// `max - min`.
    pub size: f64,
    pub distinct: usize,
}

/// An immutable columnar table. Numeric columns hold raw 64-bit values;
/// categorical columns hold dictionary codes (first-appearance order).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Table {
    schema: Vec<ColumnSchema>,
    columns: Vec<Vec<f64>>,
    dictionaries: Vec<Option<Vec<String>>>,
    row_count: usize,
}

impl Table {
    /// Builds a table from parts, checking the structural invariants.
    pub fn new(
        schema: Vec<ColumnSchema>,
        columns: Vec<Vec<f64>>,
        dictionaries: Vec<Option<Vec<String>>>,
    ) -> Result<Self> {
        if columns.len() != schema.len() || dictionaries.len() != schema.len() {
            return Err(Error::RaggedColumns);
        }
        let mut names = std::collections::HashSet::new();
        for cs in &schema {
            if !names.insert(cs.name.as_str()) {
                return Err(Error::DuplicateColumn(cs.name.clone()));
            }
        }
        let row_count = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != row_count) {
            return Err(Error::RaggedColumns);
        }
        for (i, dict) in dictionaries.iter().enumerate() {
            match (schema[i].kind, dict) {
                (ColumnKind::Categorical, Some(values)) => {
                    let mut seen = std::collections::HashSet::new();
                    if values.iter().any(|v| !seen.insert(v.as_str())) {
                        return Err(Error::InvalidConfig(format!(
                            "dictionary for column {:?} contains duplicates",
                            schema[i].name
                        )));
                    }
                    let n = values.len() as f64;
                    if columns[i]
                        .iter()
                        .any(|&c| c < 0.0 || c >= n || c.fract() != 0.0)
                    {
                        return Err(Error::InvalidConfig(format!(
                            "column {:?} holds codes outside its dictionary",
                            schema[i].name
                        )));
                    }
                }
                (ColumnKind::Numeric, None) => {}
                _ => {
                    return Err(Error::InvalidConfig(format!(
                        "dictionary presence does not match kind of column {:?}",
                        schema[i].name
                    )))
                }
            }
        }
        Ok(Table {
            schema,
            columns,
            dictionaries,
            row_count,
        })
    }

    /// Builds an all-numeric table without dictionaries.
    pub fn from_numeric_columns(names: &[&str], columns: Vec<Vec<f64>>) -> Result<Self> {
        let schema = names.iter().map(|n| ColumnSchema::numeric(*n)).collect();
        let dicts = vec![None; columns.len()];
        Table::new(schema, columns, dicts)
    }

    /// Reads a CSV file (header row, comma-separated, UTF-8) against a schema.
    /// Header names must match the schema in order. Categorical cells are
    /// dictionary-encoded in first-appearance order.
    pub fn ingest_csv(path: impl AsRef<Path>, schema: Vec<ColumnSchema>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(BufReader::new(file));

        let headers = reader.headers()?.clone();
        if headers.len() != schema.len() {
            return Err(Error::HeaderMismatch {
                position: headers.len().min(schema.len()),
                expected: schema
                    .get(headers.len())
                    .map(|c| c.name.clone())
                    .unwrap_or_default(),
                found: headers
                    .get(schema.len())
                    .map(str::to_owned)
                    .unwrap_or_default(),
            });
        }
        for (i, cs) in schema.iter().enumerate() {
            let found = headers.get(i).unwrap_or("");
            if found != cs.name {
                return Err(Error::HeaderMismatch {
                    position: i,
                    expected: cs.name.clone(),
                    found: found.to_owned(),
                });
            }
        }

        let n_cols = schema.len();
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); n_cols];
        let mut dictionaries: Vec<Option<Vec<String>>> = schema
            .iter()
            .map(|c| match c.kind {
                ColumnKind::Categorical => Some(Vec::new()),
                ColumnKind::Numeric => None,
            })
            .collect();
        let mut code_maps: Vec<std::collections::HashMap<String, usize>> =
            vec![std::collections::HashMap::new(); n_cols];

        for (row_idx, record) in reader.records().enumerate() {
            let record = record?;
            for (col, cs) in schema.iter().enumerate() {
                let cell = record.get(col).unwrap_or("");
                match cs.kind {
                    ColumnKind::Numeric => {
                        let v: f64 = cell.trim().parse().map_err(|_| Error::BadNumericCell {
                            row: row_idx,
                            column: cs.name.clone(),
                            value: cell.to_owned(),
                        })?;
                        columns[col].push(v);
                    }
                    ColumnKind::Categorical => {
                        let code = match code_maps[col].get(cell) {
                            Some(&c) => c,
                            None => {
                                let dict = dictionaries[col].as_mut().unwrap();
                                let c = dict.len();
                                dict.push(cell.to_owned());
                                code_maps[col].insert(cell.to_owned(), c);
                                c
                            }
                        };
                        columns[col].push(code as f64);
                    }
                }
            }
        }

        Table::new(schema, columns, dictionaries)
    }

    /// Writes the table back out as CSV (categorical codes are decoded).
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        w.write_record(self.schema.iter().map(|c| c.name.as_str()))?;
        let mut cell = String::new();
        for row in 0..self.row_count {
            w.write_record((0..self.schema.len()).map(|col| {
                let v = self.columns[col][row];
                match &self.dictionaries[col] {
                    Some(dict) => dict[v as usize].clone(),
                    None => {
                        cell.clear();
                        if v.fract() == 0.0 && v.abs() < 1e15 {
                            cell.push_str(&format!("{}", v as i64));
                        } else {
                            cell.push_str(&format!("{v}"));
                        }
                        cell.clone()
                    }
                }
            }))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    pub fn n_cols(&self) -> usize {
        self.schema.len()
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn column(&self, col: usize) -> &[f64] {
        &self.columns[col]
    }

    pub fn value(&self, col: usize, row: usize) -> f64 {
        self.columns[col][row]
    }

    pub fn dictionary(&self, col: usize) -> Option<&[String]> {
        self.dictionaries[col].as_deref()
    }

    /// Decodes a categorical code back to its string value.
    pub fn decode(&self, col: usize, code: usize) -> Option<&str> {
        self.dictionaries[col]
            .as_ref()
            .and_then(|d| d.get(code))
            .map(String::as_str)
    }

    /// The budget-accounting convention: `row_count * column_count * 4` bytes.
    pub fn data_size_bytes(&self) -> usize {
        self.row_count * self.schema.len() * 4
    }

    /// Min/max/size/distinct over the stored (encoded) values of one column.
    pub fn domain_stats(&self, col: usize) -> Result<DomainStats> {
        if col >= self.schema.len() {
            return Err(Error::BadColumn(col));
        }
        if self.row_count == 0 {
            return Err(Error::EmptyTable);
        }
        let values = &self.columns[col];
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &v in values {
            if v < min {
                min = v;
            }
            if v > max {
                max = v;
            }
        }
        let mut sorted: Vec<f64> = values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut distinct = 1usize;
        for w in sorted.windows(2) {
            if w[0] != w[1] {
                distinct += 1;
            }
        }
        Ok(DomainStats {
            min,
            max,
            size: max - min,
            distinct,
        })
    }

    /// Domain stats for every column.
    pub fn all_domain_stats(&self) -> Result<Vec<DomainStats>> {
        (0..self.n_cols()).map(|c| self.domain_stats(c)).collect()
    }

    /// Exact cardinality by full scan. The ground-truth oracle for all
    /// labeling: a query with no predicates matches every row, an invalid
    /// predicate matches none.
    pub fn exact_count(&self, query: &Query) -> u64 {
        if query.predicates.is_empty() {
            return self.row_count as u64;
        }
        let mut count = 0u64;
        'rows: for row in 0..self.row_count {
            for p in &query.predicates {
                if !p.matches(self.columns[p.col][row]) {
                    continue 'rows;
                }
            }
            count += 1;
        }
        count
    }

    /// `exact_count / row_count`, the exact selectivity.
    pub fn exact_selectivity(&self, query: &Query) -> f64 {
        if self.row_count == 0 {
            return 0.0;
        }
        self.exact_count(query) as f64 / self.row_count as f64
    }
}

/// Reads a JSON schema sidecar: a list of `{name, kind}` objects.
pub fn read_schema(path: impl AsRef<Path>) -> Result<Vec<ColumnSchema>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

/// Writes the JSON schema sidecar.
pub fn write_schema(path: impl AsRef<Path>, schema: &[ColumnSchema]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, schema)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    Ok(())
}
