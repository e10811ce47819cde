//! Rectangular numeric tables with column metadata.
//!
//! Discrete columns hold integer-coded reals. Values read from CSV are kept
//! bit-for-bit and written back with Rust's shortest round-trip formatting,
//! so a value survives a read/write cycle unchanged.

use std::io::{Read, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("CSV line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("row {row} has {found} values, expected {expected}")]
    Ragged { row: usize, found: usize, expected: usize },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("dataset has no target column")]
    MissingTarget,
    #[error("dataset has no rows")]
    Empty,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Continuous,
    Discrete,
}

/// `n` rows by `D` columns, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    kinds: Vec<ColumnKind>,
    columns: Vec<Vec<f64>>,
    target: Option<usize>,
}

impl Dataset {
    pub fn from_columns(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self, DataError> {
        if names.len() != columns.len() {
            return Err(DataError::Ragged { row: 0, found: columns.len(), expected: names.len() });
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(DataError::DuplicateColumn(n.clone()));
            }
        }
        let n = columns.first().map_or(0, Vec::len);
        if let Some((c, col)) = columns.iter().enumerate().find(|(_, c)| c.len() != n) {
            return Err(DataError::Ragged { row: c, found: col.len(), expected: n });
        }
        let kinds = vec![ColumnKind::Continuous; names.len()];
        Ok(Self { names, kinds, columns, target: None })
    }

    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self, DataError> {
        let d = names.len();
        let mut columns = vec![Vec::with_capacity(rows.len()); d];
        for (r, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(DataError::Ragged { row: r, found: row.len(), expected: d });
            }
            for (c, &v) in row.iter().enumerate() {
                columns[c].push(v);
            }
        }
        Self::from_columns(names, columns)
    }

    /// Reads a header row followed by numeric records.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let names: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
        let d = names.len();
        let mut columns = vec![Vec::new(); d];
        for (r, record) in rdr.records().enumerate() {
            let line = r + 2;
            let record = record.map_err(|e| DataError::Parse { line, message: e.to_string() })?;
            if record.len() != d {
                return Err(DataError::Parse {
                    line,
                    message: format!("expected {d} fields, found {}", record.len()),
                });
            }
            for (c, field) in record.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| DataError::Parse {
                    line,
                    message: format!("column `{}`: `{field}` is not a number", names[c]),
                })?;
                if !v.is_finite() {
                    return Err(DataError::Parse { line, message: format!("column `{}`: non-finite value", names[c]) });
                }
                columns[c].push(v);
            }
        }
        Self::from_columns(names, columns)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.names)?;
        let mut buf = Vec::with_capacity(self.n_columns());
        for r in 0..self.n_rows() {
            buf.clear();
            buf.extend(self.columns.iter().map(|c| c[r].to_string()));
            w.write_record(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn with_discrete<S: AsRef<str>>(mut self, names: &[S]) -> Result<Self, DataError> {
        for name in names {
            let c = self.column_index(name.as_ref())?;
            self.kinds[c] = ColumnKind::Discrete;
        }
        Ok(self)
    }

    pub fn with_target(mut self, name: &str) -> Result<Self, DataError> {
        self.target = Some(self.column_index(name)?);
        Ok(self)
    }

    pub fn column_index(&self, name: &str) -> Result<usize, DataError> {
        self.names.iter().position(|n| n == name).ok_or_else(|| DataError::UnknownColumn(name.to_string()))
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    pub fn kind(&self, column: usize) -> ColumnKind {
        self.kinds[column]
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn n_columns(&self) -> usize {
        self.names.len()
    }

    pub fn column(&self, c: usize) -> &[f64] {
        &self.columns[c]
    }

    #[inline]
    pub fn value(&self, row: usize, column: usize) -> f64 {
        self.columns[column][row]
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[row]).collect()
    }

    pub fn target(&self) -> Option<usize> {
        self.target
    }

    pub fn require_target(&self) -> Result<usize, DataError> {
        self.target.ok_or(DataError::MissingTarget)
    }

    /// Non-target column indices in table order.
    pub fn feature_columns(&self) -> Vec<usize> {
        (0..self.n_columns()).filter(|&c| Some(c) != self.target).collect()
    }

    /// Feature vector (all non-target columns) and target of one row.
    pub fn features_and_target(&self, row: usize) -> Result<(Vec<f64>, f64), DataError> {
        let t = self.require_target()?;
        let x = self.feature_columns().into_iter().map(|c| self.columns[c][row]).collect();
        Ok((x, self.columns[t][row]))
    }

    /// Copy of the selected rows, metadata preserved.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            names: self.names.clone(),
            kinds: self.kinds.clone(),
            columns: self.columns.iter().map(|c| rows.iter().map(|&r| c[r]).collect()).collect(),
            target: self.target,
        }
    }

    /// Every column multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for col in &mut out.columns {
            for v in col.iter_mut() {
                *v *= factor;
            }
        }
        out
    }
}
