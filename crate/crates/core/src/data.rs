//! The private dataset and its CSV loader.

use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::subset::SubsetMask;

/// Immutable table of `n` numeric records with `d_in` columns each.
///
/// Record ids are the row indices `0..n`. Rows are stored contiguously and
/// shared behind an `Arc`, so clones are cheap and the table can be handed to
/// worker threads freely.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetTable {
    values: Arc<[f64]>,
    n: usize,
    dim: usize,
}

impl DatasetTable {
    /// Builds a table from row vectors. Requires `n >= 2`, equal row
    /// lengths, at least one column and finite entries.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::validation(format!(
                "a dataset needs at least 2 records, got {n}"
            )));
        }
        let dim = rows[0].as_ref().len();
        if dim == 0 {
            return Err(Error::validation("records must have at least one column"));
        }
        let mut values = Vec::with_capacity(n * dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::validation(format!(
                    "record {i} has {} columns, expected {dim}",
                    row.len()
                )));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::validation(format!(
                    "record {i}, column {j} is not finite ({})",
                    row[j]
                )));
            }
            values.extend_from_slice(row);
        }
        Ok(Self {
            values: values.into(),
            n,
            dim,
        })
    }

    /// One-column table.
    pub fn from_scalars(xs: &[f64]) -> Result<Self> {
        let rows: Vec<[f64; 1]> = xs.iter().map(|&x| [x]).collect();
        Self::from_rows(&rows)
    }

    /// Parses headerless comma-separated decimal reals, one record per line.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(text.as_bytes());
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (r, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Malformed {
                row: r + 1,
                col: 0,
                message: e.to_string(),
            })?;
            if record.len() == 1 && record[0].is_empty() {
                continue;
            }
            let mut row = Vec::with_capacity(record.len());
            for (c, cell) in record.iter().enumerate() {
                let v: f64 = cell.parse().map_err(|_| Error::Malformed {
                    row: r + 1,
                    col: c + 1,
                    message: format!("`{cell}` is not a decimal number"),
                })?;
                row.push(v);
            }
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(Error::Malformed {
                        row: r + 1,
                        col: row.len().min(first.len()) + 1,
                        message: format!(
                            "expected {} columns, found {}",
                            first.len(),
                            row.len()
                        ),
                    });
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Malformed {
                row: 1,
                col: 1,
                message: "no records".into(),
            });
        }
        Self::from_rows(&rows)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Number of columns per record.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn record(&self, id: usize) -> &[f64] {
        &self.values[id * self.dim..(id + 1) * self.dim]
    }

    /// Row-major contiguous storage.
    pub(crate) fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn records(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    /// Copies the selected records into a new table, keeping their order.
    pub fn select(&self, subset: &SubsetMask) -> Result<Self> {
        let rows: Vec<&[f64]> = subset.iter().map(|i| self.record(i)).collect();
        Self::from_rows(&rows)
    }

    /// Mask selecting every record.
    pub fn full_mask(&self) -> SubsetMask {
        SubsetMask::full(self.n)
    }
}

/// Reads a dataset file. Only CSV is supported.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<DatasetTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    DatasetTable::from_csv_str(&text)
}
