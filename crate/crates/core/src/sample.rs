//! Observations as an n×d block, and CSV ingestion with column selection.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{DcovError, Result};
use crate::scalar::{Field, Real};

/// An n×d block of finite values, one observation per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    values: Array2<T>,
    column_names: Vec<String>,
}

impl<T: Field> Sample<T> {
    pub fn new(values: Array2<T>, column_names: Vec<String>) -> Result<Self> {
        if column_names.len() != values.ncols() {
            return Err(DcovError::Shape(format!(
                "{} column names for {} columns",
                column_names.len(),
                values.ncols()
            )));
        }
        if values.ncols() == 0 {
            return Err(DcovError::EmptySelection);
        }
        let mut seen = HashSet::new();
        for name in &column_names {
            if !seen.insert(name.as_str()) {
                return Err(DcovError::DuplicateColumn(name.clone()));
            }
        }
        for ((row, column), v) in values.indexed_iter() {
            if !v.is_finite_value() {
                return Err(DcovError::NonFinite { row, column });
            }
        }
        Ok(Self {
            values,
            column_names,
        })
    }

    /// Columns named `x1, x2, ...`.
    pub fn unnamed(values: Array2<T>) -> Result<Self> {
        let names = (1..=values.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(values, names)
    }

    /// A one-dimensional sample.
    pub fn from_column(values: &[T]) -> Result<Self> {
        let block = Array2::from_shape_vec((values.len(), 1), values.to_vec())
            .map_err(|e| DcovError::Shape(e.to_string()))?;
        Self::unnamed(block)
    }

    /// Row-major flat data with `d` columns.
    pub fn from_row_major(d: usize, data: Vec<T>) -> Result<Self> {
        if d == 0 || data.len() % d != 0 {
            return Err(DcovError::Shape(format!(
                "{} values do not fill rows of width {d}",
                data.len()
            )));
        }
        let block = Array2::from_shape_vec((data.len() / d, d), data)
            .map_err(|e| DcovError::Shape(e.to_string()))?;
        Self::unnamed(block)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn row(&self, k: usize) -> ArrayView1<'_, T> {
        self.values.row(k)
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, T> {
        self.values.column(j)
    }

    /// Values of a one-dimensional sample.
    pub fn as_column(&self) -> Result<Vec<T>> {
        if self.d() != 1 {
            return Err(DcovError::NotUnivariate(self.d()));
        }
        Ok(self.values.column(0).to_vec())
    }

    /// The sample restricted to `rows`, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            values: self.values.select(Axis(0), rows),
            column_names: self.column_names.clone(),
        }
    }

    /// The sample with observation `i` removed.
    pub fn without_row(&self, i: usize) -> Self {
        let keep: Vec<usize> = (0..self.n()).filter(|&k| k != i).collect();
        self.select_rows(&keep)
    }

    pub fn map<F>(&self, f: F) -> Result<Self>
    where
        F: FnMut(T) -> T,
    {
        Self::new(self.values.mapv(f), self.column_names.clone())
    }

    pub(crate) fn with_values(&self, values: Array2<T>) -> Result<Self> {
        Self::new(values, self.column_names.clone())
    }
}

/// How to treat a selected cell that is empty or `NA`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingPolicy {
    Error,
    #[default]
    DropRows,
}

/// Columns to pull from a CSV file.
///
/// Parsed from a comma-separated list whose items are either column names or
/// zero-based inclusive index ranges such as `2:4` or `3`. An item that is
/// also a column name is always read as the name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSelector {
    items: Vec<String>,
}

impl ColumnSelector {
    pub fn parse(spec: &str) -> Result<Self> {
        let items: Vec<String> = spec
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        if items.is_empty() {
            return Err(DcovError::EmptySelection);
        }
        Ok(Self { items })
    }

    pub fn names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            items: names.into_iter().map(Into::into).collect(),
        }
    }

    pub fn range(start: usize, end: usize) -> Self {
        Self {
            items: vec![format!("{start}:{end}")],
        }
    }

    /// Column indices into `header`, in selection order.
    pub fn resolve(&self, header: &[String]) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for item in &self.items {
            if let Some(j) = header.iter().position(|h| h == item) {
                out.push(j);
                continue;
            }
            let (start, end) = parse_range(item)
                .ok_or_else(|| DcovError::UnknownColumn(item.clone()))?;
            if start > end || end >= header.len() {
                return Err(DcovError::UnknownColumn(item.clone()));
            }
            out.extend(start..=end);
        }
        if out.is_empty() {
            return Err(DcovError::EmptySelection);
        }
        let mut seen = HashSet::new();
        out.retain(|j| seen.insert(*j));
        Ok(out)
    }
}

fn parse_range(item: &str) -> Option<(usize, usize)> {
    match item.split_once(':') {
        Some((a, b)) => Some((a.trim().parse().ok()?, b.trim().parse().ok()?)),
        None => {
            let j = item.parse().ok()?;
            Some((j, j))
        }
    }
}

/// Two aligned samples read from one file.
#[derive(Debug, Clone)]
pub struct LoadedPair<T> {
    pub x: Sample<T>,
    pub y: Sample<T>,
    /// Rows removed under [`MissingPolicy::DropRows`].
    pub dropped: usize,
    /// Zero-based data-row indices (header excluded) that were kept.
    pub kept_rows: Vec<usize>,
    pub header: Vec<String>,
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c == "NA"
}

/// Reads the x and y column blocks from a headed CSV file.
pub fn load_csv<T: Real>(
    path: impl AsRef<Path>,
    x_cols: &ColumnSelector,
    y_cols: &ColumnSelector,
    missing: MissingPolicy,
) -> Result<LoadedPair<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DcovError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, x_cols, y_cols, missing)
}

/// [`load_csv`] over any reader.
pub fn read_csv<T: Real, R: Read>(
    reader: R,
    x_cols: &ColumnSelector,
    y_cols: &ColumnSelector,
    missing: MissingPolicy,
) -> Result<LoadedPair<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();

    let xi = x_cols.resolve(&header)?;
    let yi = y_cols.resolve(&header)?;
    if let Some(j) = xi.iter().find(|j| yi.contains(j)) {
        return Err(DcovError::OverlappingColumns(header[*j].clone()));
    }

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut kept_rows = Vec::new();
    let mut dropped = 0;

    'rows: for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let mut xrow = Vec::with_capacity(xi.len());
        let mut yrow = Vec::with_capacity(yi.len());
        for (cols, dest) in [(&xi, &mut xrow), (&yi, &mut yrow)] {
            for &j in cols.iter() {
                let cell = record.get(j).unwrap_or("");
                if is_missing(cell) {
                    match missing {
                        MissingPolicy::Error => {
                            return Err(DcovError::Missing {
                                row: row + 1,
                                column: header[j].clone(),
                            })
                        }
                        MissingPolicy::DropRows => {
                            dropped += 1;
                            continue 'rows;
                        }
                    }
                }
                let v: f64 = cell.trim().parse().map_err(|_| DcovError::Parse {
                    row: row + 1,
                    column: header[j].clone(),
                    value: cell.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(DcovError::Parse {
                        row: row + 1,
                        column: header[j].clone(),
                        value: cell.to_string(),
                    });
                }
                dest.push(T::from_f64_lossy(v));
            }
        }
        xs.extend(xrow);
        ys.extend(yrow);
        kept_rows.push(row);
    }

    let n = kept_rows.len();
    if n < 2 {
        return Err(DcovError::TooFewObservations {
            required: 2,
            actual: n,
        });
    }
    let block = |data: Vec<T>, cols: &[usize]| -> Result<Sample<T>> {
        let values = Array2::from_shape_vec((n, cols.len()), data)
            .map_err(|e| DcovError::Shape(e.to_string()))?;
        Sample::new(values, cols.iter().map(|&j| header[j].clone()).collect())
    };
    Ok(LoadedPair {
        x: block(xs, &xi)?,
        y: block(ys, &yi)?,
        dropped,
        kept_rows,
        header: header.clone(),
    })
}

/// One text column of a CSV file, e.g. observation labels.
pub fn load_labels(path: impl AsRef<Path>, column: &str) -> Result<Vec<String>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DcovError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rdr = csv::Reader::from_reader(file);
    let j = rdr
        .headers()?
        .iter()
        .position(|h| h.trim() == column)
        .ok_or_else(|| DcovError::UnknownColumn(column.to_string()))?;
    rdr.records()
        .map(|r| Ok(r?.get(j).unwrap_or("").trim().to_string()))
        .collect()
}
