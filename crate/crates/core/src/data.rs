//! Dataset representation, the metric space, feature scaling and the
//! actionability constraints shared by the rest of the crate.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major numeric feature matrix with column labels.
///
/// An optional row identity (a CSV column named `id`) is carried alongside
/// but is never part of the feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    column_names: Vec<String>,
    ids: Option<Vec<String>>,
}

impl DatasetMatrix {
    pub fn new(values: Vec<f64>, cols: usize, column_names: Vec<String>) -> Result<Self> {
        if cols == 0 {
            return Err(Error::InvalidData("dataset needs at least one column".into()));
        }
        if values.is_empty() || !values.len().is_multiple_of(cols) {
            return Err(Error::InvalidData(format!(
                "{} values do not form rows of {cols} columns",
                values.len()
            )));
        }
        if column_names.len() != cols {
            return Err(Error::InvalidData(format!(
                "{} column names for {cols} columns",
                column_names.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite value at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(DatasetMatrix {
            rows: values.len() / cols,
            cols,
            values,
            column_names,
            ids: None,
        })
    }

    /// Builds a matrix from row vectors; column names default to `x0, x1, ...`.
    pub fn from_rows(rows: &[Vec<f64>], column_names: Option<Vec<String>>) -> Result<Self> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                expected: cols,
                found: bad.len(),
            });
        }
        let names = column_names.unwrap_or_else(|| (0..cols).map(|j| format!("x{j}")).collect());
        Self::new(rows.concat(), cols, names)
    }

    pub fn with_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.rows {
            return Err(Error::InvalidData(format!(
                "{} ids for {} rows",
                ids.len(),
                self.rows
            )));
        }
        self.ids = Some(ids);
        Ok(self)
    }

    /// Reads a CSV file: a header row, then comma-delimited decimal values.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let id_col = headers.iter().position(|h| h == "id");
        let column_names: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|(j, _)| Some(*j) != id_col)
            .map(|(_, h)| h.to_string())
            .collect();

        let mut values = Vec::new();
        let mut ids = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != headers.len() {
                return Err(Error::InvalidData(format!(
                    "data row {} has {} fields, header has {}",
                    line + 1,
                    record.len(),
                    headers.len()
                )));
            }
            for (j, field) in record.iter().enumerate() {
                if Some(j) == id_col {
                    ids.push(field.to_string());
                    continue;
                }
                let v: f64 = field.parse().map_err(|_| {
                    Error::InvalidData(format!(
                        "data row {}, column '{}': cannot parse '{field}'",
                        line + 1,
                        &headers[j]
                    ))
                })?;
                values.push(v);
            }
        }
        let cols = column_names.len();
        let matrix = Self::new(values, cols, column_names)?;
        if id_col.is_some() {
            matrix.with_ids(ids)
        } else {
            Ok(matrix)
        }
    }

    /// Writes the matrix in the format `from_csv_reader` accepts, ids first
    /// when present. Values use shortest round-trip formatting.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = Vec::with_capacity(self.cols + 1);
        if self.ids.is_some() {
            header.push("id");
        }
        header.extend(self.column_names.iter().map(String::as_str));
        w.write_record(&header)?;
        for (r, row) in self.iter_rows().enumerate() {
            let mut record: Vec<String> = Vec::with_capacity(header.len());
            if let Some(ids) = &self.ids {
                record.push(ids[r].clone());
            }
            record.extend(row.iter().map(|v| format!("{v}")));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn ids(&self) -> Option<&[String]> {
        self.ids.as_deref()
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.cols)
    }
}

/// The metric every distance in the crate is measured with.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum MetricSpace {
    #[default]
    Euclidean,
}

impl MetricSpace {
    /// Distance without the dimension check; callers guarantee equal lengths.
    #[inline]
    pub fn dist(self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        match self {
            MetricSpace::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
        }
    }
}

pub fn distance(a: &[f64], b: &[f64], space: MetricSpace) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(space.dist(a, b))
}

pub const STDDEV_FLOOR: f64 = 1e-12;

/// Per-column standardisation using the population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingTransform {
    pub mean: Vec<f64>,
    pub stddev: Vec<f64>,
}

pub fn fit_scaling(data: &DatasetMatrix) -> Result<ScalingTransform> {
    if data.rows() < 2 {
        return Err(Error::EmptyDataset {
            required: 2,
            found: data.rows(),
        });
    }
    let l = data.rows() as f64;
    let mut mean = vec![0.0; data.cols()];
    for row in data.iter_rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= l);
    let mut var = vec![0.0; data.cols()];
    for row in data.iter_rows() {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let stddev = var
        .into_iter()
        .map(|s| (s / l).sqrt().max(STDDEV_FLOOR))
        .collect();
    Ok(ScalingTransform { mean, stddev })
}

impl ScalingTransform {
    pub fn apply_point(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .zip(self.mean.iter().zip(&self.stddev))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn invert_point(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .zip(self.mean.iter().zip(&self.stddev))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }

    pub fn apply(&self, data: &DatasetMatrix) -> DatasetMatrix {
        self.map(data, |row| self.apply_point(row))
    }

    pub fn invert(&self, data: &DatasetMatrix) -> DatasetMatrix {
        self.map(data, |row| self.invert_point(row))
    }

    fn map(&self, data: &DatasetMatrix, f: impl Fn(&[f64]) -> Vec<f64>) -> DatasetMatrix {
        let values = data.iter_rows().flat_map(f).collect();
        DatasetMatrix {
            values,
            ..data.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Monotonic {
    /// The feature may decrease by at most `slack`.
    IncreaseOnly { slack: f64 },
    /// The feature may increase by at most `slack`.
    DecreaseOnly { slack: f64 },
}

impl Monotonic {
    /// Bounds `(lower, upper)` this constraint puts on the feature given its
    /// original value.
    pub fn bounds(self, origin: f64) -> (f64, f64) {
        match self {
            Monotonic::IncreaseOnly { slack } => (origin - slack, f64::INFINITY),
            Monotonic::DecreaseOnly { slack } => (f64::NEG_INFINITY, origin + slack),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationSign {
    /// Deltas must share a sign.
    Positive,
    /// Deltas must have opposite signs.
    Negative,
}

impl CorrelationSign {
    /// Whether two deltas are compatible. A zero delta is compatible with
    /// anything.
    #[inline]
    pub fn compatible(self, a: f64, b: f64) -> bool {
        match self {
            CorrelationSign::Positive => a * b >= 0.0,
            CorrelationSign::Negative => a * b <= 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatedGroup {
    pub columns: Vec<usize>,
    pub sign: CorrelationSign,
}

impl CorrelatedGroup {
    /// All unordered column pairs of the group; larger groups are checked
    /// pairwise.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.columns.iter().enumerate().flat_map(move |(i, &a)| {
            self.columns[i + 1..].iter().map(move |&b| (a, b))
        })
    }
}

/// Which features may change, and how.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintSpec {
    pub non_actionable: BTreeSet<usize>,
    pub monotonic: BTreeMap<usize, Monotonic>,
    pub correlated_groups: Vec<CorrelatedGroup>,
}

impl ConstraintSpec {
    pub fn is_empty(&self) -> bool {
        self.non_actionable.is_empty()
            && self.monotonic.is_empty()
            && self.correlated_groups.is_empty()
    }

    pub fn freeze(mut self, column: usize) -> Self {
        self.non_actionable.insert(column);
        self
    }

    pub fn monotonic(mut self, column: usize, rule: Monotonic) -> Self {
        self.monotonic.insert(column, rule);
        self
    }

    pub fn correlated(mut self, columns: Vec<usize>, sign: CorrelationSign) -> Self {
        self.correlated_groups.push(CorrelatedGroup { columns, sign });
        self
    }

    /// Checks the spec against a feature space of `cols` columns.
    pub fn validate(&self, cols: usize) -> Result<()> {
        let out_of_range = |j: usize| j >= cols;
        if let Some(j) = self
            .non_actionable
            .iter()
            .chain(self.monotonic.keys())
            .chain(self.correlated_groups.iter().flat_map(|g| g.columns.iter()))
            .copied()
            .find(|&j| out_of_range(j))
        {
            return Err(Error::InvalidConstraint(format!(
                "column {j} out of range for {cols} columns"
            )));
        }
        if self.non_actionable.len() >= cols {
            return Err(Error::InvalidConstraint(
                "at least one feature must stay actionable".into(),
            ));
        }
        if let Some(j) = self
            .monotonic
            .keys()
            .find(|j| self.non_actionable.contains(j))
        {
            return Err(Error::InvalidConstraint(format!(
                "column {j} is both non-actionable and monotonic"
            )));
        }
        for rule in self.monotonic.values() {
            let (Monotonic::IncreaseOnly { slack } | Monotonic::DecreaseOnly { slack }) = *rule;
            if !(slack >= 0.0 && slack.is_finite()) {
                return Err(Error::InvalidConstraint(format!(
                    "monotonic slack must be finite and non-negative, got {slack}"
                )));
            }
        }
        for g in &self.correlated_groups {
            let distinct: BTreeSet<_> = g.columns.iter().collect();
            if g.columns.len() < 2 || distinct.len() != g.columns.len() {
                return Err(Error::InvalidConstraint(
                    "a correlated group needs at least two distinct columns".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Whether `candidate` lies in the region of feature space reachable from
/// `origin` under `spec`.
pub fn valid_region_contains(candidate: &[f64], origin: &[f64], spec: &ConstraintSpec) -> bool {
    if spec
        .non_actionable
        .iter()
        .any(|&j| candidate[j] != origin[j])
    {
        return false;
    }
    for (&j, rule) in &spec.monotonic {
        let (lo, hi) = rule.bounds(origin[j]);
        if candidate[j] < lo || candidate[j] > hi {
            return false;
        }
    }
    spec.correlated_groups.iter().all(|g| {
        g.pairs().all(|(a, b)| {
            g.sign
                .compatible(candidate[a] - origin[a], candidate[b] - origin[b])
        })
    })
}
