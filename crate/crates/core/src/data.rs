//! Dataset representation, CSV ingestion and feature preprocessing.
//!
//! A [`Dataset`] holds every row (labeled or not). Labels live in a separate
//! [`Labels`] index so the unlabeled majority never carries placeholder values.
//! Each preprocessing step appends a [`Transform`] with its fitted parameters to
//! the dataset's [`TransformLog`]; replaying that log on raw data (for example a
//! held-out test file) goes through the same code path and yields bit-identical
//! output.

use std::collections::HashSet;
use std::fs::File;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Labeled-row index with the observed binary outcomes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    pub rows: Vec<usize>,
    pub values: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// n_obs x p feature matrix.
    pub features: DMatrix<f64>,
    pub surrogate: Vec<f64>,
    pub labels: Option<Labels>,
    pub column_names: Vec<String>,
    pub utilization_col: Option<usize>,
    pub log: TransformLog,
}

/// The labeled rows of a dataset, extracted as dense arrays.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledData {
    pub x: DMatrix<f64>,
    pub s: Vec<f64>,
    pub y: Vec<f64>,
}

impl LabeledData {
    pub fn new(x: DMatrix<f64>, s: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if s.len() != x.nrows() || y.len() != x.nrows() {
            return Err(Error::Dimension(format!(
                "x has {} rows, s has {}, y has {}",
                x.nrows(),
                s.len(),
                y.len()
            )));
        }
        if y.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::NonBinaryResponse);
        }
        Ok(Self { x, s, y })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn subset(&self, rows: &[usize]) -> LabeledData {
        LabeledData {
            x: self.x.select_rows(rows),
            s: rows.iter().map(|&i| self.s[i]).collect(),
            y: rows.iter().map(|&i| self.y[i]).collect(),
        }
    }

    pub fn has_both_classes(&self) -> bool {
        let ones = self.y.iter().filter(|&&v| v == 1.0).count();
        ones > 0 && ones < self.y.len()
    }
}

impl Dataset {
    pub fn new(
        features: DMatrix<f64>,
        surrogate: Vec<f64>,
        labels: Option<Labels>,
        column_names: Vec<String>,
        utilization_col: Option<usize>,
    ) -> Result<Self> {
        let ds = Dataset {
            features,
            surrogate,
            labels,
            column_names,
            utilization_col,
            log: TransformLog::default(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let (n_obs, p) = self.features.shape();
        if n_obs == 0 || p == 0 {
            return Err(Error::Dimension(format!("empty dataset ({n_obs} x {p})")));
        }
        if self.surrogate.len() != n_obs {
            return Err(Error::Dimension(format!(
                "surrogate length {} != {n_obs} rows",
                self.surrogate.len()
            )));
        }
        if self.column_names.len() != p {
            return Err(Error::Dimension(format!(
                "{} column names for {p} features",
                self.column_names.len()
            )));
        }
        if let Some(u) = self.utilization_col {
            if u >= p {
                return Err(Error::Dimension(format!("utilization column {u} >= p = {p}")));
            }
        }
        let mut seen = HashSet::new();
        for name in &self.column_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateColumn(name.clone()));
            }
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("features"));
        }
        if self.surrogate.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("surrogate"));
        }
        if let Some(labels) = &self.labels {
            if labels.rows.len() != labels.values.len() {
                return Err(Error::Dimension("label rows and values differ in length".into()));
            }
            let mut rows = HashSet::new();
            for (&r, &v) in labels.rows.iter().zip(&labels.values) {
                if r >= n_obs || !rows.insert(r) {
                    return Err(Error::InvalidArgument(format!(
                        "labeled index {r} out of range or duplicated"
                    )));
                }
                if v > 1 {
                    return Err(Error::LabelNotBinary {
                        row: r,
                        value: v.to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn n_obs(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_labeled(&self) -> usize {
        self.labels.as_ref().map_or(0, |l| l.rows.len())
    }

    /// Dense copy of the labeled rows, in labeled-index order.
    pub fn labeled(&self) -> Result<LabeledData> {
        let labels = self
            .labels
            .as_ref()
            .filter(|l| !l.rows.is_empty())
            .ok_or_else(|| Error::InvalidArgument("dataset has no labeled rows".into()))?;
        Ok(LabeledData {
            x: self.features.select_rows(&labels.rows),
            s: labels.rows.iter().map(|&i| self.surrogate[i]).collect(),
            y: labels.values.iter().map(|&v| f64::from(v)).collect(),
        })
    }

    /// Same rows and columns, with a replacement labeled-row set.
    pub fn with_labels(&self, labels: Option<Labels>) -> Result<Self> {
        let mut ds = self.clone();
        ds.labels = labels;
        ds.validate()?;
        Ok(ds)
    }
}

/// Column roles for [`load_csv`]. Every column not named here is a feature.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    pub surrogate_col: String,
    #[serde(default)]
    pub label_col: Option<String>,
    #[serde(default)]
    pub utilization_col: Option<String>,
}

fn parse_number(cell: &str, row: usize, col: usize) -> Result<f64> {
    let trimmed = cell.trim();
    if trimmed.is_empty() {
        return Err(Error::MissingValue { row, col });
    }
    // Rust's f64 parser accepts "inf"/"nan"; only finite decimal or scientific notation is data.
    match trimmed.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::NonNumeric {
            row,
            col,
            value: cell.to_string(),
        }),
    }
}

/// Reads a comma-delimited UTF-8 file with a header row.
///
/// Rows whose label cell is empty are unlabeled. Feature cells must all be
/// present and numeric; `(row, col)` in errors are zero-based data-row and
/// file-column positions.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();

    let mut seen = HashSet::new();
    for h in &header {
        if !seen.insert(h.as_str()) {
            return Err(Error::DuplicateColumn(h.clone()));
        }
    }
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::ColumnNotFound(name.to_string()))
    };
    let s_idx = find(&schema.surrogate_col)?;
    let y_idx = schema.label_col.as_deref().map(find).transpose()?;
    let feature_idx: Vec<usize> = (0..header.len())
        .filter(|&c| c != s_idx && Some(c) != y_idx)
        .collect();
    let column_names: Vec<String> = feature_idx.iter().map(|&c| header[c].clone()).collect();
    let utilization_col = match &schema.utilization_col {
        Some(name) => Some(
            column_names
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::ColumnNotFound(name.clone()))?,
        ),
        None => None,
    };

    let mut values = Vec::new();
    let mut surrogate = Vec::new();
    let mut labels = Labels {
        rows: Vec::new(),
        values: Vec::new(),
    };
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::Dimension(format!(
                "row {row} has {} cells, header has {}",
                record.len(),
                header.len()
            )));
        }
        surrogate.push(parse_number(&record[s_idx], row, s_idx)?);
        for &c in &feature_idx {
            values.push(parse_number(&record[c], row, c)?);
        }
        if let Some(yc) = y_idx {
            let cell = record[yc].trim();
            if !cell.is_empty() {
                let v = match cell.parse::<f64>() {
                    Ok(v) if v == 0.0 => 0,
                    Ok(v) if v == 1.0 => 1,
                    _ => {
                        return Err(Error::LabelNotBinary {
                            row,
                            value: cell.to_string(),
                        })
                    }
                };
                labels.rows.push(row);
                labels.values.push(v);
            }
        }
    }
    let n_obs = surrogate.len();
    let p = feature_idx.len();
    if n_obs == 0 || p == 0 {
        return Err(Error::Dimension(format!("empty dataset ({n_obs} x {p})")));
    }
    let features = DMatrix::from_row_slice(n_obs, p, &values);
    Dataset::new(
        features,
        surrogate,
        y_idx.map(|_| labels),
        column_names,
        utilization_col,
    )
}

/// Writes features, then surrogate, then labels (empty cell when unlabeled).
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>, surrogate_name: &str, label_name: &str) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header: Vec<&str> = ds.column_names.iter().map(String::as_str).collect();
    header.push(surrogate_name);
    header.push(label_name);
    w.write_record(&header)?;

    let mut label_of = vec![None; ds.n_obs()];
    if let Some(l) = &ds.labels {
        for (&r, &v) in l.rows.iter().zip(&l.values) {
            label_of[r] = Some(v);
        }
    }
    let mut record = Vec::with_capacity(header.len());
    for i in 0..ds.n_obs() {
        record.clear();
        for j in 0..ds.n_features() {
            record.push(format_float(ds.features[(i, j)]));
        }
        record.push(format_float(ds.surrogate[i]));
        record.push(label_of[i].map(|v| v.to_string()).unwrap_or_default());
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Shortest representation that parses back to the identical f64.
fn format_float(v: f64) -> String {
    format!("{v:?}")
}

/// One applied preprocessing step together with its fitted parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    Log1p {
        columns: Vec<usize>,
        surrogate: bool,
    },
    Orthogonalize {
        utilization_col: usize,
        columns: Vec<usize>,
        intercepts: Vec<f64>,
        slopes: Vec<f64>,
        /// (intercept, slope) when the surrogate was residualized as well.
        surrogate: Option<(f64, f64)>,
    },
    Standardize {
        columns: Vec<usize>,
        means: Vec<f64>,
        scales: Vec<f64>,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TransformLog {
    pub steps: Vec<Transform>,
}

impl TransformLog {
    /// Applies every step, in order, to a copy of `raw`.
    pub fn replay(&self, raw: &Dataset) -> Result<Dataset> {
        let mut ds = raw.clone();
        for step in &self.steps {
            ds = step.apply(&ds)?;
        }
        Ok(ds)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Maps coefficients fitted on standardized features back to the scale the
    /// features had before standardization. Other steps are left as is.
    pub fn unstandardize_coefficients(&self, intercept: f64, beta: &[f64]) -> (f64, Vec<f64>) {
        let mut b0 = intercept;
        let mut beta = beta.to_vec();
        for step in self.steps.iter().rev() {
            if let Transform::Standardize {
                columns,
                means,
                scales,
            } = step
            {
                for ((&c, &m), &s) in columns.iter().zip(means).zip(scales) {
                    beta[c] /= s;
                    b0 -= beta[c] * m;
                }
            }
        }
        (b0, beta)
    }
}

impl Transform {
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        let mut out = ds.clone();
        match self {
            Transform::Log1p { columns, surrogate } => {
                for &c in columns {
                    check_column(ds, c)?;
                    for i in 0..ds.n_obs() {
                        let v = ds.features[(i, c)];
                        if v < 0.0 {
                            return Err(Error::NegativeCount { row: i, col: c, value: v });
                        }
                        out.features[(i, c)] = v.ln_1p();
                    }
                }
                if *surrogate {
                    for (i, s) in out.surrogate.iter_mut().enumerate() {
                        if *s < 0.0 {
                            return Err(Error::NegativeCount {
                                row: i,
                                col: usize::MAX,
                                value: *s,
                            });
                        }
                        *s = s.ln_1p();
                    }
                }
            }
            Transform::Orthogonalize {
                utilization_col,
                columns,
                intercepts,
                slopes,
                surrogate,
            } => {
                check_column(ds, *utilization_col)?;
                let u = ds.features.column(*utilization_col);
                for ((&c, &a), &b) in columns.iter().zip(intercepts).zip(slopes) {
                    check_column(ds, c)?;
                    for i in 0..ds.n_obs() {
                        out.features[(i, c)] = ds.features[(i, c)] - a - b * u[i];
                    }
                }
                if let Some((a, b)) = surrogate {
                    for (i, s) in out.surrogate.iter_mut().enumerate() {
                        *s = *s - a - b * u[i];
                    }
                }
            }
            Transform::Standardize {
                columns,
                means,
                scales,
            } => {
                for ((&c, &m), &s) in columns.iter().zip(means).zip(scales) {
                    check_column(ds, c)?;
                    for i in 0..ds.n_obs() {
                        out.features[(i, c)] = (ds.features[(i, c)] - m) / s;
                    }
                }
            }
        }
        out.log.steps.push(self.clone());
        Ok(out)
    }
}

fn check_column(ds: &Dataset, c: usize) -> Result<()> {
    if c >= ds.n_features() {
        return Err(Error::Dimension(format!(
            "column {c} out of range for p = {}",
            ds.n_features()
        )));
    }
    Ok(())
}

/// Replaces each selected cell x by ln(1 + x).
pub fn log1p_counts(ds: &Dataset, cols: &[usize], include_surrogate: bool) -> Result<Dataset> {
    Transform::Log1p {
        columns: cols.to_vec(),
        surrogate: include_surrogate,
    }
    .apply(ds)
}

fn mean(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = v.clone().count() as f64;
    v.sum::<f64>() / n
}

/// Ordinary least-squares fit of `target` on (1, u): returns (intercept, slope).
fn simple_ols(u: &[f64], target: &[f64]) -> (f64, f64) {
    let mu = mean(u.iter().copied());
    let mt = mean(target.iter().copied());
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (&a, &b) in u.iter().zip(target) {
        sxy += (a - mu) * (b - mt);
        sxx += (a - mu) * (a - mu);
    }
    let slope = sxy / sxx;
    (mt - slope * mu, slope)
}

/// Residualizes every non-utilization feature (and optionally the surrogate)
/// on (1, utilization).
pub fn orthogonalize_against_utilization(ds: &Dataset, include_surrogate: bool) -> Result<Dataset> {
    let uc = ds
        .utilization_col
        .ok_or_else(|| Error::InvalidArgument("utilization column not set".into()))?;
    let u: Vec<f64> = ds.features.column(uc).iter().copied().collect();
    let mu = mean(u.iter().copied());
    let sxx: f64 = u.iter().map(|v| (v - mu) * (v - mu)).sum();
    if sxx <= f64::EPSILON * (1.0 + mu * mu) * u.len() as f64 {
        return Err(Error::ConstantColumn(ds.column_names[uc].clone()));
    }
    let columns: Vec<usize> = (0..ds.n_features()).filter(|&c| c != uc).collect();
    let mut intercepts = Vec::with_capacity(columns.len());
    let mut slopes = Vec::with_capacity(columns.len());
    for &c in &columns {
        let col: Vec<f64> = ds.features.column(c).iter().copied().collect();
        let (a, b) = simple_ols(&u, &col);
        intercepts.push(a);
        slopes.push(b);
    }
    let surrogate = include_surrogate.then(|| simple_ols(&u, &ds.surrogate));
    Transform::Orthogonalize {
        utilization_col: uc,
        columns,
        intercepts,
        slopes,
        surrogate,
    }
    .apply(ds)
}

/// Centers and scales every feature column to mean 0 and unit standard
/// deviation (divisor n_obs).
pub fn standardize(ds: &Dataset) -> Result<Dataset> {
    let cols: Vec<usize> = (0..ds.n_features()).collect();
    standardize_columns(ds, &cols)
}

pub fn standardize_columns(ds: &Dataset, cols: &[usize]) -> Result<Dataset> {
    let n = ds.n_obs() as f64;
    let mut means = Vec::with_capacity(cols.len());
    let mut scales = Vec::with_capacity(cols.len());
    for &c in cols {
        check_column(ds, c)?;
        let col = ds.features.column(c);
        let m = col.sum() / n;
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
        let sd = var.sqrt();
        if !(sd > 1e-12 * (1.0 + m.abs())) {
            return Err(Error::ConstantColumn(ds.column_names[c].clone()));
        }
        means.push(m);
        scales.push(sd);
    }
    Transform::Standardize {
        columns: cols.to_vec(),
        means,
        scales,
    }
    .apply(ds)
}

/// Inverts the most recent standardization step and removes it from the log.
pub fn unstandardize(ds: &Dataset) -> Result<Dataset> {
    let pos = ds
        .log
        .steps
        .iter()
        .rposition(|s| matches!(s, Transform::Standardize { .. }))
        .ok_or_else(|| Error::InvalidArgument("dataset was never standardized".into()))?;
    let mut out = ds.clone();
    if let Transform::Standardize {
        columns,
        means,
        scales,
    } = &ds.log.steps[pos]
    {
        for ((&c, &m), &s) in columns.iter().zip(means).zip(scales) {
            for i in 0..ds.n_obs() {
                out.features[(i, c)] = ds.features[(i, c)] * s + m;
            }
        }
    }
    out.log.steps.remove(pos);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn schema() -> CsvSchema {
        CsvSchema {
            surrogate_col: "S".into(),
            label_col: Some("Y".into()),
            utilization_col: None,
        }
    }

    fn single_column(values: &[f64]) -> Dataset {
        Dataset::new(
            DMatrix::from_column_slice(values.len(), 1, values),
            vec![0.0; values.len()],
            None,
            vec!["x".into()],
            None,
        )
        .unwrap()
    }

    #[test]
    fn csv_with_partial_labels() {
        let f = write_tmp("x1,x2,S,Y\n1,2,3,1\n4,5,6,\n7,8,9,0\n");
        let ds = load_csv(f.path(), &schema()).unwrap();
        assert_eq!(ds.n_obs(), 3);
        assert_eq!(ds.n_features(), 2);
        let labels = ds.labels.unwrap();
        assert_eq!(labels.rows, vec![0, 2]);
        assert_eq!(labels.values, vec![1, 0]);
        assert_eq!(ds.surrogate, vec![3.0, 6.0, 9.0]);
        assert_eq!(ds.features[(1, 1)], 5.0);
    }

    #[test]
    fn csv_rejects_non_binary_label() {
        let f = write_tmp("x1,S,Y\n1,3,2\n");
        let err = load_csv(f.path(), &schema()).unwrap_err();
        assert!(matches!(err, Error::LabelNotBinary { .. }));
        assert!(err.to_string().contains("label not binary"));
    }

    #[test]
    fn csv_rejects_missing_feature() {
        let f = write_tmp("x1,x2,S,Y\n1,,3,1\n");
        let err = load_csv(f.path(), &schema()).unwrap_err();
        assert!(matches!(err, Error::MissingValue { row: 0, col: 1 }));
        assert_eq!(err.to_string(), "missing value at (0,1)");
    }

    #[test]
    fn csv_rejects_non_numeric_and_duplicates() {
        let f = write_tmp("x1,S,Y\n1e3,abc,1\n");
        assert!(matches!(
            load_csv(f.path(), &schema()).unwrap_err(),
            Error::NonNumeric { .. }
        ));
        let f = write_tmp("x1,x1,S,Y\n1,2,3,1\n");
        assert!(matches!(
            load_csv(f.path(), &schema()).unwrap_err(),
            Error::DuplicateColumn(_)
        ));
        let f = write_tmp("x1,S,Y\n1,000,1\n");
        assert!(load_csv(f.path(), &schema()).is_ok());
        let f = write_tmp("x1,S,Y\n\"1,000\",3,1\n");
        assert!(matches!(
            load_csv(f.path(), &schema()).unwrap_err(),
            Error::NonNumeric { .. }
        ));
    }

    #[test]
    fn csv_missing_file() {
        let err = load_csv("/definitely/not/here.csv", &schema()).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn log1p_values() {
        let e = std::f64::consts::E;
        let ds = single_column(&[0.0, e - 1.0, 7.0]);
        let out = log1p_counts(&ds, &[0], false).unwrap();
        assert_eq!(out.features[(0, 0)], 0.0);
        assert!((out.features[(1, 0)] - 1.0).abs() < 1e-15);
        // ln 8 = 3 ln 2
        assert!((out.features[(2, 0)] - 2.0794415416798357).abs() < 1e-12);
        assert!(matches!(
            log1p_counts(&single_column(&[-1.0]), &[0], false).unwrap_err(),
            Error::NegativeCount { .. }
        ));
    }

    #[test]
    fn standardize_three_points() {
        let ds = single_column(&[1.0, 2.0, 3.0]);
        let out = standardize(&ds).unwrap();
        let r = (1.5f64).sqrt();
        assert!((out.features[(0, 0)] + r).abs() < 1e-12);
        assert!(out.features[(1, 0)].abs() < 1e-12);
        assert!((out.features[(2, 0)] - r).abs() < 1e-12);
        let again = standardize(&out).unwrap();
        for i in 0..3 {
            assert!((again.features[(i, 0)] - out.features[(i, 0)]).abs() < 1e-12);
        }
        assert!(matches!(
            standardize(&single_column(&[2.0, 2.0])).unwrap_err(),
            Error::ConstantColumn(_)
        ));
    }

    fn util_dataset(other: &[f64], u: &[f64]) -> Dataset {
        let n = u.len();
        let mut m = DMatrix::zeros(n, 2);
        for i in 0..n {
            m[(i, 0)] = u[i];
            m[(i, 1)] = other[i];
        }
        Dataset::new(m, vec![0.0; n], None, vec!["util".into(), "x".into()], Some(0)).unwrap()
    }

    #[test]
    fn orthogonalization_cases() {
        let u = [1.0, 2.0, 3.0, 4.0];
        // e is orthogonal to both 1 and u
        let e = [1.0, -1.0, -1.0, 1.0];
        let out = orthogonalize_against_utilization(&util_dataset(&e, &u), false).unwrap();
        for i in 0..4 {
            assert!((out.features[(i, 1)] - e[i]).abs() < 1e-12);
            assert_eq!(out.features[(i, 0)], u[i]);
        }
        let out = orthogonalize_against_utilization(&util_dataset(&u, &u), false).unwrap();
        for i in 0..4 {
            assert!(out.features[(i, 1)].abs() < 1e-12);
        }
        let shifted: Vec<f64> = (0..4).map(|i| 2.0 * u[i] + 3.0 + e[i]).collect();
        let out = orthogonalize_against_utilization(&util_dataset(&shifted, &u), false).unwrap();
        for i in 0..4 {
            assert!((out.features[(i, 1)] - e[i]).abs() < 1e-12);
        }
        assert!(matches!(
            orthogonalize_against_utilization(&util_dataset(&e, &[5.0; 4]), false).unwrap_err(),
            Error::ConstantColumn(_)
        ));
    }

    #[test]
    fn csv_roundtrip_through_writer() {
        let f = write_tmp("x1,x2,S,Y\n1.5,2,3,1\n4,5e-3,6,\n");
        let ds = load_csv(f.path(), &schema()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_csv(&ds, out.path(), "S", "Y").unwrap();
        let back = load_csv(out.path(), &schema()).unwrap();
        assert_eq!(back, ds);
    }
}
