use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major feature matrix with binary labels (1 = malicious).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    features: Vec<Vec<f64>>,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>, features: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::shape(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        let d = feature_names.len();
        for (i, row) in features.iter().enumerate() {
            if row.len() != d {
                return Err(Error::shape(format!(
                    "row {i} has {} values, expected {d}",
                    row.len()
                )));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("row {i}, column {j}: value is not finite")));
            }
        }
        if let Some(i) = labels.iter().position(|&y| y > 1) {
            return Err(Error::invalid(format!(
                "label {} at row {i} is not binary",
                labels[i]
            )));
        }
        Ok(Dataset {
            feature_names,
            features,
            labels,
        })
    }

    /// Dataset with generated names `f0, f1, …`.
    pub fn from_rows(features: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        let d = features.first().map_or(0, Vec::len);
        let names = (0..d).map(|j| format!("f{j}")).collect();
        Dataset::new(names, features, labels)
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i]
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.features.iter().map(|r| r[j]).collect()
    }

    pub fn has_both_classes(&self) -> bool {
        self.labels.contains(&0) && self.labels.contains(&1)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            features: rows.iter().map(|&i| self.features[i].clone()).collect(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Dataset {
        Dataset {
            feature_names: cols.iter().map(|&j| self.feature_names[j].clone()).collect(),
            features: self
                .features
                .iter()
                .map(|r| cols.iter().map(|&j| r[j]).collect())
                .collect(),
            labels: self.labels.clone(),
        }
    }

    /// Replaces the feature matrix, keeping labels.
    pub(crate) fn with_features(&self, names: Vec<String>, features: Vec<Vec<f64>>) -> Result<Dataset> {
        Dataset::new(names, features, self.labels.clone())
    }
}

struct Table {
    names: Vec<String>,
    rows: Vec<Vec<f64>>,
    labels: Option<Vec<u8>>,
}

fn ingest(path: &Path, location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Ingest {
        path: path.to_path_buf(),
        location: location.into(),
        message: message.into(),
    }
}

fn read_table(
    path: &Path,
    label_column: Option<&str>,
    positive_label: &str,
    label_required: bool,
) -> Result<Table> {
    let file = File::open(path).map_err(|e| ingest(path, "file", e.to_string()))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| ingest(path, "line 1", e.to_string()))?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(ingest(path, "line 1", "file is empty (no header row)"));
    }

    let label_idx = label_column.and_then(|name| headers.iter().position(|h| h == name));
    if label_required && label_idx.is_none() {
        return Err(ingest(
            path,
            "header",
            format!("label column `{}` not found", label_column.unwrap_or_default()),
        ));
    }
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&j| Some(j) != label_idx).collect();
    let names = feature_cols.iter().map(|&j| headers[j].to_string()).collect();

    let mut rows = Vec::new();
    let mut labels = label_idx.map(|_| Vec::new());
    for (r, record) in reader.records().enumerate() {
        let row_no = r + 1;
        let record = record.map_err(|e| ingest(path, format!("row {row_no}"), e.to_string()))?;
        let line = record.position().map_or(row_no + 1, |p| p.line() as usize);
        let mut row = Vec::with_capacity(feature_cols.len());
        for &j in &feature_cols {
            let cell = record.get(j).unwrap_or("");
            let value: f64 = cell.parse().map_err(|_| {
                ingest(
                    path,
                    format!("row {row_no} (line {line}), column `{}`", &headers[j]),
                    format!("cannot parse `{cell}` as a number"),
                )
            })?;
            if !value.is_finite() {
                return Err(ingest(
                    path,
                    format!("row {row_no} (line {line}), column `{}`", &headers[j]),
                    format!("non-finite value `{cell}`"),
                ));
            }
            row.push(value);
        }
        if let (Some(li), Some(labels)) = (label_idx, labels.as_mut()) {
            labels.push(u8::from(record.get(li).unwrap_or("") == positive_label));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(ingest(path, "data", "no data rows after the header"));
    }
    Ok(Table { names, rows, labels })
}

/// Reads a CSV with a header row. Every column except `label_column` must be
/// numeric; a label equal to `positive_label` maps to 1, anything else to 0.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str, positive_label: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let table = read_table(path, Some(label_column), positive_label, true)?;
    Dataset::new(table.names, table.rows, table.labels.unwrap_or_default())
        .map_err(|e| ingest(path, "data", e.to_string()))
}

/// Reads feature columns only. If `label_column` is present it is skipped.
pub fn load_unlabeled_csv(
    path: impl AsRef<Path>,
    label_column: Option<&str>,
) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let table = read_table(path.as_ref(), label_column, "", false)?;
    Ok((table.names, table.rows))
}

/// Writes features plus a trailing 0/1 label column. Values use the shortest
/// representation that round-trips exactly.
pub fn write_csv(data: &Dataset, path: impl AsRef<Path>, label_column: &str) -> Result<()> {
    let mut out = String::new();
    for name in data.feature_names() {
        out.push_str(name);
        out.push(',');
    }
    out.push_str(label_column);
    out.push('\n');
    for (row, y) in data.features().iter().zip(data.labels()) {
        for v in row {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{y}\n"));
    }
    let mut f = File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}
