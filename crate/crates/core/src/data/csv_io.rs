//! Dataset CSV files.
//!
//! Header: feature columns, then `label`, then optionally `severity`.
//! Labels are class-name strings; severities are integers 0–4. A JSON
//! sidecar (`<name>.meta.json`) may carry class order, feature names and
//! standardization statistics.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::data::{DatasetMetadata, LabeledDataset, MAX_SEVERITY, NORMAL_CLASS};
use crate::error::{Error, Result};
use crate::math::Matrix;

pub const LABEL_COLUMN: &str = "label";
pub const SEVERITY_COLUMN: &str = "severity";

pub fn write_csv<W: Write>(data: &LabeledDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = data.feature_names.iter().map(String::as_str).collect();
    header.push(LABEL_COLUMN);
    header.push(SEVERITY_COLUMN);
    w.write_record(&header).map_err(csv_io_error)?;
    let mut fields = Vec::with_capacity(header.len());
    for i in 0..data.len() {
        fields.clear();
        fields.extend(data.features.row(i).iter().map(|v| v.to_string()));
        fields.push(data.class_names[data.labels[i]].clone());
        fields.push(data.severity[i].to_string());
        w.write_record(&fields).map_err(csv_io_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(data: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(data, std::io::BufWriter::new(file))
}

/// Parses a dataset. Class indices follow the sorted distinct label
/// strings, with `NM` moved to index 0 when present. Without a severity
/// column, fault-free rows get severity 0 and all others severity 4.
pub fn read_csv<R: Read>(input: R, source: &Path) -> Result<LabeledDataset> {
    let mut text = String::new();
    let mut input = input;
    input
        .read_to_string(&mut text)
        .map_err(|e| Error::MalformedRow { line: 1, message: e.to_string() })?;
    if text.trim().is_empty() {
        return Err(Error::EmptyFile(source.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(csv_row_error)?.clone();
    let columns: Vec<&str> = header.iter().collect();
    let label_col = match columns.iter().position(|&c| c == LABEL_COLUMN) {
        Some(i) => i,
        None => return Err(Error::Schema(format!("missing `{LABEL_COLUMN}` column"))),
    };
    if label_col == 0 {
        return Err(Error::Schema("no feature columns before `label`".into()));
    }
    let has_severity = match &columns[label_col + 1..] {
        [] => false,
        [c] if *c == SEVERITY_COLUMN => true,
        rest => {
            return Err(Error::Schema(format!(
                "unknown column(s) after `{LABEL_COLUMN}`: {}",
                rest.join(", ")
            )))
        }
    };
    let feature_names: Vec<String> = columns[..label_col].iter().map(|s| s.to_string()).collect();
    if let Some(dup) = feature_names.iter().find(|n| *n == SEVERITY_COLUMN) {
        return Err(Error::Schema(format!("column `{dup}` must follow `{LABEL_COLUMN}`")));
    }
    let unique: BTreeSet<&String> = feature_names.iter().collect();
    if unique.len() != feature_names.len() {
        return Err(Error::Schema("duplicate feature column names".into()));
    }

    let d = feature_names.len();
    let mut values = Vec::new();
    let mut raw_labels = Vec::new();
    let mut severities = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_row_error)?;
        let line = record.position().map_or(0, |p| p.line());
        for (j, cell) in record.iter().take(d).enumerate() {
            let v: f64 = cell.trim().parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                Error::NonNumeric { line, column: feature_names[j].clone(), value: cell.to_string() }
            })?;
            values.push(v);
        }
        raw_labels.push(record[label_col].trim().to_string());
        if has_severity {
            let cell = &record[label_col + 1];
            let s: u8 = cell.trim().parse().ok().filter(|s| *s <= MAX_SEVERITY).ok_or_else(|| {
                Error::NonNumeric { line, column: SEVERITY_COLUMN.into(), value: cell.to_string() }
            })?;
            severities.push(Some((s, line)));
        } else {
            severities.push(None);
        }
    }
    if raw_labels.is_empty() {
        return Err(Error::Schema("no data rows".into()));
    }

    let distinct: BTreeSet<&str> = raw_labels.iter().map(String::as_str).collect();
    let mut class_names: Vec<String> = distinct.iter().map(|s| s.to_string()).collect();
    if let Some(pos) = class_names.iter().position(|c| c == NORMAL_CLASS) {
        let nm = class_names.remove(pos);
        class_names.insert(0, nm);
    }
    build(values, d, &raw_labels, &severities, feature_names, class_names)
}

fn build(
    values: Vec<f64>,
    d: usize,
    raw_labels: &[String],
    severities: &[Option<(u8, u64)>],
    feature_names: Vec<String>,
    class_names: Vec<String>,
) -> Result<LabeledDataset> {
    let mut labels = Vec::with_capacity(raw_labels.len());
    for name in raw_labels {
        match class_names.iter().position(|c| c == name) {
            Some(i) => labels.push(i),
            None => return Err(Error::Schema(format!("label `{name}` not among known classes"))),
        }
    }
    let mut severity = Vec::with_capacity(labels.len());
    for (&y, s) in labels.iter().zip(severities) {
        match *s {
            Some((s, line)) => {
                if (s == 0) != (y == 0) {
                    return Err(Error::MalformedRow {
                        line,
                        message: format!(
                            "severity {s} inconsistent with class `{}` (severity 0 is reserved for `{}`)",
                            class_names[y], class_names[0]
                        ),
                    });
                }
                severity.push(s);
            }
            None => severity.push(if y == 0 { 0 } else { MAX_SEVERITY }),
        }
    }
    let n = labels.len();
    LabeledDataset::new(Matrix::new(n, d, values)?, labels, severity, feature_names, class_names)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    read_csv(std::io::BufReader::new(file), path)
}

/// `data.csv` → `data.meta.json`
pub fn metadata_path(csv_path: impl AsRef<Path>) -> PathBuf {
    csv_path.as_ref().with_extension("meta.json")
}

/// Writes the CSV and its metadata sidecar.
pub fn save_dataset(data: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    save_csv(data, path)?;
    let meta = serde_json::to_string_pretty(&data.metadata())?;
    std::fs::write(metadata_path(path), meta + "\n")?;
    Ok(())
}

/// Loads a CSV, honoring its sidecar when one exists: class order and
/// standardization record come from the sidecar.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let mut data = load_csv(path)?;
    let meta_path = metadata_path(path);
    if meta_path.exists() {
        let meta: DatasetMetadata = serde_json::from_str(&std::fs::read_to_string(&meta_path)?)?;
        data = with_metadata(data, meta)?;
    }
    Ok(data)
}

/// Reorders classes and attaches the standardization record from a sidecar.
pub fn with_metadata(data: LabeledDataset, meta: DatasetMetadata) -> Result<LabeledDataset> {
    if meta.feature_names != data.feature_names {
        return Err(Error::Schema("sidecar feature names do not match the CSV header".into()));
    }
    let mut labels = Vec::with_capacity(data.len());
    for &y in &data.labels {
        let name = &data.class_names[y];
        match meta.class_names.iter().position(|c| c == name) {
            Some(i) => labels.push(i),
            None => return Err(Error::Schema(format!("label `{name}` missing from sidecar classes"))),
        }
    }
    let mut out = LabeledDataset::new(data.features, labels, data.severity, data.feature_names, meta.class_names)?;
    out.standardization = meta.standardization;
    Ok(out)
}

/// One message per class making up less than 5% of the rows.
pub fn class_balance_warnings(data: &LabeledDataset) -> Vec<String> {
    let mut counts = vec![0usize; data.num_classes()];
    for &y in &data.labels {
        counts[y] += 1;
    }
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| (c as f64) < 0.05 * data.len() as f64)
        .map(|(k, &c)| format!("class `{}` has {c} of {} rows (< 5%)", data.class_names[k], data.len()))
        .collect()
}

fn csv_row_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    let message = match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("expected {expected_len} fields, found {len}")
        }
        _ => e.to_string(),
    };
    Error::MalformedRow { line, message }
}

fn csv_io_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}
