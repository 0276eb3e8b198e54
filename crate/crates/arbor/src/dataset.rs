//! Tabular data ingestion, binarization and reproducible splitting.
//!
//! Categorical columns are one-hot encoded (one binary column per level,
//! all levels kept). Integer columns are encoded cumulatively: one binary
//! column per distinct value except the largest, set to 1 when the row
//! value is less than or equal to the threshold. The cumulative encoding
//! preserves ordering tests, so a univariate split on the original integer
//! column is expressible as a split on one encoded column.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot open {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv parse error: {0}")]
    Csv(#[from] csv::Error),
    #[error("file has no data rows")]
    EmptyFile,
    #[error("label column {0:?} not found in header")]
    MissingLabelColumn(String),
    #[error("row {row} has {got} fields, expected {expected}")]
    RaggedRow { row: usize, got: usize, expected: usize },
    #[error("missing value at row {row}, column {column:?}")]
    MissingValue { row: usize, column: String },
    #[error("column {column:?} declared integer but row {row} holds {value:?}")]
    NotAnInteger { row: usize, column: String, value: String },
    #[error("column {column:?} declared binary but row {row} holds {value:?}")]
    NotBinary { row: usize, column: String, value: String },
    #[error("unknown column {0:?} in kind declaration")]
    UnknownColumn(String),
    #[error("unknown column kind {0:?} (expected cat, int or bin)")]
    UnknownKind(String),
    #[error("dataset has a single class; need at least two")]
    SingleClass,
    #[error("split fractions {0:?} do not sum to 1")]
    BadFractions([f64; 3]),
    #[error("too few rows ({n_rows}) for split fractions {fractions:?}")]
    TooFewRows { n_rows: usize, fractions: [f64; 3] },
}

/// Declared or inferred kind of a raw feature column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Categorical,
    Integer,
    Binary,
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnKind::Categorical => write!(f, "cat"),
            ColumnKind::Integer => write!(f, "int"),
            ColumnKind::Binary => write!(f, "bin"),
        }
    }
}

/// A raw feature column: the kind decides how it is binarized.
#[derive(Debug, Clone)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    pub values: Vec<String>,
}

/// Parsed tabular data before binarization.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub columns: Vec<Column>,
    pub labels: Vec<String>,
    pub n_rows: usize,
}

/// Provenance of one binary feature column.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Encoding {
    /// 1 iff the source categorical column equals this level.
    Level { source: String, level: String },
    /// 1 iff the source integer column is at most this threshold.
    AtMost { source: String, threshold: i64 },
    /// Source column was already binary.
    Passthrough { source: String },
}

/// A column dropped during binarization, with the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct DroppedColumn {
    pub name: String,
    pub reason: String,
}

/// Fully binarized dataset: rows of 0/1 features plus class indices.
#[derive(Debug, Clone)]
pub struct BinaryDataset {
    /// Row-major feature matrix, entries 0 or 1.
    pub features: Vec<Vec<u8>>,
    /// Per-row class index in `0..class_names.len()`.
    pub labels: Vec<usize>,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    /// Provenance of each binary column, aligned with `feature_names`.
    pub encoding_map: Vec<Encoding>,
    /// Columns discarded during binarization (single distinct value).
    pub dropped: Vec<DroppedColumn>,
}

impl BinaryDataset {
    pub fn n_rows(&self) -> usize {
        self.features.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Rows of each class, as counts indexed by class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes()];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Build a dataset straight from 0/1 rows; names are synthesized.
    pub fn from_rows(features: Vec<Vec<u8>>, labels: Vec<usize>, n_classes: usize) -> Self {
        assert_eq!(features.len(), labels.len());
        let n_features = features.first().map_or(0, Vec::len);
        assert!(features.iter().all(|r| r.len() == n_features));
        assert!(features.iter().flatten().all(|&v| v <= 1));
        assert!(labels.iter().all(|&y| y < n_classes));
        BinaryDataset {
            features,
            labels,
            feature_names: (0..n_features).map(|f| format!("f{f}")).collect(),
            class_names: (0..n_classes).map(|k| format!("c{k}")).collect(),
            encoding_map: Vec::new(),
            dropped: Vec::new(),
        }
    }

    /// Keep only the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> BinaryDataset {
        BinaryDataset {
            features: rows.iter().map(|&r| self.features[r].clone()).collect(),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            encoding_map: self.encoding_map.clone(),
            dropped: Vec::new(),
        }
    }

    /// Concatenate the rows of two datasets with identical schemas.
    pub fn union(&self, other: &BinaryDataset) -> BinaryDataset {
        assert_eq!(self.feature_names, other.feature_names);
        assert_eq!(self.class_names, other.class_names);
        let mut out = self.clone();
        out.features.extend(other.features.iter().cloned());
        out.labels.extend(other.labels.iter().cloned());
        out
    }
}

/// Train / calibration / test proportions plus the shuffle seed.
#[derive(Debug, Clone, Copy)]
pub struct SplitSpec {
    pub seed: u64,
    /// (train, calibration, test); must sum to 1 within 1e-9.
    pub fractions: (f64, f64, f64),
}

impl SplitSpec {
    pub fn new(seed: u64, fractions: (f64, f64, f64)) -> Result<Self, DatasetError> {
        let (a, b, c) = fractions;
        let ok = a >= 0.0 && b >= 0.0 && c >= 0.0 && (a + b + c - 1.0).abs() <= 1e-9;
        if !ok {
            return Err(DatasetError::BadFractions([a, b, c]));
        }
        Ok(SplitSpec { seed, fractions })
    }
}

/// Parse a delimiter-separated file with a header row.
///
/// `column_kinds` overrides kind inference per column name. Unlisted
/// columns are inferred: all values in {0,1} means binary, all values
/// integer means integer, anything else categorical.
pub fn load_csv(
    path: &Path,
    label_column: &str,
    column_kinds: Option<&BTreeMap<String, ColumnKind>>,
) -> Result<RawTable, DatasetError> {
    load_csv_inner(path, Some(label_column), column_kinds)
}

/// Parse a file that carries no label column; every column becomes a
/// feature and `labels` stays empty. Used at prediction time.
pub fn load_csv_unlabeled(
    path: &Path,
    column_kinds: Option<&BTreeMap<String, ColumnKind>>,
) -> Result<RawTable, DatasetError> {
    load_csv_inner(path, None, column_kinds)
}

fn load_csv_inner(
    path: &Path,
    label_column: Option<&str>,
    column_kinds: Option<&BTreeMap<String, ColumnKind>>,
) -> Result<RawTable, DatasetError> {
    let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);

    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let label_idx = match label_column {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| DatasetError::MissingLabelColumn(name.to_string()))?,
        ),
        None => None,
    };

    if let Some(kinds) = column_kinds {
        for name in kinds.keys() {
            if !header.contains(name) {
                return Err(DatasetError::UnknownColumn(name.clone()));
            }
        }
    }

    let mut raw_columns: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    let mut labels = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(DatasetError::RaggedRow {
                row: row_idx + 1,
                got: record.len(),
                expected: header.len(),
            });
        }
        for (col_idx, value) in record.iter().enumerate() {
            let value = value.trim();
            if value.is_empty() {
                return Err(DatasetError::MissingValue {
                    row: row_idx + 1,
                    column: header[col_idx].clone(),
                });
            }
            if Some(col_idx) == label_idx {
                labels.push(value.to_string());
            } else {
                raw_columns[col_idx].push(value.to_string());
            }
        }
    }
    let n_rows = raw_columns
        .iter()
        .enumerate()
        .find(|(i, _)| Some(*i) != label_idx)
        .map_or(labels.len(), |(_, c)| c.len());
    if n_rows == 0 {
        return Err(DatasetError::EmptyFile);
    }

    let mut columns = Vec::new();
    for (col_idx, name) in header.iter().enumerate() {
        if Some(col_idx) == label_idx {
            continue;
        }
        let values = std::mem::take(&mut raw_columns[col_idx]);
        let kind = match column_kinds.and_then(|k| k.get(name)) {
            Some(&kind) => {
                validate_kind(name, kind, &values)?;
                kind
            }
            None => infer_kind(&values),
        };
        columns.push(Column {
            name: name.clone(),
            kind,
            values,
        });
    }

    Ok(RawTable {
        columns,
        labels,
        n_rows,
    })
}

/// Parse `col=cat,other=int` style kind declarations.
pub fn parse_kind_spec(spec: &str) -> Result<BTreeMap<String, ColumnKind>, DatasetError> {
    let mut kinds = BTreeMap::new();
    for part in spec.split(',').filter(|p| !p.is_empty()) {
        let (name, kind) = part
            .split_once('=')
            .ok_or_else(|| DatasetError::UnknownKind(part.to_string()))?;
        let kind = match kind.trim() {
            "cat" | "categorical" => ColumnKind::Categorical,
            "int" | "integer" => ColumnKind::Integer,
            "bin" | "binary" => ColumnKind::Binary,
            other => return Err(DatasetError::UnknownKind(other.to_string())),
        };
        kinds.insert(name.trim().to_string(), kind);
    }
    Ok(kinds)
}

fn infer_kind(values: &[String]) -> ColumnKind {
    if values.iter().all(|v| v == "0" || v == "1") {
        ColumnKind::Binary
    } else if values.iter().all(|v| v.parse::<i64>().is_ok()) {
        ColumnKind::Integer
    } else {
        ColumnKind::Categorical
    }
}

fn validate_kind(name: &str, kind: ColumnKind, values: &[String]) -> Result<(), DatasetError> {
    match kind {
        ColumnKind::Categorical => Ok(()),
        ColumnKind::Integer => {
            for (row, v) in values.iter().enumerate() {
                if v.parse::<i64>().is_err() {
                    return Err(DatasetError::NotAnInteger {
                        row: row + 1,
                        column: name.to_string(),
                        value: v.clone(),
                    });
                }
            }
            Ok(())
        }
        ColumnKind::Binary => {
            for (row, v) in values.iter().enumerate() {
                if v != "0" && v != "1" {
                    return Err(DatasetError::NotBinary {
                        row: row + 1,
                        column: name.to_string(),
                        value: v.clone(),
                    });
                }
            }
            Ok(())
        }
    }
}

/// Encode every raw column into binary features.
///
/// Categorical columns with L levels expand to L one-hot columns.
/// Integer columns with L distinct values expand to L-1 cumulative
/// columns; the "at most max" column is constant 1 and dropped. Columns
/// with a single distinct value carry no information and are dropped
/// with a warning record.
pub fn binarize(table: &RawTable) -> Result<BinaryDataset, DatasetError> {
    let mut class_names: Vec<String> = table.labels.to_vec();
    class_names.sort();
    class_names.dedup();
    if class_names.len() < 2 {
        return Err(DatasetError::SingleClass);
    }
    let labels = table
        .labels
        .iter()
        .map(|y| class_names.iter().position(|c| c == y).unwrap())
        .collect();

    let mut feature_names = Vec::new();
    let mut encoding_map = Vec::new();
    let mut dropped = Vec::new();
    let mut columns: Vec<Vec<u8>> = Vec::new();

    for column in &table.columns {
        let mut distinct: Vec<&String> = column.values.iter().collect();
        distinct.sort();
        distinct.dedup();
        if distinct.len() < 2 {
            dropped.push(DroppedColumn {
                name: column.name.clone(),
                reason: "single distinct value".to_string(),
            });
            continue;
        }
        match column.kind {
            ColumnKind::Categorical => {
                for level in &distinct {
                    feature_names.push(format!("{}={}", column.name, level));
                    encoding_map.push(Encoding::Level {
                        source: column.name.clone(),
                        level: (*level).clone(),
                    });
                    columns.push(
                        column
                            .values
                            .iter()
                            .map(|v| u8::from(v == *level))
                            .collect(),
                    );
                }
            }
            ColumnKind::Integer => {
                let parsed: Vec<i64> = column.values.iter().map(|v| v.parse().unwrap()).collect();
                let mut thresholds: Vec<i64> = parsed.clone();
                thresholds.sort_unstable();
                thresholds.dedup();
                thresholds.pop(); // "at most max" is constant 1
                for &threshold in &thresholds {
                    feature_names.push(format!("{}<={}", column.name, threshold));
                    encoding_map.push(Encoding::AtMost {
                        source: column.name.clone(),
                        threshold,
                    });
                    columns.push(parsed.iter().map(|&v| u8::from(v <= threshold)).collect());
                }
            }
            ColumnKind::Binary => {
                feature_names.push(column.name.clone());
                encoding_map.push(Encoding::Passthrough {
                    source: column.name.clone(),
                });
                columns.push(
                    column
                        .values
                        .iter()
                        .map(|v| if v == "1" { 1 } else { 0 })
                        .collect(),
                );
            }
        }
    }

    let features = (0..table.n_rows)
        .map(|row| columns.iter().map(|col| col[row]).collect())
        .collect();

    Ok(BinaryDataset {
        features,
        labels,
        feature_names,
        class_names,
        encoding_map,
        dropped,
    })
}

/// Re-encode a raw table with a previously learned encoding map, so a
/// tree trained elsewhere can score new rows. Labels are not required.
pub fn encode_with(table: &RawTable, encoding: &[Encoding]) -> Result<Vec<Vec<u8>>, DatasetError> {
    let column = |name: &str| -> Result<&Column, DatasetError> {
        table
            .columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| DatasetError::UnknownColumn(name.to_string()))
    };
    let mut columns: Vec<Vec<u8>> = Vec::with_capacity(encoding.len());
    for entry in encoding {
        match entry {
            Encoding::Level { source, level } => {
                let col = column(source)?;
                columns.push(col.values.iter().map(|v| u8::from(v == level)).collect());
            }
            Encoding::AtMost { source, threshold } => {
                let col = column(source)?;
                let mut encoded = Vec::with_capacity(table.n_rows);
                for (row, v) in col.values.iter().enumerate() {
                    let value: i64 = v.parse().map_err(|_| DatasetError::NotAnInteger {
                        row: row + 1,
                        column: source.clone(),
                        value: v.clone(),
                    })?;
                    encoded.push(u8::from(value <= *threshold));
                }
                columns.push(encoded);
            }
            Encoding::Passthrough { source } => {
                let col = column(source)?;
                columns.push(col.values.iter().map(|v| u8::from(v == "1")).collect());
            }
        }
    }
    Ok((0..table.n_rows)
        .map(|row| columns.iter().map(|c| c[row]).collect())
        .collect())
}

/// Map raw label strings onto a previously learned class list.
pub fn labels_with(labels: &[String], class_names: &[String]) -> Result<Vec<usize>, DatasetError> {
    labels
        .iter()
        .map(|y| {
            class_names
                .iter()
                .position(|c| c == y)
                .ok_or_else(|| DatasetError::UnknownColumn(format!("label value {y:?}")))
        })
        .collect()
}

/// Per-row level indices of a raw column, plus the sorted level names.
/// Used for protected and legitimate-factor attributes.
pub fn column_levels(table: &RawTable, name: &str) -> Result<(Vec<usize>, Vec<String>), DatasetError> {
    let column = table
        .columns
        .iter()
        .find(|c| c.name == name)
        .ok_or_else(|| DatasetError::UnknownColumn(name.to_string()))?;
    let mut levels: Vec<String> = column.values.to_vec();
    levels.sort();
    levels.dedup();
    let indices = column
        .values
        .iter()
        .map(|v| levels.iter().position(|l| l == v).unwrap())
        .collect();
    Ok((indices, levels))
}

impl BinaryDataset {
    /// Drop every binary feature derived from one source column, so a
    /// protected attribute can be excluded from branching.
    pub fn drop_source_column(&self, source: &str) -> BinaryDataset {
        let keep: Vec<usize> = (0..self.n_features())
            .filter(|&f| match self.encoding_map.get(f) {
                Some(Encoding::Level { source: s, .. })
                | Some(Encoding::AtMost { source: s, .. })
                | Some(Encoding::Passthrough { source: s }) => s != source,
                None => true,
            })
            .collect();
        BinaryDataset {
            features: self
                .features
                .iter()
                .map(|row| keep.iter().map(|&f| row[f]).collect())
                .collect(),
            labels: self.labels.clone(),
            feature_names: keep.iter().map(|&f| self.feature_names[f].clone()).collect(),
            class_names: self.class_names.clone(),
            encoding_map: keep.iter().map(|&f| self.encoding_map[f].clone()).collect(),
            dropped: self.dropped.clone(),
        }
    }
}

/// Sizes of the three splits under the rounding rule: calibration and
/// test take their rounded share, train absorbs the remainder.
pub fn split_sizes(n_rows: usize, fractions: (f64, f64, f64)) -> (usize, usize, usize) {
    let n_cal = (fractions.1 * n_rows as f64).round() as usize;
    let n_test = (fractions.2 * n_rows as f64).round() as usize;
    let n_train = n_rows.saturating_sub(n_cal + n_test);
    (n_train, n_cal, n_test)
}

/// Shuffled row indices of the three splits. ChaCha8 is a portable
/// keyed stream cipher, so the same seed yields the same partition on
/// every platform.
pub fn split_indices(
    n_rows: usize,
    spec: &SplitSpec,
) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>), DatasetError> {
    let fractions = [spec.fractions.0, spec.fractions.1, spec.fractions.2];
    let (n_train, n_cal, n_test) = split_sizes(n_rows, spec.fractions);
    let empty_with_mass = (n_train == 0 && spec.fractions.0 > 0.0)
        || (n_cal == 0 && spec.fractions.1 > 0.0)
        || (n_test == 0 && spec.fractions.2 > 0.0);
    if n_rows < 3 || empty_with_mass || n_train + n_cal + n_test != n_rows {
        return Err(DatasetError::TooFewRows { n_rows, fractions });
    }

    let mut order: Vec<usize> = (0..n_rows).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);
    let test = order.split_off(n_train + n_cal);
    let cal = order.split_off(n_train);
    Ok((order, cal, test))
}

/// Partition a dataset into train, calibration and test subsets.
pub fn split(
    data: &BinaryDataset,
    spec: &SplitSpec,
) -> Result<(BinaryDataset, BinaryDataset, BinaryDataset), DatasetError> {
    let (train, cal, test) = split_indices(data.n_rows(), spec)?;
    Ok((data.subset(&train), data.subset(&cal), data.subset(&test)))
}
