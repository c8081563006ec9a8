//! Dataset preparation: ingestion, categorical filtering, one-class
//! partitioning and [-1, 1] scaling.

mod csv_io;
mod synthetic;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use csv_io::{load_csv, read_csv, write_csv, CsvSchema};
pub use synthetic::{make_synthetic, SyntheticKind, SyntheticSpec};

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::rng;

/// Categorical columns with more distinct values than this are dropped.
pub const MAX_CATEGORICAL_VALUES: usize = 3;

/// Share of the training pool held out for validation.
pub const VALIDATION_FRACTION: f64 = 0.1;

/// Smallest number of normal samples `partition` accepts.
pub const MIN_NORMAL_SAMPLES: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnValues {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl ColumnValues {
    pub fn len(&self) -> usize {
        match self {
            ColumnValues::Numeric(v) => v.len(),
            ColumnValues::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub values: ColumnValues,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionTag {
    Train,
    Test,
}

/// Feature columns plus a binary label (`true` = anomaly) per row, and an
/// optional predefined train/test tag per row.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    columns: Vec<Column>,
    labels: Vec<bool>,
    partition: Option<Vec<PartitionTag>>,
}

impl RawDataset {
    pub fn new(
        columns: Vec<Column>,
        labels: Vec<bool>,
        partition: Option<Vec<PartitionTag>>,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::Data("dataset has no rows".into()));
        }
        if let Some(c) = columns.iter().find(|c| c.values.len() != n) {
            return Err(Error::Data(format!(
                "column `{}` has {} values but there are {n} labels",
                c.name,
                c.values.len()
            )));
        }
        if let Some(p) = &partition {
            if p.len() != n {
                return Err(Error::Data(format!(
                    "partition tags: {} for {n} rows",
                    p.len()
                )));
            }
        }
        if labels.iter().all(|&anomaly| anomaly) {
            return Err(Error::Data("dataset has no normal samples".into()));
        }
        Ok(Self {
            columns,
            labels,
            partition,
        })
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn partition_tags(&self) -> Option<&[PartitionTag]> {
        self.partition.as_deref()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_anomalies(&self) -> usize {
        self.labels.iter().filter(|&&a| a).count()
    }

    pub fn n_normal(&self) -> usize {
        self.len() - self.n_anomalies()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn is_all_numeric(&self) -> bool {
        self.columns
            .iter()
            .all(|c| matches!(c.values, ColumnValues::Numeric(_)))
    }

    /// Row-major feature matrix; fails if any column is still categorical.
    pub fn feature_matrix(&self) -> Result<Matrix> {
        let mut numeric = Vec::with_capacity(self.columns.len());
        for c in &self.columns {
            match &c.values {
                ColumnValues::Numeric(v) => numeric.push(v),
                ColumnValues::Categorical(_) => {
                    return Err(Error::Data(format!(
                        "column `{}` is categorical; encode categoricals before building features",
                        c.name
                    )))
                }
            }
        }
        let rows = self.len();
        let cols = numeric.len();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            data.extend(numeric.iter().map(|col| col[r]));
        }
        Matrix::from_vec(rows, cols, data)
    }
}

/// Drops categorical columns with more than three distinct values (counted
/// over the whole dataset) and one-hot encodes the rest. Numeric columns
/// pass through untouched.
pub fn drop_wide_categoricals(data: &RawDataset) -> RawDataset {
    let mut columns = Vec::with_capacity(data.columns.len());
    for column in &data.columns {
        match &column.values {
            ColumnValues::Numeric(_) => columns.push(column.clone()),
            ColumnValues::Categorical(values) => {
                let distinct: BTreeSet<&str> = values.iter().map(String::as_str).collect();
                if distinct.len() > MAX_CATEGORICAL_VALUES {
                    log::debug!(
                        "dropping categorical `{}` ({} values)",
                        column.name,
                        distinct.len()
                    );
                    continue;
                }
                for level in distinct {
                    columns.push(Column {
                        name: format!("{}={level}", column.name),
                        values: ColumnValues::Numeric(
                            values
                                .iter()
                                .map(|v| if v == level { 1.0 } else { 0.0 })
                                .collect(),
                        ),
                    });
                }
            }
        }
    }
    RawDataset {
        columns,
        labels: data.labels.clone(),
        partition: data.partition.clone(),
    }
}

/// How the test set is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionRule {
    /// Use the dataset's own train/test tags.
    Predefined,
    /// Put `train_size` normal samples in the training pool, everything else
    /// (all anomalies and the remaining normals) in the test set.
    TrainSize(usize),
}

/// Per-feature min/max from the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormalizationSpec {
    pub fn fit(train: &Matrix) -> Result<Self> {
        if train.rows() == 0 {
            return Err(Error::Data(
                "cannot fit normalization on an empty training set".into(),
            ));
        }
        let mut min = vec![f64::INFINITY; train.cols()];
        let mut max = vec![f64::NEG_INFINITY; train.cols()];
        for row in train.iter_rows() {
            for (i, &v) in row.iter().enumerate() {
                min[i] = min[i].min(v);
                max[i] = max[i].max(v);
            }
        }
        Ok(Self { min, max })
    }

    /// `x ↦ 2(x − min)/(max − min) − 1`; constant features map to 0.
    /// Values outside the fitted range are not clipped.
    pub fn apply(&self, m: &Matrix) -> Result<Matrix> {
        if m.cols() != self.min.len() {
            return Err(Error::shape(
                "NormalizationSpec::apply",
                self.min.len(),
                m.cols(),
            ));
        }
        let mut out = m.clone();
        let cols = self.min.len();
        if cols == 0 {
            return Ok(out);
        }
        for row in out.data_mut().chunks_exact_mut(cols) {
            for (i, v) in row.iter_mut().enumerate() {
                let range = self.max[i] - self.min[i];
                *v = if range > 0.0 {
                    2.0 * ((*v - self.min[i]) / range) - 1.0
                } else {
                    0.0
                };
            }
        }
        Ok(out)
    }
}

/// Train and validation hold normal samples only; the test set carries labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub feature_names: Vec<String>,
    pub train: Matrix,
    pub validation: Matrix,
    pub test: Matrix,
    /// `true` = anomaly.
    pub test_labels: Vec<bool>,
    /// Source row index of every sample, for label bookkeeping.
    pub train_rows: Vec<usize>,
    pub validation_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub normalization: Option<NormalizationSpec>,
}

impl DatasetSplit {
    pub fn n_features(&self) -> usize {
        self.train.cols()
    }
}

fn validation_count(pool: usize) -> usize {
    ((pool as f64 * VALIDATION_FRACTION).round() as usize).max(1)
}

/// Splits the normal samples of `data` into train / validation / test.
///
/// The validation set is 10% of the training pool drawn with `seed`.
/// Anomalies never enter train or validation.
pub fn partition(data: &RawDataset, rule: PartitionRule, seed: u64) -> Result<DatasetSplit> {
    let features = data.feature_matrix()?;
    let n_normal = data.n_normal();
    if n_normal < MIN_NORMAL_SAMPLES {
        return Err(Error::Config(format!(
            "need at least {MIN_NORMAL_SAMPLES} normal samples, found {n_normal}"
        )));
    }
    if data.n_anomalies() == 0 {
        return Err(Error::Config(
            "dataset has no anomalies to evaluate against".into(),
        ));
    }
    let mut rng = rng::stream(seed, rng::purpose::PARTITION);

    let (mut pool, mut test): (Vec<usize>, Vec<usize>) = match rule {
        PartitionRule::Predefined => {
            let tags = data.partition_tags().ok_or_else(|| {
                Error::Config(
                    "predefined partition requested but the dataset has no partition column".into(),
                )
            })?;
            let pool = (0..data.len())
                .filter(|&i| tags[i] == PartitionTag::Train && !data.labels[i])
                .collect();
            let test = (0..data.len())
                .filter(|&i| tags[i] == PartitionTag::Test)
                .collect();
            (pool, test)
        }
        PartitionRule::TrainSize(train_size) => {
            let mut normals: Vec<usize> = (0..data.len()).filter(|&i| !data.labels[i]).collect();
            if train_size < 2 || train_size >= normals.len() {
                return Err(Error::Config(format!(
                    "train size must lie in [2, {}) to leave normal test samples, got {train_size}",
                    normals.len()
                )));
            }
            normals.shuffle(&mut rng);
            let test_normals = normals.split_off(train_size);
            let mut test: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i]).collect();
            test.extend(test_normals);
            (normals, test)
        }
    };
    if pool.len() < 2 {
        return Err(Error::Config(format!(
            "training pool has {} normal samples; need at least 2",
            pool.len()
        )));
    }
    if !test.iter().any(|&i| data.labels[i]) || test.iter().all(|&i| data.labels[i]) {
        return Err(Error::Config(
            "test set must contain both normal and anomalous samples".into(),
        ));
    }

    pool.shuffle(&mut rng);
    let mut validation: Vec<usize> = pool.drain(..validation_count(pool.len())).collect();
    let mut train = pool;
    train.sort_unstable();
    validation.sort_unstable();
    test.sort_unstable();

    Ok(DatasetSplit {
        feature_names: data.feature_names(),
        train: features.select_rows(&train),
        validation: features.select_rows(&validation),
        test: features.select_rows(&test),
        test_labels: test.iter().map(|&i| data.labels[i]).collect(),
        train_rows: train,
        validation_rows: validation,
        test_rows: test,
        normalization: None,
    })
}

/// Fits min/max scaling on the training split and applies it to every split.
pub fn fit_and_apply_normalization(split: &DatasetSplit) -> Result<DatasetSplit> {
    let spec = NormalizationSpec::fit(&split.train)?;
    Ok(DatasetSplit {
        train: spec.apply(&split.train)?,
        validation: spec.apply(&split.validation)?,
        test: spec.apply(&split.test)?,
        normalization: Some(spec),
        ..split.clone()
    })
}
