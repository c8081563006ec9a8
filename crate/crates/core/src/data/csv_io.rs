use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Column, ColumnValues, PartitionTag, RawDataset};
use crate::error::{Error, Result};

/// How to interpret a CSV file. A header row is required.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub label_column: String,
    /// Label value marking an anomaly. When absent the minority class is used.
    #[serde(default)]
    pub positive_label: Option<String>,
    #[serde(default)]
    pub partition_column: Option<String>,
    #[serde(default = "default_train_value")]
    pub train_value: String,
    #[serde(default = "default_test_value")]
    pub test_value: String,
    /// Columns to ignore entirely (ids and the like).
    #[serde(default)]
    pub ignore_columns: Vec<String>,
}

fn default_train_value() -> String {
    "train".into()
}

fn default_test_value() -> String {
    "test".into()
}

impl CsvSchema {
    pub fn new(label_column: impl Into<String>) -> Self {
        Self {
            label_column: label_column.into(),
            positive_label: None,
            partition_column: None,
            train_value: default_train_value(),
            test_value: default_test_value(),
            ignore_columns: Vec::new(),
        }
    }
}

pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<RawDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

/// Parses CSV from any reader. Columns whose every value parses as a float
/// are numeric; the rest are categorical.
pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<RawDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::Schema("file is empty (no header row)".into()));
    }
    let find = |name: &str| headers.iter().position(|h| h == name);
    let label_idx = find(&schema.label_column).ok_or_else(|| {
        Error::Schema(format!("label column `{}` not found", schema.label_column))
    })?;
    let partition_idx = match &schema.partition_column {
        Some(name) => Some(
            find(name)
                .ok_or_else(|| Error::Schema(format!("partition column `{name}` not found")))?,
        ),
        None => None,
    };
    for name in &schema.ignore_columns {
        if find(name).is_none() {
            return Err(Error::Schema(format!("ignored column `{name}` not found")));
        }
    }
    let feature_idx: Vec<usize> = (0..headers.len())
        .filter(|&i| {
            i != label_idx
                && Some(i) != partition_idx
                && !schema.ignore_columns.contains(&headers[i])
        })
        .collect();

    let mut raw: Vec<Vec<String>> = vec![Vec::new(); feature_idx.len()];
    let mut labels = Vec::new();
    let mut tags = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != headers.len() {
            return Err(Error::Parse {
                row: line,
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        for (slot, &i) in raw.iter_mut().zip(&feature_idx) {
            if record[i].is_empty() {
                return Err(Error::Parse {
                    row: line,
                    message: format!("missing value in column `{}`", headers[i]),
                });
            }
            slot.push(record[i].to_owned());
        }
        labels.push(record[label_idx].to_owned());
        if let Some(p) = partition_idx {
            let tag = if record[p] == schema.train_value {
                PartitionTag::Train
            } else if record[p] == schema.test_value {
                PartitionTag::Test
            } else {
                return Err(Error::Parse {
                    row: line,
                    message: format!(
                        "partition value `{}` is neither `{}` nor `{}`",
                        &record[p], schema.train_value, schema.test_value
                    ),
                });
            };
            tags.push(tag);
        }
    }
    if labels.is_empty() {
        return Err(Error::Schema("file has a header but no data rows".into()));
    }

    let positive = match &schema.positive_label {
        Some(p) => p.clone(),
        None => minority_label(&labels)?,
    };
    let labels: Vec<bool> = labels.iter().map(|l| *l == positive).collect();

    let columns = feature_idx
        .iter()
        .zip(raw)
        .map(|(&i, values)| {
            let parsed: Option<Vec<f64>> = values
                .iter()
                .map(|v| v.parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect();
            Column {
                name: headers[i].clone(),
                values: match parsed {
                    Some(nums) => ColumnValues::Numeric(nums),
                    None => ColumnValues::Categorical(values),
                },
            }
        })
        .collect();
    RawDataset::new(columns, labels, partition_idx.map(|_| tags))
}

fn minority_label(labels: &[String]) -> Result<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    match counts.len() {
        2 => {
            let mut it = counts.into_iter();
            let (a, na) = it.next().expect("two classes");
            let (b, nb) = it.next().expect("two classes");
            if na == nb {
                return Err(Error::Schema(format!(
                    "classes `{a}` and `{b}` are equally frequent; set positive_label"
                )));
            }
            Ok(if na < nb { a } else { b }.to_owned())
        }
        n => Err(Error::Schema(format!(
            "label column has {n} distinct values; set positive_label for non-binary labels"
        ))),
    }
}

/// Writes an all-numeric dataset with a `label` column (1 = anomaly) and,
/// when present, a `partition` column.
pub fn write_csv<W: Write>(writer: W, data: &RawDataset) -> Result<()> {
    let m = data.feature_matrix()?;
    let mut w = csv::Writer::from_writer(writer);
    let mut header = data.feature_names();
    header.push("label".into());
    if data.partition_tags().is_some() {
        header.push("partition".into());
    }
    w.write_record(&header)?;
    for (r, row) in m.iter_rows().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(if data.labels()[r] { "1" } else { "0" }.into());
        if let Some(tags) = data.partition_tags() {
            rec.push(
                match tags[r] {
                    PartitionTag::Train => "train",
                    PartitionTag::Test => "test",
                }
                .into(),
            );
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
