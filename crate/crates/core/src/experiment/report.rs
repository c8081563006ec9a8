use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{aggregate_improvement, Improvement, Metric, MetricsRecord, Tail};

pub const BASELINE_CONFIG: &str = "baseline";

pub fn mdgan_config_name(warm_up: usize) -> String {
    format!("mdgan_w{warm_up}")
}

/// Inverse of [`mdgan_config_name`].
pub fn parse_mdgan_config(config: &str) -> Option<usize> {
    config.strip_prefix("mdgan_w")?.parse().ok()
}

/// Column header for a warm-up value, as in the standard warm-up comparison tables.
pub fn warm_up_label(warm_up: usize) -> String {
    match warm_up {
        0 => "No Warm Up".into(),
        1 => "One Epoch Warm Up".into(),
        3 => "Three Epochs Warm Up".into(),
        6 => "Six Epochs Warm Up".into(),
        w => format!("{w} Epochs Warm Up"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "md" | "markdown" => Ok(Self::Markdown),
            other => Err(Error::Config(format!("unknown report format {other:?}"))),
        }
    }
}

/// One row per (dataset, metric), one cell per warm-up value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub warm_ups: Vec<usize>,
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub metric: Metric,
    /// `None` where no seed has both an MDGAN and a baseline result.
    pub cells: Vec<Option<Improvement>>,
}

impl ReportRow {
    /// `"5.53*"`-style cell text; `"n/a"` when undefined.
    pub fn cell_text(&self, i: usize) -> String {
        match &self.cells[i] {
            Some(imp) => match imp.improvement_pct {
                Some(pct) => format!("{pct:.2}{}", if imp.is_significant() { "*" } else { "" }),
                None => "n/a".into(),
            },
            None => "n/a".into(),
        }
    }
}

/// Builds the improvement table from baseline and `mdgan_w{w}` records.
/// Seeds are paired within each configuration; seeds missing on either side
/// (e.g. aborted runs) are left out of that comparison.
pub fn aggregate(records: &[MetricsRecord], tail: Tail) -> Result<AggregateReport> {
    if records.is_empty() {
        return Err(Error::Config(
            "cannot build a report from zero records".into(),
        ));
    }
    let mut baseline: BTreeMap<&str, Vec<&MetricsRecord>> = BTreeMap::new();
    let mut mdgan: BTreeMap<(&str, usize), Vec<&MetricsRecord>> = BTreeMap::new();
    let mut warm_ups = BTreeSet::new();
    let mut datasets = Vec::new();
    for r in records {
        if !datasets.contains(&r.dataset.as_str()) {
            datasets.push(r.dataset.as_str());
        }
        if r.config == BASELINE_CONFIG {
            baseline.entry(&r.dataset).or_default().push(r);
        } else if let Some(w) = parse_mdgan_config(&r.config) {
            warm_ups.insert(w);
            mdgan.entry((&r.dataset, w)).or_default().push(r);
        } else {
            return Err(Error::Config(format!(
                "unrecognized config name {:?}",
                r.config
            )));
        }
    }
    if warm_ups.is_empty() {
        return Err(Error::Config("no MDGAN records to report".into()));
    }
    let warm_ups: Vec<usize> = warm_ups.into_iter().collect();
    let mut rows = Vec::new();
    for dataset in datasets {
        let base = baseline.get(dataset).cloned().unwrap_or_default();
        let mut per_warm_up = Vec::new();
        for &w in &warm_ups {
            let m = mdgan.get(&(dataset, w)).cloned().unwrap_or_default();
            let common: BTreeSet<u64> = m
                .iter()
                .map(|r| r.seed)
                .filter(|s| base.iter().any(|b| b.seed == *s))
                .collect();
            if common.is_empty() {
                per_warm_up.push(None);
                continue;
            }
            let pick = |rs: &[&MetricsRecord]| -> Vec<MetricsRecord> {
                rs.iter()
                    .filter(|r| common.contains(&r.seed))
                    .map(|r| (*r).clone())
                    .collect()
            };
            per_warm_up.push(Some(aggregate_improvement(&pick(&m), &pick(&base), tail)?));
        }
        for (k, &metric) in Metric::ALL.iter().enumerate() {
            rows.push(ReportRow {
                dataset: dataset.to_owned(),
                metric,
                cells: per_warm_up
                    .iter()
                    .map(|c| c.as_ref().map(|imps| imps[k].clone()))
                    .collect(),
            });
        }
    }
    Ok(AggregateReport { warm_ups, rows })
}

impl AggregateReport {
    pub fn headers(&self) -> Vec<String> {
        let mut h = vec!["dataset".to_string(), "metric".to_string()];
        h.extend(self.warm_ups.iter().map(|&w| warm_up_label(w)));
        h
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.headers())?;
        for row in &self.rows {
            let mut rec = vec![row.dataset.clone(), row.metric.name().to_string()];
            rec.extend((0..self.warm_ups.len()).map(|i| row.cell_text(i)));
            w.write_record(rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
    }

    pub fn to_markdown(&self) -> String {
        let headers = self.headers();
        let mut out = String::new();
        let _ = writeln!(out, "| {} |", headers.join(" | "));
        let _ = writeln!(out, "|{}", "---|".repeat(headers.len()));
        for row in &self.rows {
            let mut cells = vec![row.dataset.clone(), row.metric.name().to_string()];
            cells.extend((0..self.warm_ups.len()).map(|i| row.cell_text(i)));
            let _ = writeln!(out, "| {} |", cells.join(" | "));
        }
        out.push_str(
            "\nPercentage change of the MDGAN mean over the baseline mean. \
             `*`: paired t-test significant at 95%. For eer, lower is better.\n",
        );
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn render(&self, format: ReportFormat) -> Result<String> {
        match format {
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Json => self.to_json(),
            ReportFormat::Markdown => Ok(self.to_markdown()),
        }
    }
}

/// Aggregates `records` and renders the improvement table.
pub fn emit_report(records: &[MetricsRecord], tail: Tail, format: ReportFormat) -> Result<String> {
    aggregate(records, tail)?.render(format)
}

/// `dataset,config,seed,auc_roc,auc_pr,eer`, one line per record.
pub fn metrics_csv(records: &[MetricsRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record(["dataset", "config", "seed", "auc_roc", "auc_pr", "eer"])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
}

pub fn read_metrics_csv(text: &str) -> Result<Vec<MetricsRecord>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize()
        .map(|rec| rec.map_err(Error::from))
        .collect()
}
