//! Experiment orchestration: the warm-up sweep over many seeds, run
//! manifest, metric/trace files and the aggregate improvement report.
//!
//! Output directory layout:
//!
//! ```text
//! manifest.json            resolved config, per-run status, artifact hashes
//! metrics.csv / .json      dataset,config,seed,auc_roc,auc_pr,eer
//! traces/<config>_seed<s>.csv
//! report.csv / .md / .json
//! ```

mod config;
mod presets;
mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{CsvSource, DatasetConfig, ExperimentConfig, RunBlock, TrainBlock};
pub use presets::{preset, PRESET_NAMES};
pub use report::{
    aggregate, emit_report, mdgan_config_name, metrics_csv, parse_mdgan_config, read_metrics_csv,
    warm_up_label, AggregateReport, ReportFormat, ReportRow, BASELINE_CONFIG,
};

use crate::data::{self, DatasetSplit, RawDataset};
use crate::error::{Error, Result};
use crate::eval::{evaluate_detector, MetricsRecord};
use crate::train::{train_baseline, train_mdgan, TrainOutcome};

pub const MANIFEST_FORMAT: &str = "mdgan-manifest";
pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_CSV: &str = "metrics.csv";
pub const METRICS_JSON: &str = "metrics.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentStatus {
    Running,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RunStatus {
    Pending,
    Completed { best_epoch: usize, best_score: f64 },
    Aborted { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    /// `baseline` or `mdgan_w{w}`.
    pub config: String,
    pub seed: u64,
    pub warm_up: Option<usize>,
    pub status: RunStatus,
    pub elapsed_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory (absolute for inputs).
    pub path: String,
    pub sha256: String,
}

/// Everything needed to replay an experiment, plus what it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub version: u32,
    pub status: ExperimentStatus,
    pub config: ExperimentConfig,
    pub inputs: Vec<Artifact>,
    pub runs: Vec<RunEntry>,
    pub outputs: Vec<Artifact>,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    pub elapsed_ms: Option<u64>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text)?;
        if m.format != MANIFEST_FORMAT || m.version != MANIFEST_VERSION {
            return Err(Error::Schema(format!(
                "{}: not a version {MANIFEST_VERSION} {MANIFEST_FORMAT} file",
                path.display()
            )));
        }
        Ok(m)
    }

    fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &(serde_json::to_string_pretty(self)? + "\n"))
    }

    pub fn aborted(&self) -> impl Iterator<Item = &RunEntry> {
        self.runs
            .iter()
            .filter(|r| matches!(r.status, RunStatus::Aborted { .. }))
    }

    pub fn all_completed(&self) -> bool {
        self.runs
            .iter()
            .all(|r| matches!(r.status, RunStatus::Completed { .. }))
    }
}

/// Result of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
    pub records: Vec<MetricsRecord>,
    /// `None` when no MDGAN/baseline pair completed.
    pub report: Option<AggregateReport>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Loads the raw dataset and returns it with hashes of any input files.
pub fn load_dataset(config: &ExperimentConfig) -> Result<(RawDataset, Vec<Artifact>)> {
    let d = &config.dataset;
    let (raw, inputs) = match (&d.csv, &d.synthetic) {
        (Some(csv), _) => {
            let bytes = fs::read(&csv.path).map_err(|e| Error::io(&csv.path, e))?;
            let raw = data::read_csv(bytes.as_slice(), &csv.schema)?;
            let artifact = Artifact {
                path: csv.path.display().to_string(),
                sha256: sha256_hex(&bytes),
            };
            (raw, vec![artifact])
        }
        (None, Some(spec)) => (data::make_synthetic(spec)?, Vec::new()),
        (None, None) => return Err(Error::Config("dataset has no source".into())),
    };
    Ok((data::drop_wide_categoricals(&raw), inputs))
}

/// Partitioned and normalized data for one seed.
pub fn prepare_split(
    raw: &RawDataset,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<DatasetSplit> {
    let split = data::partition(raw, config.dataset.partition_rule()?, seed)?;
    data::fit_and_apply_normalization(&split)
}

struct Job {
    seed: u64,
    warm_up: Option<usize>,
}

impl Job {
    fn config_name(&self) -> String {
        match self.warm_up {
            None => BASELINE_CONFIG.to_string(),
            Some(w) => mdgan_config_name(w),
        }
    }
}

struct JobResult {
    entry: RunEntry,
    record: Option<MetricsRecord>,
    trace_csv: Option<String>,
}

fn execute(job: &Job, split: &DatasetSplit, config: &ExperimentConfig) -> JobResult {
    let name = job.config_name();
    let started = Instant::now();
    let train_config = config.train_config(job.seed, job.warm_up.unwrap_or(0));
    let outcome: Result<(TrainOutcome, MetricsRecord, String)> = (|| {
        let mut out = match job.warm_up {
            None => train_baseline(split, &train_config)?,
            Some(_) => train_mdgan(split, &train_config)?,
        };
        let record = evaluate_detector(
            &mut out.best_model,
            &split.test,
            &split.test_labels,
            &config.dataset.name,
            &name,
            job.seed,
        )?;
        let mut trace = Vec::new();
        out.trace.write_csv(&mut trace)?;
        let trace = String::from_utf8(trace).map_err(|e| Error::Data(e.to_string()))?;
        Ok((out, record, trace))
    })();
    let elapsed_ms = Some(started.elapsed().as_millis() as u64);
    let mut entry = RunEntry {
        config: name,
        seed: job.seed,
        warm_up: job.warm_up,
        status: RunStatus::Pending,
        elapsed_ms,
    };
    match outcome {
        Ok((out, record, trace)) => {
            info!(
                "{} seed {}: auc_roc {:.4} (best epoch {})",
                entry.config, entry.seed, record.auc_roc, out.best_epoch
            );
            entry.status = RunStatus::Completed {
                best_epoch: out.best_epoch,
                best_score: out.best_score,
            };
            JobResult {
                entry,
                record: Some(record),
                trace_csv: Some(trace),
            }
        }
        Err(e) => {
            warn!("{} seed {} aborted: {e}", entry.config, entry.seed);
            entry.status = RunStatus::Aborted {
                reason: e.to_string(),
            };
            JobResult {
                entry,
                record: None,
                trace_csv: None,
            }
        }
    }
}

fn trace_path(config: &str, seed: u64) -> String {
    format!("traces/{config}_seed{seed}.csv")
}

/// Runs the baseline once per seed and MDGAN once per (seed, warm-up), then
/// writes metrics, traces and the aggregate report under `output_dir`
/// (overriding `config.run.output_dir` when given).
///
/// Runs that fail (e.g. diverge) are recorded as aborted; the rest proceed.
/// Output files other than the manifest do not depend on `run.jobs` or
/// timing.
pub fn run_experiment(
    config: &ExperimentConfig,
    output_dir: Option<&Path>,
) -> Result<ExperimentOutcome> {
    config.validate()?;
    let out_dir = output_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| config.run.output_dir.clone());
    let mut config = config.clone();
    config.run.output_dir = out_dir.clone();
    let started = Instant::now();

    let (raw, inputs) = load_dataset(&config)?;
    let seeds = config.run.resolved_seeds();
    let mut jobs = Vec::new();
    for &seed in &seeds {
        jobs.push(Job {
            seed,
            warm_up: None,
        });
        for &w in &config.train.warm_ups {
            jobs.push(Job {
                seed,
                warm_up: Some(w),
            });
        }
    }
    let mut manifest = RunManifest {
        format: MANIFEST_FORMAT.into(),
        version: MANIFEST_VERSION,
        status: ExperimentStatus::Running,
        config: config.clone(),
        inputs,
        runs: jobs
            .iter()
            .map(|j| RunEntry {
                config: j.config_name(),
                seed: j.seed,
                warm_up: j.warm_up,
                status: RunStatus::Pending,
                elapsed_ms: None,
            })
            .collect(),
        outputs: Vec::new(),
        started_unix: unix_now(),
        finished_unix: None,
        elapsed_ms: None,
    };
    let manifest_path = out_dir.join(MANIFEST_FILE);
    manifest.save(&manifest_path)?;

    // A split failure is a data/config problem, not a run failure.
    let splits: Vec<DatasetSplit> = seeds
        .iter()
        .map(|&s| prepare_split(&raw, &config, s))
        .collect::<Result<_>>()?;
    info!(
        "{}: {} runs over {} seeds, {} features, {} train / {} validation / {} test",
        config.dataset.name,
        jobs.len(),
        seeds.len(),
        splits[0].n_features(),
        splits[0].train.rows(),
        splits[0].validation.rows(),
        splits[0].test.rows()
    );

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.run.jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<JobResult> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let split = &splits[seeds
                    .iter()
                    .position(|&s| s == job.seed)
                    .expect("seed of job")];
                execute(job, split, &config)
            })
            .collect()
    });

    let mut records = Vec::new();
    let mut outputs = Vec::new();
    for (slot, result) in manifest.runs.iter_mut().zip(results) {
        if let Some(trace) = &result.trace_csv {
            let rel = trace_path(&result.entry.config, result.entry.seed);
            write_file(&out_dir.join(&rel), trace)?;
            outputs.push(Artifact {
                path: rel,
                sha256: sha256_hex(trace.as_bytes()),
            });
        }
        records.extend(result.record);
        *slot = result.entry;
    }

    let mut emit = |rel: &str, contents: String| -> Result<()> {
        write_file(&out_dir.join(rel), &contents)?;
        outputs.push(Artifact {
            path: rel.into(),
            sha256: sha256_hex(contents.as_bytes()),
        });
        Ok(())
    };
    emit(METRICS_CSV, metrics_csv(&records)?)?;
    emit(METRICS_JSON, serde_json::to_string_pretty(&records)? + "\n")?;
    let report = match aggregate(&records, config.run.tail) {
        Ok(report) => {
            emit("report.csv", report.to_csv()?)?;
            emit("report.md", report.to_markdown())?;
            emit("report.json", report.to_json()?)?;
            Some(report)
        }
        Err(e) => {
            warn!("no aggregate report: {e}");
            None
        }
    };

    manifest.outputs = outputs;
    manifest.status = ExperimentStatus::Finished;
    manifest.finished_unix = Some(unix_now());
    manifest.elapsed_ms = Some(started.elapsed().as_millis() as u64);
    manifest.save(&manifest_path)?;
    Ok(ExperimentOutcome {
        manifest,
        manifest_path,
        records,
        report,
    })
}

/// Re-renders the aggregate report from the metrics stored next to a
/// manifest, after checking them against the recorded hash.
pub fn report_from_manifest(manifest_path: &Path, format: ReportFormat) -> Result<String> {
    let manifest = RunManifest::load(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let metrics_path = dir.join(METRICS_CSV);
    let text = fs::read_to_string(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?;
    if let Some(expected) = manifest.outputs.iter().find(|a| a.path == METRICS_CSV) {
        if expected.sha256 != sha256_hex(text.as_bytes()) {
            return Err(Error::Data(format!(
                "{} does not match the hash recorded in the manifest",
                metrics_path.display()
            )));
        }
    }
    emit_report(&read_metrics_csv(&text)?, manifest.config.run.tail, format)
}
