use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{CsvSchema, PartitionRule, SyntheticSpec};
use crate::error::{Error, Result};
use crate::eval::Tail;
use crate::models::ModelConfig;
use crate::nn::OptimizerKind;
use crate::train::{GLossMode, TrainConfig, WarmUpUnit};

/// A full experiment: one dataset, a warm-up sweep and a set of seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainBlock,
    #[serde(default)]
    pub run: RunBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    /// Normal samples placed in the training pool. Mutually exclusive with
    /// `predefined_partition`.
    #[serde(default)]
    pub train_size: Option<usize>,
    /// Use the CSV's own partition column instead of `train_size`.
    #[serde(default)]
    pub predefined_partition: bool,
    #[serde(default)]
    pub csv: Option<CsvSource>,
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSource {
    pub path: PathBuf,
    #[serde(flatten)]
    pub schema: CsvSchema,
}

impl DatasetConfig {
    pub fn partition_rule(&self) -> Result<PartitionRule> {
        match (self.train_size, self.predefined_partition) {
            (Some(n), false) => Ok(PartitionRule::TrainSize(n)),
            (None, true) => Ok(PartitionRule::Predefined),
            (Some(_), true) => Err(Error::Config(
                "dataset: set either train_size or predefined_partition, not both".into(),
            )),
            (None, false) => Err(Error::Config(
                "dataset: train_size or predefined_partition is required".into(),
            )),
        }
    }
}

/// Training hyper-parameters shared by every run of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainBlock {
    pub epochs: usize,
    pub batch_size: usize,
    pub warm_ups: Vec<usize>,
    pub warm_up_unit: WarmUpUnit,
    pub g_loss_mode: GLossMode,
    pub g_optimizer: OptimizerKind,
    pub d1_optimizer: OptimizerKind,
    pub d2_optimizer: OptimizerKind,
}

impl Default for TrainBlock {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            batch_size: t.batch_size,
            warm_ups: vec![0, 1, 3, 6],
            warm_up_unit: t.warm_up_unit,
            g_loss_mode: t.g_loss_mode,
            g_optimizer: t.g_optimizer,
            d1_optimizer: t.d1_optimizer,
            d2_optimizer: t.d2_optimizer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunBlock {
    /// Explicit seed list; takes precedence over `seed_count`.
    pub seeds: Option<Vec<u64>>,
    /// Seeds `1..=seed_count` when `seeds` is absent.
    pub seed_count: usize,
    /// Worker threads; 0 means one per core.
    pub jobs: usize,
    pub output_dir: PathBuf,
    pub tail: Tail,
}

impl Default for RunBlock {
    fn default() -> Self {
        Self {
            seeds: None,
            seed_count: 30,
            jobs: 0,
            output_dir: PathBuf::from("mdgan-out"),
            tail: Tail::TwoSided,
        }
    }
}

impl RunBlock {
    pub fn resolved_seeds(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None => (1..=self.seed_count as u64).collect(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a TOML config, or the config embedded in a manifest when the
    /// file ends in `.json`. Relative CSV paths are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = if path.extension().is_some_and(|e| e == "json") {
            let manifest: super::RunManifest = serde_json::from_str(&text)?;
            manifest.config
        } else {
            toml::from_str::<Self>(&text)?
        };
        if let Some(csv) = &mut config.dataset.csv {
            if csv.path.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                csv.path = base.join(&csv.path);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dataset;
        if d.name.trim().is_empty() {
            return Err(Error::Config("dataset.name must not be empty".into()));
        }
        match (&d.csv, &d.synthetic) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "dataset: give either csv or synthetic, not both".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config(
                    "dataset: a csv or synthetic source is required".into(),
                ))
            }
            (None, Some(_)) if d.predefined_partition => {
                return Err(Error::Config(
                    "synthetic datasets have no predefined partition".into(),
                ))
            }
            _ => {}
        }
        d.partition_rule()?;
        if self.train.warm_ups.is_empty() {
            return Err(Error::Config("train.warm_ups must not be empty".into()));
        }
        let distinct: BTreeSet<_> = self.train.warm_ups.iter().collect();
        if distinct.len() != self.train.warm_ups.len() {
            return Err(Error::Config(format!(
                "train.warm_ups has duplicates: {:?}",
                self.train.warm_ups
            )));
        }
        let seeds = self.run.resolved_seeds();
        if seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let distinct: BTreeSet<_> = seeds.iter().collect();
        if distinct.len() != seeds.len() {
            return Err(Error::Config(format!("seeds must be distinct: {seeds:?}")));
        }
        self.train_config(seeds[0], 0).validate()
    }

    /// Per-run training config. The run seed is the experiment seed itself,
    /// so MDGAN and the baseline of one seed share their D2/batching streams.
    pub fn train_config(&self, seed: u64, warm_up: usize) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            epochs: t.epochs,
            batch_size: t.batch_size,
            warm_up,
            warm_up_unit: t.warm_up_unit,
            seed,
            g_optimizer: t.g_optimizer,
            d1_optimizer: t.d1_optimizer,
            d2_optimizer: t.d2_optimizer,
            g_loss_mode: t.g_loss_mode,
            model: self.model.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[dataset]
name = "toy"
train_size = 100

[dataset.synthetic]
kind = "blob"
n_normal = 200
n_anomaly = 20
dim = 4
separation = 3.0
seed = 1
"#;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.train.warm_ups, vec![0, 1, 3, 6]);
        assert_eq!(c.train.epochs, 30);
        assert_eq!(c.run.resolved_seeds().len(), 30);
        assert_eq!(
            c.dataset.partition_rule().unwrap(),
            PartitionRule::TrainSize(100)
        );
    }

    #[test]
    fn toml_roundtrip() {
        let c = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        let again = ExperimentConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn rejects_bad_sweeps() {
        for extra in [
            "[train]\nwarm_ups = []",
            "[train]\nwarm_ups = [0, 0]",
            "[run]\nseeds = [1, 2, 1]",
            "[run]\nseeds = []",
            "[train]\nbatch_size = 1",
            "[train]\nbogus = 3",
        ] {
            let text = format!("{MINIMAL}\n{extra}\n");
            assert!(ExperimentConfig::from_toml_str(&text).is_err(), "{extra}");
        }
    }

    #[test]
    fn csv_source_with_schema() {
        let text = r#"
[dataset]
name = "cancer"
train_size = 200
[dataset.csv]
path = "data/bc.csv"
label_column = "diagnosis"
positive_label = "M"
ignore_columns = ["id"]
"#;
        let c = ExperimentConfig::from_toml_str(text).unwrap();
        let csv = c.dataset.csv.unwrap();
        assert_eq!(csv.schema.label_column, "diagnosis");
        assert_eq!(csv.schema.ignore_columns, vec!["id".to_string()]);
        assert_eq!(csv.schema.train_value, "train");
    }
}
