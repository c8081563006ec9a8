use crate::data::{SyntheticKind, SyntheticSpec};
use crate::error::{Error, Result};
use crate::models::ModelConfig;

use super::{DatasetConfig, ExperimentConfig, RunBlock, TrainBlock};

pub const PRESET_NAMES: [&str; 4] = ["quick", "blob", "moons", "ring"];

fn synthetic(
    name: &str,
    kind: SyntheticKind,
    n_normal: usize,
    train_size: usize,
    dim: usize,
    separation: f64,
) -> DatasetConfig {
    DatasetConfig {
        name: name.into(),
        train_size: Some(train_size),
        predefined_partition: false,
        csv: None,
        synthetic: Some(SyntheticSpec {
            kind,
            n_normal,
            n_anomaly: 100,
            dim,
            separation,
            seed: 7,
        }),
    }
}

/// Built-in synthetic experiments. `quick` finishes in seconds; the others
/// run the full warm-up sweep over 5 seeds.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let (dataset, epochs, seeds) = match name {
        "quick" => (
            synthetic("blob-quick", SyntheticKind::Blob, 300, 200, 8, 4.0),
            8,
            3,
        ),
        "blob" => (
            synthetic("blob", SyntheticKind::Blob, 900, 800, 8, 4.0),
            30,
            5,
        ),
        "moons" => (
            synthetic("moons", SyntheticKind::TwoMoonsLike, 900, 800, 6, 1.5),
            30,
            5,
        ),
        "ring" => (
            synthetic("ring", SyntheticKind::Ring, 900, 800, 6, 0.8),
            30,
            5,
        ),
        other => {
            return Err(Error::Config(format!(
                "unknown preset {other:?}; available: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    let config = ExperimentConfig {
        dataset,
        model: ModelConfig::default(),
        train: TrainBlock {
            epochs,
            ..TrainBlock::default()
        },
        run: RunBlock {
            seeds: Some((1..=seeds).collect()),
            output_dir: format!("mdgan-out/{name}").into(),
            ..RunBlock::default()
        },
    };
    config.validate()?;
    Ok(config)
}
