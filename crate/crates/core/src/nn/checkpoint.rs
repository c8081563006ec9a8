//! Parameter checkpoints as JSON.
//!
//! ```text
//! {
//!   "magic": "MDGAN-PARAMS",
//!   "version": 1,
//!   "arrays": [
//!     { "name": "layer0.weights", "rows": 8, "cols": 16, "values": [...] },
//!     { "name": "layer2.running_mean", "rows": 1, "cols": 16, "values": [...] },
//!     ...
//!   ]
//! }
//! ```
//!
//! Arrays appear in layer order. Batch-norm running statistics are stored
//! alongside the trainable parameters so an evaluation-mode network is
//! fully restored. Values are written with shortest round-trip formatting.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Layer, LayerStack};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &str = "MDGAN-PARAMS";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub magic: String,
    pub version: u32,
    pub arrays: Vec<NamedArray>,
}

impl Checkpoint {
    pub fn capture(stack: &LayerStack) -> Self {
        let mut arrays = Vec::new();
        for (i, layer) in stack.layers().iter().enumerate() {
            for ((name, rows, cols), values) in layer.param_shapes().into_iter().zip(layer.params())
            {
                arrays.push(NamedArray {
                    name: format!("layer{i}.{name}"),
                    rows,
                    cols,
                    values: values.to_vec(),
                });
            }
            if let Layer::BatchNorm(bn) = layer {
                for (name, values) in [
                    ("running_mean", bn.running_mean()),
                    ("running_var", bn.running_var()),
                ] {
                    arrays.push(NamedArray {
                        name: format!("layer{i}.{name}"),
                        rows: 1,
                        cols: values.len(),
                        values: values.to_vec(),
                    });
                }
            }
        }
        Self {
            magic: CHECKPOINT_MAGIC.into(),
            version: CHECKPOINT_VERSION,
            arrays,
        }
    }

    /// Writes the stored arrays into a stack of identical architecture.
    pub fn restore_into(&self, stack: &mut LayerStack) -> Result<()> {
        if self.magic != CHECKPOINT_MAGIC {
            return Err(Error::Schema(format!(
                "not a parameter checkpoint (magic `{}`)",
                self.magic
            )));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported checkpoint version {}",
                self.version
            )));
        }
        let expected = Checkpoint::capture(stack);
        if expected.arrays.len() != self.arrays.len() {
            return Err(Error::shape(
                "Checkpoint::restore_into",
                expected.arrays.len(),
                self.arrays.len(),
            ));
        }
        for (want, got) in expected.arrays.iter().zip(&self.arrays) {
            if want.name != got.name
                || want.rows != got.rows
                || want.cols != got.cols
                || got.values.len() != got.rows * got.cols
            {
                return Err(Error::shape(
                    "Checkpoint::restore_into",
                    format!("{} {}x{}", want.name, want.rows, want.cols),
                    format!(
                        "{} {}x{} ({} values)",
                        got.name,
                        got.rows,
                        got.cols,
                        got.values.len()
                    ),
                ));
            }
        }
        let mut arrays = self.arrays.iter();
        for layer in stack.layers_mut() {
            for p in layer.params_mut() {
                p.copy_from_slice(&arrays.next().expect("validated").values);
            }
            if let Layer::BatchNorm(bn) = layer {
                let mean = &arrays.next().expect("validated").values;
                let var = &arrays.next().expect("validated").values;
                bn.set_running_stats(mean, var);
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
