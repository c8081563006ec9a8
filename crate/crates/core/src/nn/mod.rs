//! Minimal dense network engine: layers with analytic gradients, losses and
//! optimizers. Everything is `f64`.

mod checkpoint;
mod layers;
mod loss;
mod matrix;
mod optim;
mod stack;

pub use checkpoint::{Checkpoint, NamedArray, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use layers::{Activation, ActivationLayer, Affine, BatchNorm, Dropout, Init, Layer, Mode};
pub use loss::{bce_loss, mse_loss, PROB_FLOOR};
pub use matrix::Matrix;
pub use optim::{Optimizer, OptimizerKind};
pub use stack::{Backprop, LayerStack};
