//! Multi-discriminator GAN (MDGAN) for autoencoder-based anomaly detection
//! on tabular data.
//!
//! A generator `G` plays a minimax game against a real/fake classifier `D1`
//! while cooperating with an autoencoder `D2` by sharing its reconstruction
//! loss. The trained `D2` scores test samples by reconstruction RMSE. A
//! plain autoencoder with `D2`'s architecture serves as the baseline.
//!
//! Modules:
//! - [`nn`]: dense layers, losses, optimizers with analytic gradients
//! - [`models`]: builders for `G`, `D1`, `D2`
//! - [`train`]: the MDGAN loop with warm-up gating, the baseline trainer
//! - [`data`]: CSV ingestion, partitioning, normalization, synthetic data
//! - [`eval`]: anomaly scores, AUC-ROC / AUC-PR / EER, paired t-test
//! - [`experiment`]: config-driven multi-seed runs and reports

pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod models;
pub mod nn;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
