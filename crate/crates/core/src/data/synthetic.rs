//! Labeled synthetic datasets for desk-scale checks.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Column, ColumnValues, RawDataset};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// Normals ~ N(0, I); anomalies ~ N(s·u, I) with u = (1, …, 1)/√d.
    Blob,
    /// Two interleaved half circles in the first two coordinates (noise 0.1),
    /// remaining coordinates ~ N(0, 0.1²). Anomalies are the same shape
    /// displaced by s·u.
    TwoMoonsLike,
    /// Unit circle in the first two coordinates (radial noise 0.1), remaining
    /// coordinates ~ N(0, 0.1²). Anomalies lie on a circle of radius 1 + s.
    Ring,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub n_normal: usize,
    pub n_anomaly: usize,
    pub dim: usize,
    pub separation: f64,
    pub seed: u64,
}

const SHAPE_NOISE: f64 = 0.1;

fn gauss<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn moon_point<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    let t = rng.gen_range(0.0..PI);
    let (x, y) = if rng.gen_bool(0.5) {
        (t.cos(), t.sin())
    } else {
        (1.0 - t.cos(), 0.5 - t.sin())
    };
    let mut p = vec![x + SHAPE_NOISE * gauss(rng), y + SHAPE_NOISE * gauss(rng)];
    p.extend((2..dim).map(|_| SHAPE_NOISE * gauss(rng)));
    p
}

fn ring_point<R: Rng>(rng: &mut R, dim: usize, radius: f64) -> Vec<f64> {
    let angle = rng.gen_range(0.0..2.0 * PI);
    let r = radius + SHAPE_NOISE * gauss(rng);
    let mut p = vec![r * angle.cos(), r * angle.sin()];
    p.extend((2..dim).map(|_| SHAPE_NOISE * gauss(rng)));
    p
}

/// Normal rows come first, then anomalies. Same spec, same bytes.
pub fn make_synthetic(spec: &SyntheticSpec) -> Result<RawDataset> {
    if spec.n_normal < 20 {
        return Err(Error::Config(format!(
            "synthetic data needs n_normal >= 20, got {}",
            spec.n_normal
        )));
    }
    if spec.dim < 2 {
        return Err(Error::Config(format!(
            "synthetic data needs dim >= 2, got {}",
            spec.dim
        )));
    }
    if !spec.separation.is_finite() || spec.separation < 0.0 {
        return Err(Error::Config(format!(
            "separation must be finite and >= 0, got {}",
            spec.separation
        )));
    }
    let d = spec.dim;
    let mut rng = rng::stream(spec.seed, "synthetic");
    let shift = spec.separation / (d as f64).sqrt();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(spec.n_normal + spec.n_anomaly);
    for i in 0..spec.n_normal + spec.n_anomaly {
        let anomalous = i >= spec.n_normal;
        let row = match spec.kind {
            SyntheticKind::Blob => {
                let offset = if anomalous { shift } else { 0.0 };
                (0..d).map(|_| gauss(&mut rng) + offset).collect()
            }
            SyntheticKind::TwoMoonsLike => {
                let mut p = moon_point(&mut rng, d);
                if anomalous {
                    p.iter_mut().for_each(|v| *v += shift);
                }
                p
            }
            SyntheticKind::Ring => {
                let radius = if anomalous {
                    1.0 + spec.separation
                } else {
                    1.0
                };
                ring_point(&mut rng, d, radius)
            }
        };
        rows.push(row);
    }
    let columns = (0..d)
        .map(|c| Column {
            name: format!("x{c}"),
            values: ColumnValues::Numeric(rows.iter().map(|r| r[c]).collect()),
        })
        .collect();
    let labels = (0..rows.len()).map(|i| i >= spec.n_normal).collect();
    RawDataset::new(columns, labels, None)
}
