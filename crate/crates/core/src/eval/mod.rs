//! Reconstruction-based anomaly scoring, detection metrics and cross-seed
//! significance testing.

mod curves;
mod significance;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use curves::{auc_pr, auc_roc, eer, eer_point, error_rates, EerPoint, ScoredTestSet};
pub use significance::{critical_value, paired_t_test, SignificanceResult, Tail};

use crate::error::{Error, Result};
use crate::nn::{LayerStack, Matrix, Mode};

/// Root mean squared reconstruction error of one sample,
/// `√(1/n Σ (xᵢ − x′ᵢ)²)`, with the model in evaluation mode.
pub fn rmse_score(model: &mut LayerStack, sample: &[f64]) -> Result<f64> {
    if sample.len() != model.input_dim() {
        return Err(Error::shape("rmse_score", model.input_dim(), sample.len()));
    }
    Ok(rmse_scores(model, &Matrix::row_vector(sample))?[0])
}

/// Per-row reconstruction RMSE for a batch.
pub fn rmse_scores(model: &mut LayerStack, samples: &Matrix) -> Result<Vec<f64>> {
    let recon = model.forward(samples, Mode::Eval)?;
    if recon.shape() != samples.shape() {
        return Err(Error::shape(
            "rmse_scores",
            format!("{}x{} reconstruction", samples.rows(), samples.cols()),
            format!("{}x{}", recon.rows(), recon.cols()),
        ));
    }
    Ok(samples
        .iter_rows()
        .zip(recon.iter_rows())
        .map(|(x, y)| {
            let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            (sq / x.len() as f64).sqrt()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    AucRoc,
    AucPr,
    Eer,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::AucRoc, Metric::AucPr, Metric::Eer];

    pub fn name(self) -> &'static str {
        match self {
            Metric::AucRoc => "auc_roc",
            Metric::AucPr => "auc_pr",
            Metric::Eer => "eer",
        }
    }

    pub fn higher_is_better(self) -> bool {
        !matches!(self, Metric::Eer)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Detection metrics for one trained model on one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub dataset: String,
    pub config: String,
    pub seed: u64,
    pub auc_roc: f64,
    pub auc_pr: f64,
    pub eer: f64,
}

impl MetricsRecord {
    pub fn compute(dataset: &str, config: &str, seed: u64, scored: &ScoredTestSet) -> Result<Self> {
        let record = Self {
            dataset: dataset.to_owned(),
            config: config.to_owned(),
            seed,
            auc_roc: auc_roc(scored)?,
            auc_pr: auc_pr(scored)?,
            eer: eer(scored)?,
        };
        if ![record.auc_roc, record.auc_pr, record.eer]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::Data(format!(
                "non-finite metrics for {config} seed {seed}"
            )));
        }
        Ok(record)
    }

    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::AucRoc => self.auc_roc,
            Metric::AucPr => self.auc_pr,
            Metric::Eer => self.eer,
        }
    }
}

/// Scores `test` with the autoencoder and computes all three metrics.
pub fn evaluate_detector(
    model: &mut LayerStack,
    test: &Matrix,
    labels: &[bool],
    dataset: &str,
    config: &str,
    seed: u64,
) -> Result<MetricsRecord> {
    let scored = ScoredTestSet::new(rmse_scores(model, test)?, labels.to_vec())?;
    MetricsRecord::compute(dataset, config, seed, &scored)
}

/// MDGAN-vs-baseline comparison for one metric of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub dataset: String,
    pub config: String,
    pub metric: Metric,
    pub n_seeds: usize,
    pub baseline_mean: f64,
    pub mdgan_mean: f64,
    /// `100 · (mean_mdgan − mean_baseline) / mean_baseline`. `None` when the
    /// baseline mean is zero and the MDGAN mean is not.
    pub improvement_pct: Option<f64>,
    /// Paired t-test on per-seed `mdgan − baseline`; `None` below two seeds.
    pub significance: Option<SignificanceResult>,
}

impl Improvement {
    pub fn is_significant(&self) -> bool {
        self.significance.is_some_and(|s| s.significant_at_95)
    }
}

/// Pairs MDGAN and baseline records by seed and computes the percentage
/// change and paired t-test for every metric. EER keeps the same formula,
/// so for EER a negative percentage is an improvement.
pub fn aggregate_improvement(
    mdgan: &[MetricsRecord],
    baseline: &[MetricsRecord],
    tail: Tail,
) -> Result<Vec<Improvement>> {
    if mdgan.is_empty() {
        return Err(Error::Config("no MDGAN records to aggregate".into()));
    }
    let by_seed = |records: &[MetricsRecord], what: &str| -> Result<BTreeMap<u64, MetricsRecord>> {
        let mut map = BTreeMap::new();
        for r in records {
            if map.insert(r.seed, r.clone()).is_some() {
                return Err(Error::Config(format!(
                    "duplicate {what} record for seed {}",
                    r.seed
                )));
            }
        }
        Ok(map)
    };
    let m = by_seed(mdgan, "mdgan")?;
    let b = by_seed(baseline, "baseline")?;
    if !m.keys().eq(b.keys()) {
        return Err(Error::Config(format!(
            "unpaired seeds: mdgan {:?} vs baseline {:?}",
            m.keys().collect::<Vec<_>>(),
            b.keys().collect::<Vec<_>>()
        )));
    }
    let first = &mdgan[0];
    if mdgan
        .iter()
        .any(|r| r.dataset != first.dataset || r.config != first.config)
    {
        return Err(Error::Config(
            "mdgan records mix datasets or configs".into(),
        ));
    }
    Metric::ALL
        .iter()
        .map(|&metric| {
            let mv: Vec<f64> = m.values().map(|r| r.get(metric)).collect();
            let bv: Vec<f64> = b.values().map(|r| r.get(metric)).collect();
            let n = mv.len() as f64;
            let mdgan_mean = mv.iter().sum::<f64>() / n;
            let baseline_mean = bv.iter().sum::<f64>() / n;
            let improvement_pct = if baseline_mean != 0.0 {
                Some(100.0 * (mdgan_mean - baseline_mean) / baseline_mean)
            } else if mdgan_mean == 0.0 {
                Some(0.0)
            } else {
                None
            };
            let significance = if mv.len() >= 2 {
                Some(paired_t_test(&mv, &bv, tail)?)
            } else {
                None
            };
            Ok(Improvement {
                dataset: first.dataset.clone(),
                config: first.config.clone(),
                metric,
                n_seeds: mv.len(),
                baseline_mean,
                mdgan_mean,
                improvement_pct,
                significance,
            })
        })
        .collect()
}
