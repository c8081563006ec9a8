//! Threshold-free detection metrics. Higher scores mean "more anomalous";
//! label `true` marks an anomaly (the positive class).

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Scores paired with ground-truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredTestSet {
    scores: Vec<f64>,
    labels: Vec<bool>,
}

impl ScoredTestSet {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Config(format!(
                "{} scores for {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::Data(format!(
                "score {i} is not finite: {}",
                scores[i]
            )));
        }
        Ok(Self { scores, labels })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn n_positive(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn n_negative(&self) -> usize {
        self.labels.len() - self.n_positive()
    }

    fn require_both_classes(&self, metric: &str) -> Result<()> {
        if self.n_positive() == 0 || self.n_negative() == 0 {
            return Err(Error::Data(format!("{metric} needs both classes present")));
        }
        Ok(())
    }

    /// Indices sorted by ascending score.
    fn ascending(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.sort_by(|&a, &b| self.scores[a].total_cmp(&self.scores[b]));
        idx
    }

    /// Consecutive runs of tied scores over `order`, as index ranges.
    fn tie_groups<'a>(&'a self, order: &'a [usize]) -> impl Iterator<Item = &'a [usize]> + 'a {
        order.chunk_by(move |&a, &b| self.scores[a].total_cmp(&self.scores[b]) == Ordering::Equal)
    }
}

/// Area under the ROC curve via the Mann–Whitney statistic:
/// `P(score_pos > score_neg) + ½ P(tie)`, computed with mid-ranks.
pub fn auc_roc(set: &ScoredTestSet) -> Result<f64> {
    set.require_both_classes("auc_roc")?;
    let order = set.ascending();
    let mut rank_sum = 0.0;
    let mut seen = 0usize;
    for group in set.tie_groups(&order) {
        let mid_rank = seen as f64 + (group.len() as f64 + 1.0) / 2.0;
        let positives = group.iter().filter(|&&i| set.labels[i]).count();
        rank_sum += mid_rank * positives as f64;
        seen += group.len();
    }
    let p = set.n_positive() as f64;
    let n = set.n_negative() as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Area under the precision–recall curve as step-wise summation
/// `Σ (Rₖ − Rₖ₋₁)·Pₖ` over distinct thresholds, tied scores grouped.
pub fn auc_pr(set: &ScoredTestSet) -> Result<f64> {
    let total_pos = set.n_positive();
    if total_pos == 0 {
        return Err(Error::Data("auc_pr needs at least one positive".into()));
    }
    let mut order = set.ascending();
    order.reverse();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    for group in set.tie_groups(&order) {
        let pos = group.iter().filter(|&&i| set.labels[i]).count();
        tp += pos;
        fp += group.len() - pos;
        if pos == 0 {
            continue;
        }
        let recall = tp as f64 / total_pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(area)
}

/// Equal error rate with the threshold at which it was found.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EerPoint {
    pub eer: f64,
    /// Threshold (predict anomaly iff `score >= threshold`) minimizing
    /// `|FPR − FNR|`; may be `+∞` (nothing flagged).
    pub threshold: f64,
    pub fpr: f64,
    pub fnr: f64,
}

/// `(threshold, FPR, FNR)` for every distinct score plus `+∞`, ascending.
pub fn error_rates(set: &ScoredTestSet) -> Result<Vec<(f64, f64, f64)>> {
    set.require_both_classes("error rates")?;
    let p = set.n_positive() as f64;
    let n = set.n_negative() as f64;
    let order = set.ascending();
    // everything at or above the first threshold is flagged
    let (mut fp_above, mut fn_below) = (set.n_negative(), 0usize);
    let mut out = Vec::new();
    for group in set.tie_groups(&order) {
        out.push((
            set.scores[group[0]],
            fp_above as f64 / n,
            fn_below as f64 / p,
        ));
        let pos = group.iter().filter(|&&i| set.labels[i]).count();
        fn_below += pos;
        fp_above -= group.len() - pos;
    }
    out.push((f64::INFINITY, 0.0, 1.0));
    Ok(out)
}

/// Sweeps all thresholds and returns the rate where FPR and FNR cross,
/// interpolating linearly between the two thresholds that bracket the
/// sign change of `FPR − FNR`.
pub fn eer_point(set: &ScoredTestSet) -> Result<EerPoint> {
    let rates = error_rates(set)?;
    // FPR − FNR starts at 1 and ends at −1, non-increasing
    let k = rates
        .iter()
        .position(|&(_, fpr, fnr)| fpr - fnr <= 0.0)
        .expect("the +inf threshold always has FPR - FNR = -1");
    let (t_hi, fpr_hi, fnr_hi) = rates[k];
    let diff_hi = fpr_hi - fnr_hi;
    if diff_hi == 0.0 || k == 0 {
        return Ok(EerPoint {
            eer: fpr_hi,
            threshold: t_hi,
            fpr: fpr_hi,
            fnr: fnr_hi,
        });
    }
    let (t_lo, fpr_lo, fnr_lo) = rates[k - 1];
    let diff_lo = fpr_lo - fnr_lo;
    let alpha = diff_lo / (diff_lo - diff_hi);
    let eer = fpr_lo + alpha * (fpr_hi - fpr_lo);
    let (threshold, fpr, fnr) = if diff_lo.abs() <= diff_hi.abs() {
        (t_lo, fpr_lo, fnr_lo)
    } else {
        (t_hi, fpr_hi, fnr_hi)
    };
    Ok(EerPoint {
        eer,
        threshold,
        fpr,
        fnr,
    })
}

pub fn eer(set: &ScoredTestSet) -> Result<f64> {
    Ok(eer_point(set)?.eer)
}
