//! Threshold-free binary classification metrics.
//!
//! Both metrics sort once and walk tie groups, so equal scores always act as
//! a single decision threshold.

use std::cmp::Ordering;

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("scores ({scores}) and labels ({labels}) differ in length")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("metric needs at least one sample")]
    Empty,
    #[error("score at position {0} is not finite")]
    NonFinite(usize),
    #[error("metric undefined: {positives} positives and {negatives} negatives")]
    SingleClass { positives: usize, negatives: usize },
}

/// Parallel scores and binary labels.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredLabels {
    scores: Vec<f64>,
    labels: Vec<bool>,
    positives: usize,
}

impl ScoredLabels {
    pub fn new<S: Scalar>(scores: &[S], labels: &[bool]) -> Result<Self, MetricError> {
        if scores.len() != labels.len() {
            return Err(MetricError::LengthMismatch {
                scores: scores.len(),
                labels: labels.len(),
            });
        }
        if scores.is_empty() {
            return Err(MetricError::Empty);
        }
        let scores: Vec<f64> = scores.iter().map(|s| s.as_f64()).collect();
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(MetricError::NonFinite(i));
        }
        let positives = labels.iter().filter(|&&l| l).count();
        Ok(Self {
            scores,
            labels: labels.to_vec(),
            positives,
        })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn positives(&self) -> usize {
        self.positives
    }

    pub fn negatives(&self) -> usize {
        self.len() - self.positives
    }

    fn single_class(&self) -> MetricError {
        MetricError::SingleClass {
            positives: self.positives(),
            negatives: self.negatives(),
        }
    }

    /// `(positives, negatives)` per tie group, ordered by ascending score.
    fn tie_groups(&self) -> Vec<(usize, usize)> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            self.scores[a]
                .partial_cmp(&self.scores[b])
                .unwrap_or(Ordering::Equal)
        });
        let mut groups: Vec<(usize, usize)> = Vec::new();
        let mut last = f64::NAN;
        for i in order {
            let s = self.scores[i];
            if groups.is_empty() || s != last {
                groups.push((0, 0));
                last = s;
            }
            let g = groups.last_mut().expect("group pushed above");
            if self.labels[i] {
                g.0 += 1;
            } else {
                g.1 += 1;
            }
        }
        groups
    }
}

/// Area under the ROC curve as the Mann–Whitney statistic
/// `P(s⁺ > s⁻) + ½ P(s⁺ = s⁻)`.
pub fn auroc(data: &ScoredLabels) -> Result<f64, MetricError> {
    let (p, n) = (data.positives(), data.negatives());
    if p == 0 || n == 0 {
        return Err(data.single_class());
    }
    // Counts are integers or half-integers, exact in f64.
    let mut wins = 0.0;
    let mut negatives_below = 0usize;
    for (pos, neg) in data.tie_groups() {
        wins += pos as f64 * (negatives_below as f64 + 0.5 * neg as f64);
        negatives_below += neg;
    }
    Ok(wins / (p as f64 * n as f64))
}

/// Average precision: `Σ_k (R_k − R_{k−1}) · P_k` over descending score thresholds.
pub fn auprc(data: &ScoredLabels) -> Result<f64, MetricError> {
    let p = data.positives();
    if p == 0 {
        return Err(data.single_class());
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut ap = 0.0;
    for (pos, neg) in data.tie_groups().into_iter().rev() {
        tp += pos;
        fp += neg;
        if pos > 0 {
            let precision = tp as f64 / (tp + fp) as f64;
            ap += precision * pos as f64;
        }
    }
    Ok(ap / p as f64)
}
