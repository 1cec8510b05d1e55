//! Confusion-matrix metrics with malware (label 1) as the positive class.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("predictions and labels differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("cannot compute metrics on zero samples")]
    Empty,
}

/// A ratio that is either defined or absent because its denominator is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Rate {
    Defined(f64),
    Undefined { undefined: String },
}

impl Rate {
    fn ratio(num: u64, den: u64, reason: &str) -> Self {
        if den == 0 {
            Rate::Undefined {
                undefined: reason.to_string(),
            }
        } else {
            Rate::Defined(num as f64 / den as f64)
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Rate::Defined(v) => Some(*v),
            Rate::Undefined { .. } => None,
        }
    }

    /// Defined value, or 0 where the ratio is undefined.
    pub fn or_zero(&self) -> f64 {
        self.value().unwrap_or(0.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierMetrics {
    pub confusion: Confusion,
    pub accuracy: Rate,
    pub precision: Rate,
    pub recall: Rate,
    pub f1: Rate,
    pub tpr: Rate,
    pub tnr: Rate,
    pub fpr: Rate,
    pub fnr: Rate,
    pub fdr: Rate,
}

impl ClassifierMetrics {
    pub fn from_confusion(c: Confusion) -> Self {
        let pos = c.tp + c.fn_;
        let neg = c.tn + c.fp;
        let predicted_pos = c.tp + c.fp;
        Self {
            confusion: c,
            accuracy: Rate::ratio(c.tp + c.tn, c.total(), "no samples"),
            precision: Rate::ratio(c.tp, predicted_pos, "no positive predictions"),
            recall: Rate::ratio(c.tp, pos, "no positive samples"),
            f1: Rate::ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_, "no positives predicted or present"),
            tpr: Rate::ratio(c.tp, pos, "no positive samples"),
            tnr: Rate::ratio(c.tn, neg, "no negative samples"),
            fpr: Rate::ratio(c.fp, neg, "no negative samples"),
            fnr: Rate::ratio(c.fn_, pos, "no positive samples"),
            fdr: Rate::ratio(c.fp, predicted_pos, "no positive predictions"),
        }
    }
}

pub fn confusion(predictions: &[u8], labels: &[u8]) -> Result<Confusion, MetricsError> {
    if predictions.len() != labels.len() {
        return Err(MetricsError::LengthMismatch(predictions.len(), labels.len()));
    }
    if labels.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut c = Confusion::default();
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p != 0, l != 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

pub fn compute_metrics(predictions: &[u8], labels: &[u8]) -> Result<ClassifierMetrics, MetricsError> {
    confusion(predictions, labels).map(ClassifierMetrics::from_confusion)
}

/// Area under the ROC curve by the rank-sum statistic; tied scores count half.
/// `None` when only one class is present.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l == 1).map(|(&s, _)| s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l == 0).map(|(&s, _)| s).collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut wins = 0.0;
    for &p in &pos {
        for &n in &neg {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    Some(wins / (pos.len() * neg.len()) as f64)
}
