//! Rank-Relevance weights: criterion scores blended with cross-validated F1,
//! min-max mapped onto (0, 1] and used to rescale dataset columns.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{kfold_indices, Dataset, DatasetError, Transform};
use crate::neural::GateConfig;
use crate::ranking::{Algorithm, FeatureRanking};
use crate::selection::{gate_evaluate, SelectionError};

/// Offset keeping the smallest weight strictly positive.
pub const WEIGHT_EPSILON: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RrwError {
    #[error("no rankings given")]
    EmptyInput,
    #[error("rankings cover different feature sets")]
    FeatureSetMismatch,
    #[error("average F1 must be in (0, 1], got {0}")]
    InvalidF1(f64),
    #[error("no weight for feature `{0}`")]
    MissingWeight(String),
    #[error("folds must be >= 2, got {0}")]
    InvalidFolds(usize),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

pub type Result<T, E = RrwError> = std::result::Result<T, E>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightInput {
    pub algorithm: Algorithm,
    pub avg_f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RrwWeights {
    pub weights: BTreeMap<String, f64>,
    pub raw_scores: BTreeMap<String, f64>,
    pub inputs: Vec<WeightInput>,
}

impl RrwWeights {
    pub fn get(&self, feature: &str) -> Option<f64> {
        self.weights.get(feature).copied()
    }
}

/// Mean F1 of the gate over `k` shuffled folds, each fold scored by a gate
/// trained on the remaining folds. A fold whose F1 is undefined (no
/// positives predicted or present) contributes 0.
pub fn avg_f1_cv(dataset: &Dataset, k: usize, seed: u64, gate: &GateConfig) -> Result<f64> {
    if k < 2 {
        return Err(RrwError::InvalidFolds(k));
    }
    let folds = kfold_indices(dataset.n_samples(), k, seed)?;
    let mut total = 0.0;
    for (f, held_out) in folds.iter().enumerate() {
        let train: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != f)
            .flat_map(|(_, rows)| rows.iter().copied())
            .collect();
        let metrics = gate_evaluate(dataset, &train, held_out, gate)?;
        total += metrics.f1.or_zero();
    }
    Ok(total / k as f64)
}

/// `raw(f) = sum_i s_i(f) * avgF1_i / n`, then
/// `weight(f) = (raw(f) - min + eps) / (max - min + eps)`; all-equal raw
/// scores give all-ones.
pub fn rrw_scores(rankings: &[(FeatureRanking, f64)]) -> Result<RrwWeights> {
    let (first, _) = rankings.first().ok_or(RrwError::EmptyInput)?;
    let mut reference = first.features();
    reference.sort();
    for (r, f1) in rankings {
        if !(*f1 > 0.0 && *f1 <= 1.0) {
            return Err(RrwError::InvalidF1(*f1));
        }
        let mut features = r.features();
        features.sort();
        if features != reference {
            return Err(RrwError::FeatureSetMismatch);
        }
    }
    let n = rankings.len() as f64;
    let raw_scores: BTreeMap<String, f64> = reference
        .iter()
        .map(|feature| {
            let sum: f64 = rankings
                .iter()
                .map(|(r, f1)| r.score_of(feature).expect("feature present") * f1)
                .sum();
            (feature.clone(), sum / n)
        })
        .collect();
    let lo = raw_scores.values().copied().fold(f64::INFINITY, f64::min);
    let hi = raw_scores.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights = raw_scores
        .iter()
        .map(|(f, &raw)| {
            let w = if hi > lo {
                (raw - lo + WEIGHT_EPSILON) / (hi - lo + WEIGHT_EPSILON)
            } else {
                1.0
            };
            (f.clone(), w)
        })
        .collect();
    Ok(RrwWeights {
        weights,
        raw_scores,
        inputs: rankings
            .iter()
            .map(|(r, f1)| WeightInput {
                algorithm: r.algorithm,
                avg_f1: *f1,
            })
            .collect(),
    })
}

/// Multiplies every column by its feature's weight.
pub fn apply_weights(dataset: &Dataset, weights: &RrwWeights) -> Result<Dataset> {
    let mut used = BTreeMap::new();
    let mut columns = Vec::with_capacity(dataset.n_features());
    for (name, col) in dataset.feature_names().iter().zip(dataset.columns()) {
        let w = weights
            .get(name)
            .ok_or_else(|| RrwError::MissingWeight(name.clone()))?;
        used.insert(name.clone(), w);
        columns.push(col.iter().map(|v| v * w).collect());
    }
    Ok(dataset.map_columns(
        dataset.feature_names().to_vec(),
        columns,
        Transform::Weighted { weights: used },
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infotheory::BinningConfig;
    use crate::ranking::{RankedFeature, RankingParams, TIE_RULE};

    fn ranking(scores: &[(&str, f64)]) -> FeatureRanking {
        FeatureRanking {
            algorithm: Algorithm::Mrmr,
            params: RankingParams {
                beta: None,
                binning: BinningConfig::default(),
                tie_rule: TIE_RULE.into(),
            },
            entries: scores
                .iter()
                .enumerate()
                .map(|(i, (f, s))| RankedFeature {
                    feature: f.to_string(),
                    score: *s,
                    rank: i + 1,
                })
                .collect(),
        }
    }

    fn two_columns() -> Dataset {
        Dataset::new(
            vec!["A".into(), "B".into()],
            vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]],
            vec![0, 1, 1],
        )
        .unwrap()
    }

    #[test]
    fn single_ranking_keeps_its_scores() {
        let w = rrw_scores(&[(ranking(&[("A", 0.4), ("B", 0.1)]), 1.0)]).unwrap();
        assert_eq!(w.raw_scores["A"], 0.4);
        assert_eq!(w.raw_scores["B"], 0.1);
        assert_eq!(w.weights["A"], 1.0);
    }

    #[test]
    fn two_rankings_hand_arithmetic() {
        let w = rrw_scores(&[
            (ranking(&[("A", 0.4), ("B", 0.2)]), 1.0),
            (ranking(&[("A", 0.3), ("B", 0.1)]), 1.0),
        ])
        .unwrap();
        assert!((w.raw_scores["A"] - 0.35).abs() < 1e-12);
        assert!((w.raw_scores["B"] - 0.15).abs() < 1e-12);
        assert_eq!(w.weights["A"], 1.0);
        let b = w.weights["B"];
        assert!(b > 0.0 && b < 1e-7, "{b}");
        assert_eq!(w.inputs.len(), 2);
    }

    #[test]
    fn equal_scores_map_to_ones() {
        let w = rrw_scores(&[(ranking(&[("A", 0.2), ("B", 0.2)]), 0.5)]).unwrap();
        assert!(w.weights.values().all(|&v| v == 1.0));
    }

    #[test]
    fn input_validation() {
        assert!(matches!(rrw_scores(&[]), Err(RrwError::EmptyInput)));
        assert!(matches!(
            rrw_scores(&[(ranking(&[("A", 0.1)]), 0.0)]),
            Err(RrwError::InvalidF1(_))
        ));
        assert!(matches!(
            rrw_scores(&[(ranking(&[("A", 0.1)]), 1.0), (ranking(&[("B", 0.1)]), 1.0)]),
            Err(RrwError::FeatureSetMismatch)
        ));
    }

    #[test]
    fn weighting_scales_columns() {
        let ds = two_columns();
        let mut w = rrw_scores(&[(ranking(&[("A", 0.2), ("B", 0.2)]), 1.0)]).unwrap();
        assert_eq!(apply_weights(&ds, &w).unwrap().columns(), ds.columns());
        w.weights.insert("A".into(), 0.5);
        let out = apply_weights(&ds, &w).unwrap();
        assert_eq!(out.column(0), &[0.5, 1.0, 1.5]);
        assert_eq!(out.column(1), ds.column(1));
        assert_eq!(out.labels(), ds.labels());
        assert!(out.is_scaled());
        w.weights.remove("B");
        assert!(matches!(apply_weights(&ds, &w), Err(RrwError::MissingWeight(f)) if f == "B"));
    }

    #[test]
    fn f1_on_separable_data() {
        let n = 200;
        let labels: Vec<u8> = (0..n).map(|i| u8::from(i % 3 == 0)).collect();
        let x: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
        let ds = Dataset::new(vec!["x".into()], vec![x], labels).unwrap();
        let g = GateConfig::default();
        let f5 = avg_f1_cv(&ds, 5, 1, &g).unwrap();
        let f2 = avg_f1_cv(&ds, 2, 1, &g).unwrap();
        assert!((f5 - 1.0).abs() < 1e-9);
        assert!((f5 - f2).abs() < 0.05);
        assert!(matches!(avg_f1_cv(&ds, 1, 1, &g), Err(RrwError::InvalidFolds(1))));
    }
}
