//! Two-step feature selection: a tampering audit that drops criteria which
//! rank injected noise highly, then backward elimination gated by a linear
//! classifier.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{inject_random_features, kfold_indices, DataSplit, Dataset, DatasetError, MinMaxScaler, RANDOM_FEATURE_NAMES};
use crate::infotheory::BinningConfig;
use crate::metrics::{compute_metrics, ClassifierMetrics, MetricsError};
use crate::neural::{gate_predict, gate_train_with, GateConfig, NeuralError};
use crate::ranking::{rank, Algorithm, Criterion, FeatureRanking, RankingError};

pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_TAMPER_THRESHOLD: f64 = 0.30;
pub const DEFAULT_GAMMA: f64 = 0.97;

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("rankings cover different feature sets")]
    FeatureSetMismatch,
    #[error("gate classifier failed: {0}")]
    GateTrainingFailure(#[source] NeuralError),
    #[error(transparent)]
    Ranking(#[from] RankingError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

pub type Result<T, E = SelectionError> = std::result::Result<T, E>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmAudit {
    pub algorithm: Algorithm,
    /// Fold-averaged 1-based rank of each injected feature.
    pub random_feature_ranks: BTreeMap<String, f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TamperingAudit {
    pub per_algorithm: Vec<AlgorithmAudit>,
    pub folds: usize,
    pub threshold: f64,
    /// Number of ranked positions, original features plus the three injected.
    pub positions: usize,
    /// Average ranks strictly above this bound lie in the bottom fraction.
    pub pass_rank_bound: f64,
    pub seed: u64,
}

impl TamperingAudit {
    pub fn passing(&self) -> Vec<Algorithm> {
        self.per_algorithm
            .iter()
            .filter(|a| a.pass)
            .map(|a| a.algorithm)
            .collect()
    }

    pub fn get(&self, algorithm: Algorithm) -> Option<&AlgorithmAudit> {
        self.per_algorithm.iter().find(|a| a.algorithm == algorithm)
    }
}

/// Mean 1-based position of every feature across rankings.
pub fn average_fold_ranks(rankings: &[FeatureRanking]) -> Result<BTreeMap<String, f64>> {
    let first = rankings
        .first()
        .ok_or_else(|| SelectionError::InvalidParameter("no rankings to average".into()))?;
    let reference: BTreeSet<&str> = first.entries.iter().map(|e| e.feature.as_str()).collect();
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    for r in rankings {
        let features: BTreeSet<&str> = r.entries.iter().map(|e| e.feature.as_str()).collect();
        if features != reference || features.len() != r.entries.len() {
            return Err(SelectionError::FeatureSetMismatch);
        }
        for e in &r.entries {
            *sums.entry(e.feature.clone()).or_default() += e.rank as f64;
        }
    }
    let k = rankings.len() as f64;
    Ok(sums.into_iter().map(|(f, s)| (f, s / k)).collect())
}

/// Injects the three random features, ranks each of `folds` disjoint parts
/// with every criterion and averages the ranks. A criterion passes when all
/// three random features average in the bottom `threshold` fraction of
/// positions, i.e. strictly above `(1 - threshold) * positions`.
pub fn tampering_audit(
    dataset: &Dataset,
    criteria: &[Criterion],
    folds: usize,
    seed: u64,
    threshold: f64,
    binning: &BinningConfig,
) -> Result<TamperingAudit> {
    if folds < 2 {
        return Err(SelectionError::InvalidParameter(format!("folds must be >= 2, got {folds}")));
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(SelectionError::InvalidParameter(format!(
            "tampering threshold must be in (0, 1], got {threshold}"
        )));
    }
    let tampered = inject_random_features(dataset, seed)?;
    let parts: Vec<Dataset> = kfold_indices(tampered.n_samples(), folds, seed)?
        .iter()
        .map(|rows| tampered.select_rows(rows))
        .collect();
    let positions = tampered.n_features();
    let bound = (1.0 - threshold) * positions as f64;

    let per_algorithm = criteria
        .par_iter()
        .map(|&criterion| {
            let rankings = parts
                .par_iter()
                .map(|part| rank(part, criterion, binning))
                .collect::<Result<Vec<_>, _>>()?;
            let averages = average_fold_ranks(&rankings)?;
            let random_feature_ranks: BTreeMap<String, f64> = RANDOM_FEATURE_NAMES
                .iter()
                .map(|n| (n.to_string(), averages[*n]))
                .collect();
            let pass = random_feature_ranks.values().all(|&r| r > bound);
            Ok(AlgorithmAudit {
                algorithm: criterion.algorithm,
                random_feature_ranks,
                pass,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(TamperingAudit {
        per_algorithm,
        folds,
        threshold,
        positions,
        pass_rank_bound: bound,
        seed,
    })
}

/// Trains the gate on `train_rows` and scores it on `eval_rows`, with
/// min-max scaling fitted on the training rows only.
pub fn gate_evaluate(
    dataset: &Dataset,
    train_rows: &[usize],
    eval_rows: &[usize],
    gate: &GateConfig,
) -> Result<ClassifierMetrics> {
    let scaler = MinMaxScaler::fit_rows(dataset, train_rows);
    let scaled = scaler.transform(dataset)?;
    let model = gate_train_with(&scaled.select_rows(train_rows), gate)
        .map_err(SelectionError::GateTrainingFailure)?;
    let eval = scaled.select_rows(eval_rows);
    let predictions = gate_predict(&model, &eval).map_err(SelectionError::GateTrainingFailure)?;
    Ok(compute_metrics(&predictions, eval.labels())?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EliminationStep {
    pub removed_feature: String,
    /// Features left after the removal; the gate is evaluated on these.
    pub n_features: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EliminationTrace {
    pub algorithm: Algorithm,
    pub gamma: f64,
    pub initial_features: Vec<String>,
    pub steps: Vec<EliminationStep>,
    /// 1-based index of the step whose gate failed, if any.
    pub stopped_at: Option<usize>,
    /// Features present at the last passing evaluation.
    pub mdrt: usize,
}

impl EliminationTrace {
    /// Surviving features at `size`, if the trace passed through that size.
    pub fn features_at(&self, size: usize) -> Option<Vec<String>> {
        let n = self.initial_features.len();
        if size > n || size + self.steps.len() < n {
            return None;
        }
        let removed: BTreeSet<&str> = self.steps[..n - size]
            .iter()
            .map(|s| s.removed_feature.as_str())
            .collect();
        Some(
            self.initial_features
                .iter()
                .filter(|f| !removed.contains(f.as_str()))
                .cloned()
                .collect(),
        )
    }

    pub fn mdrt_features(&self) -> Vec<String> {
        self.features_at(self.mdrt).expect("mdrt lies on the trace")
    }

    pub fn step_at(&self, size: usize) -> Option<&EliminationStep> {
        self.steps.iter().find(|s| s.n_features == size)
    }

    /// CSV of `(n_features, accuracy, precision, recall)` per evaluation.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n_features,accuracy,precision,recall\n");
        for s in &self.steps {
            out.push_str(&format!("{},{},{},{}\n", s.n_features, s.accuracy, s.precision, s.recall));
        }
        out
    }
}

/// When backward elimination stops.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopRule {
    /// Stop at the first evaluation with any metric below `gamma`.
    Gate(f64),
    /// Ignore the gate and keep removing until `size` features remain.
    Size(usize),
}

/// Backward elimination: rank the current features on the learn split,
/// drop the lowest-ranked, evaluate the gate (learn -> test) and stop once
/// accuracy, precision or recall falls below `gamma`.
pub fn backward_eliminate(
    dataset: &Dataset,
    criterion: Criterion,
    split: &DataSplit,
    gamma: f64,
    binning: &BinningConfig,
    gate: &GateConfig,
) -> Result<EliminationTrace> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(SelectionError::InvalidParameter(format!("gamma must be in [0, 1), got {gamma}")));
    }
    eliminate(dataset, criterion, split, StopRule::Gate(gamma), binning, gate)
}

pub fn eliminate(
    dataset: &Dataset,
    criterion: Criterion,
    split: &DataSplit,
    stop: StopRule,
    binning: &BinningConfig,
    gate: &GateConfig,
) -> Result<EliminationTrace> {
    if dataset.n_features() < 2 {
        return Err(SelectionError::InvalidParameter(
            "backward elimination needs at least 2 features".into(),
        ));
    }
    let (gamma, min_size) = match stop {
        StopRule::Gate(g) => (g, 1),
        StopRule::Size(s) => (0.0, s.max(1)),
    };
    let initial: Vec<String> = dataset.feature_names().to_vec();
    let mut current = initial.clone();
    let mut steps = Vec::new();
    let mut stopped_at = None;

    while current.len() > min_size {
        let view = dataset.project(&current, "backward elimination")?;
        let ranking = rank(&view.select_rows(&split.learn), criterion, binning)?;
        let lowest = ranking.lowest().expect("non-empty ranking").feature.clone();
        current.retain(|f| *f != lowest);

        let reduced = dataset.project(&current, "backward elimination")?;
        let m = gate_evaluate(&reduced, &split.learn, &split.test, gate)?;
        let (accuracy, precision, recall) = (m.accuracy.or_zero(), m.precision.or_zero(), m.recall.or_zero());
        let passed = accuracy >= gamma && precision >= gamma && recall >= gamma;
        steps.push(EliminationStep {
            removed_feature: lowest,
            n_features: current.len(),
            accuracy,
            precision,
            recall,
            passed,
        });
        if !passed && matches!(stop, StopRule::Gate(_)) {
            stopped_at = Some(steps.len());
            break;
        }
    }

    let mdrt = match stopped_at {
        Some(s) => initial.len() - s + 1,
        None => current.len(),
    };
    Ok(EliminationTrace {
        algorithm: criterion.algorithm,
        gamma,
        initial_features: initial,
        steps,
        stopped_at,
        mdrt,
    })
}

/// Column projection onto `features`, recording the selection provenance.
pub fn extract_optimized(dataset: &Dataset, features: &[String]) -> Result<Dataset> {
    Ok(dataset.project(features, "optimized feature selection")?)
}
