//! Greedy forward-selection rankings under six mutual-information criteria.
//!
//! Every criterion is a function of the candidate's relevance `I(X_i; c)` and
//! an accumulator over the already-selected set `S`, updated with one pairwise
//! term each time a feature joins `S`:
//!
//! | criterion | pair term with selected `X_j`      | accumulator | score                     |
//! |-----------|------------------------------------|-------------|---------------------------|
//! | mRMR      | `I(X_i; X_j)`                      | sum         | `rel - acc / |S|`         |
//! | MIFS      | `I(X_i; X_j)`                      | sum         | `rel - beta * acc`        |
//! | CIFE      | `I(X_i; X_j) - I(X_i; X_j | c)`    | sum         | `rel - acc`               |
//! | JMI       | `I(X_i; X_j) - I(X_i; X_j | c)`    | sum         | `rel - acc / |S|`         |
//! | CMIM      | `I(X_i; c | X_j)`                  | min         | `acc`                     |
//! | DISR      | `I((X_i,X_j); c) / H(X_i, X_j, c)` | sum         | `acc`                     |
//!
//! With `S` empty every criterion scores plain relevance, except DISR which
//! uses `I(X_i; c) / H(X_i, c)`. Ties go to the smaller column index.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::infotheory::{
    conditional_mutual_information, discretize, joint_entropy, mutual_information, pair, BinningConfig,
    DiscreteColumn, InfoError,
};

pub const TIE_RULE: &str = "lowest_column_index";

#[derive(Debug, Error)]
pub enum RankingError {
    #[error("dataset has no features to rank")]
    NoFeatures,
    #[error(transparent)]
    Info(#[from] InfoError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "mRMR")]
    Mrmr,
    #[serde(rename = "MIFS")]
    Mifs,
    #[serde(rename = "CIFE")]
    Cife,
    #[serde(rename = "JMI")]
    Jmi,
    #[serde(rename = "CMIM")]
    Cmim,
    #[serde(rename = "DISR")]
    Disr,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Mrmr,
        Algorithm::Mifs,
        Algorithm::Cife,
        Algorithm::Jmi,
        Algorithm::Cmim,
        Algorithm::Disr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Mrmr => "mRMR",
            Algorithm::Mifs => "MIFS",
            Algorithm::Cife => "CIFE",
            Algorithm::Jmi => "JMI",
            Algorithm::Cmim => "CMIM",
            Algorithm::Disr => "DISR",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown algorithm `{s}`"))
    }
}

/// An algorithm with its parameters; `beta` only affects MIFS.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub algorithm: Algorithm,
    pub beta: f64,
}

impl Criterion {
    pub const DEFAULT_BETA: f64 = 1.0;

    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            beta: Self::DEFAULT_BETA,
        }
    }

    pub fn mifs(beta: f64) -> Self {
        Self {
            algorithm: Algorithm::Mifs,
            beta,
        }
    }

    fn uses_min(self) -> bool {
        self.algorithm == Algorithm::Cmim
    }

    fn empty_accumulator(self) -> f64 {
        if self.uses_min() {
            f64::INFINITY
        } else {
            0.0
        }
    }

    /// Term contributed by selected feature `j` to candidate `i`.
    pub fn pair_term(self, xi: &DiscreteColumn, xj: &DiscreteColumn, c: &DiscreteColumn) -> Result<f64, InfoError> {
        Ok(match self.algorithm {
            Algorithm::Mrmr | Algorithm::Mifs => mutual_information(xi, xj)?,
            Algorithm::Cife | Algorithm::Jmi => {
                mutual_information(xi, xj)? - conditional_mutual_information(xi, xj, c)?
            }
            Algorithm::Cmim => conditional_mutual_information(xi, c, xj)?,
            Algorithm::Disr => {
                let joint = pair(xi, xj)?;
                symmetrical_relevance(&joint, c)?
            }
        })
    }

    /// Score with an empty selected set.
    pub fn first_score(self, xi: &DiscreteColumn, c: &DiscreteColumn, relevance: f64) -> Result<f64, InfoError> {
        match self.algorithm {
            Algorithm::Disr => symmetrical_relevance(xi, c),
            _ => Ok(relevance),
        }
    }

    pub fn accumulate(self, acc: f64, term: f64) -> f64 {
        if self.uses_min() {
            acc.min(term)
        } else {
            acc + term
        }
    }

    /// Score from relevance, accumulator and `|S| >= 1`.
    pub fn score(self, relevance: f64, acc: f64, selected: usize) -> f64 {
        // `1/|S|` as a multiplier, so mRMR is literally MIFS with beta = 1/|S|
        let inv = 1.0 / selected as f64;
        match self.algorithm {
            Algorithm::Mrmr | Algorithm::Jmi => relevance - inv * acc,
            Algorithm::Mifs => relevance - self.beta * acc,
            Algorithm::Cife => relevance - acc,
            Algorithm::Cmim | Algorithm::Disr => acc,
        }
    }
}

/// `I(X; c) / H(X, c)`, or 0 when the joint entropy vanishes.
pub fn symmetrical_relevance(x: &DiscreteColumn, c: &DiscreteColumn) -> Result<f64, InfoError> {
    let h = joint_entropy(x, c)?;
    if h > 0.0 {
        Ok(mutual_information(x, c)? / h)
    } else {
        Ok(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub binning: BinningConfig,
    pub tie_rule: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub feature: String,
    pub score: f64,
    pub rank: usize,
}

/// Full ranking, best first; `score` is the criterion value when the feature
/// was selected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub algorithm: Algorithm,
    pub params: RankingParams,
    pub entries: Vec<RankedFeature>,
}

impl FeatureRanking {
    pub fn features(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.feature.clone()).collect()
    }

    pub fn position(&self, feature: &str) -> Option<usize> {
        self.entries.iter().find(|e| e.feature == feature).map(|e| e.rank)
    }

    pub fn score_of(&self, feature: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.feature == feature).map(|e| e.score)
    }

    pub fn lowest(&self) -> Option<&RankedFeature> {
        self.entries.last()
    }
}

/// Discretizes every feature column (in parallel) and the labels.
pub fn discretize_dataset(
    dataset: &Dataset,
    binning: &BinningConfig,
) -> Result<(Vec<DiscreteColumn>, DiscreteColumn), InfoError> {
    let columns = dataset
        .columns()
        .par_iter()
        .zip(dataset.feature_names())
        .map(|(col, name)| discretize(col, binning).map(|d| d.with_origin(name.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((columns, DiscreteColumn::from_labels(dataset.labels())))
}

/// Greedy selection to exhaustion over discretized columns. Returns
/// `(column index, score)` in selection order.
pub fn rank_discrete(
    columns: &[DiscreteColumn],
    labels: &DiscreteColumn,
    criterion: Criterion,
) -> Result<Vec<(usize, f64)>, RankingError> {
    let n_features = columns.len();
    if n_features == 0 {
        return Err(RankingError::NoFeatures);
    }
    let relevance: Vec<f64> = columns
        .par_iter()
        .map(|x| mutual_information(x, labels))
        .collect::<Result<_, _>>()?;
    let mut acc = vec![criterion.empty_accumulator(); n_features];
    let mut remaining: Vec<usize> = (0..n_features).collect();
    let mut order = Vec::with_capacity(n_features);

    while !remaining.is_empty() {
        let scores: Vec<f64> = match order.last() {
            None => remaining
                .par_iter()
                .map(|&i| criterion.first_score(&columns[i], labels, relevance[i]))
                .collect::<Result<_, _>>()?,
            Some(&(last, _)) => {
                let terms: Vec<f64> = remaining
                    .par_iter()
                    .map(|&i| criterion.pair_term(&columns[i], &columns[last], labels))
                    .collect::<Result<_, _>>()?;
                let selected = order.len();
                remaining
                    .iter()
                    .zip(terms)
                    .map(|(&i, t)| {
                        acc[i] = criterion.accumulate(acc[i], t);
                        criterion.score(relevance[i], acc[i], selected)
                    })
                    .collect()
            }
        };
        // `remaining` is in ascending column order, so strict `>` keeps the
        // smallest index among equal scores.
        let mut best = 0;
        for (pos, &s) in scores.iter().enumerate().skip(1) {
            if s > scores[best] {
                best = pos;
            }
        }
        order.push((remaining.remove(best), scores[best]));
    }
    Ok(order)
}

/// Ranks all features of `dataset` under `criterion`.
pub fn rank(dataset: &Dataset, criterion: Criterion, binning: &BinningConfig) -> Result<FeatureRanking, RankingError> {
    if dataset.n_features() == 0 {
        return Err(RankingError::NoFeatures);
    }
    let (columns, labels) = discretize_dataset(dataset, binning)?;
    let order = rank_discrete(&columns, &labels, criterion)?;
    let entries = order
        .into_iter()
        .enumerate()
        .map(|(pos, (i, score))| RankedFeature {
            feature: dataset.feature_names()[i].clone(),
            score,
            rank: pos + 1,
        })
        .collect();
    Ok(FeatureRanking {
        algorithm: criterion.algorithm,
        params: RankingParams {
            beta: (criterion.algorithm == Algorithm::Mifs).then_some(criterion.beta),
            binning: *binning,
            tie_rule: TIE_RULE.to_string(),
        },
        entries,
    })
}

pub fn rank_mrmr(dataset: &Dataset, binning: &BinningConfig) -> Result<FeatureRanking, RankingError> {
    rank(dataset, Criterion::new(Algorithm::Mrmr), binning)
}

pub fn rank_mifs(dataset: &Dataset, binning: &BinningConfig, beta: f64) -> Result<FeatureRanking, RankingError> {
    rank(dataset, Criterion::mifs(beta), binning)
}

pub fn rank_cife(dataset: &Dataset, binning: &BinningConfig) -> Result<FeatureRanking, RankingError> {
    rank(dataset, Criterion::new(Algorithm::Cife), binning)
}

pub fn rank_jmi(dataset: &Dataset, binning: &BinningConfig) -> Result<FeatureRanking, RankingError> {
    rank(dataset, Criterion::new(Algorithm::Jmi), binning)
}

pub fn rank_cmim(dataset: &Dataset, binning: &BinningConfig) -> Result<FeatureRanking, RankingError> {
    rank(dataset, Criterion::new(Algorithm::Cmim), binning)
}

pub fn rank_disr(dataset: &Dataset, binning: &BinningConfig) -> Result<FeatureRanking, RankingError> {
    rank(dataset, Criterion::new(Algorithm::Disr), binning)
}
