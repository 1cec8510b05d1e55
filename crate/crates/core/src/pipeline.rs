//! End-to-end workflows behind the four CLI modes.
//!
//! * `fs`: tampering audit, backward elimination per surviving criterion,
//!   a common-MDRt metric gate, and the Optimized dataset.
//! * `rrw`: RRw weights for the Optimized dataset and the reweighted copy.
//! * `ae`: autoencoder with an MDRt-wide bottleneck and the latent dataset.
//! * `evaluate`: the detector MLP trained and scored on any dataset.
//!
//! Every report embeds the effective configuration and holds no timestamps,
//! so identical configurations produce byte-identical JSON.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{load_csv, split, DataSplit, Dataset, DatasetError, MinMaxScaler};
use crate::infotheory::BinningConfig;
use crate::metrics::{compute_metrics, ClassifierMetrics};
use crate::neural::{
    ae_encode, ae_new, ae_train, classify, mlp_new, mlp_predict, mlp_train, GateConfig, NeuralError, SgdConfig,
    TrainingCurve,
};
use crate::ranking::{rank, Algorithm, Criterion, FeatureRanking, RankingError};
use crate::rrw::{apply_weights, avg_f1_cv, rrw_scores, RrwError, RrwWeights};
use crate::selection::{
    eliminate, gate_evaluate, tampering_audit, EliminationTrace, SelectionError, StopRule, TamperingAudit,
    DEFAULT_FOLDS, DEFAULT_GAMMA, DEFAULT_TAMPER_THRESHOLD,
};

pub const FS_REPORT: &str = "fs_report.json";
pub const OPTIMIZED_CSV: &str = "optimized.csv";
pub const RRW_REPORT: &str = "rrw_report.json";
pub const RRW_WEIGHTS: &str = "rrw_weights.json";
pub const RRW_CSV: &str = "rrw_optimized.csv";
pub const AE_REPORT: &str = "ae_report.json";
pub const AE_CSV: &str = "ae_generated.csv";
pub const AE_CURVE: &str = "ae_curve.csv";
pub const AE_MODEL: &str = "ae_model.json";
pub const EVALUATE_REPORT: &str = "evaluate_report.json";
pub const MLP_CURVE: &str = "mlp_curve.csv";
pub const MLP_MODEL: &str = "mlp_model.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Config,
    Load,
    Tampering,
    Elimination,
    PostGate,
    Weights,
    Autoencoder,
    Evaluate,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Config => "config",
            Stage::Load => "load",
            Stage::Tampering => "tampering",
            Stage::Elimination => "elimination",
            Stage::PostGate => "post-gate",
            Stage::Weights => "weights",
            Stage::Autoencoder => "autoencoder",
            Stage::Evaluate => "evaluate",
            Stage::Write => "write",
        };
        f.write_str(name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Training,
}

#[derive(Debug, Error)]
#[error("[{stage}] {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub kind: ErrorKind,
    pub message: String,
}

impl PipelineError {
    pub fn config(message: impl fmt::Display) -> Self {
        Self::new(Stage::Config, ErrorKind::Config, message)
    }

    fn new(stage: Stage, kind: ErrorKind, err: impl fmt::Display) -> Self {
        Self {
            stage,
            kind,
            message: err.to_string(),
        }
    }

    /// Process exit code: 1 configuration, 2 data, 3 training failure.
    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Config => 1,
            ErrorKind::Data => 2,
            ErrorKind::Training => 3,
        }
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

fn neural_kind(e: &NeuralError) -> ErrorKind {
    match e {
        NeuralError::SingleClassData | NeuralError::DivergenceDetected { .. } | NeuralError::EmptyData => {
            ErrorKind::Training
        }
        NeuralError::InvalidBottleneck { .. } => ErrorKind::Config,
        _ => ErrorKind::Data,
    }
}

fn selection_kind(e: &SelectionError) -> ErrorKind {
    match e {
        SelectionError::GateTrainingFailure(_) => ErrorKind::Training,
        SelectionError::InvalidParameter(_) => ErrorKind::Config,
        _ => ErrorKind::Data,
    }
}

trait StageContext<T> {
    fn at(self, stage: Stage) -> Result<T>;
}

macro_rules! stage_context {
    ($err:ty, $kind:expr) => {
        impl<T> StageContext<T> for std::result::Result<T, $err> {
            fn at(self, stage: Stage) -> Result<T> {
                self.map_err(|e| {
                    let kind: fn(&$err) -> ErrorKind = $kind;
                    PipelineError::new(stage, kind(&e), e)
                })
            }
        }
    };
}

stage_context!(DatasetError, |_| ErrorKind::Data);
stage_context!(RankingError, |_| ErrorKind::Data);
stage_context!(SelectionError, selection_kind);
stage_context!(NeuralError, neural_kind);
stage_context!(RrwError, |e| match e {
    RrwError::Selection(s) => selection_kind(s),
    RrwError::InvalidF1(_) => ErrorKind::Training,
    RrwError::InvalidFolds(_) => ErrorKind::Config,
    _ => ErrorKind::Data,
});
stage_context!(std::io::Error, |_| ErrorKind::Data);
stage_context!(serde_json::Error, |_| ErrorKind::Data);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Fs,
    Rrw,
    Ae,
    Evaluate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub input: PathBuf,
    pub label: String,
    pub seed: u64,
    pub binning: BinningConfig,
    pub folds: usize,
    pub gamma: f64,
    pub tamper_threshold: f64,
    pub beta: f64,
    pub algorithms: Vec<Algorithm>,
    pub train: SgdConfig,
    pub gate: GateConfig,
    pub bottleneck: Option<usize>,
    pub fs_report: Option<PathBuf>,
    pub out: PathBuf,
}

impl PipelineConfig {
    pub fn new(mode: Mode, input: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        Self {
            mode,
            input: input.into(),
            label: "label".into(),
            seed: 0,
            binning: BinningConfig::default(),
            folds: DEFAULT_FOLDS,
            gamma: DEFAULT_GAMMA,
            tamper_threshold: DEFAULT_TAMPER_THRESHOLD,
            beta: Criterion::DEFAULT_BETA,
            algorithms: Algorithm::ALL.to_vec(),
            train: SgdConfig::default(),
            gate: GateConfig::default(),
            bottleneck: None,
            fs_report: None,
            out: out.into(),
        }
    }

    /// Comma-separated algorithm names, e.g. `mRMR,MIFS`.
    pub fn parse_algorithms(list: &str) -> Result<Vec<Algorithm>> {
        let mut out = Vec::new();
        for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let alg = name.parse::<Algorithm>().map_err(PipelineError::config)?;
            if !out.contains(&alg) {
                out.push(alg);
            }
        }
        if out.is_empty() {
            return Err(PipelineError::config("no algorithms given"));
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let unit_open = |v: f64| v > 0.0 && v < 1.0;
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(PipelineError::config(format!("gamma must be in [0, 1), got {}", self.gamma)));
        }
        if !(self.tamper_threshold > 0.0 && self.tamper_threshold <= 1.0) {
            return Err(PipelineError::config(format!(
                "tamper threshold must be in (0, 1], got {}",
                self.tamper_threshold
            )));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(PipelineError::config(format!("beta must be finite and >= 0, got {}", self.beta)));
        }
        if self.folds < 2 {
            return Err(PipelineError::config(format!("folds must be >= 2, got {}", self.folds)));
        }
        if self.binning.n_bins < 2 {
            return Err(PipelineError::config(format!("bins must be >= 2, got {}", self.binning.n_bins)));
        }
        if self.train.epochs == 0 || self.train.batch == 0 {
            return Err(PipelineError::config("epochs and batch must be positive"));
        }
        if !unit_open(self.train.learning_rate.min(0.999)) || !unit_open(self.gate.learning_rate.min(0.999)) {
            return Err(PipelineError::config("learning rates must be positive"));
        }
        if self.algorithms.is_empty() {
            return Err(PipelineError::config("no algorithms given"));
        }
        if self.bottleneck == Some(0) {
            return Err(PipelineError::config("bottleneck must be positive"));
        }
        Ok(())
    }

    fn criterion(&self, algorithm: Algorithm) -> Criterion {
        Criterion {
            algorithm,
            beta: self.beta,
        }
    }

    fn fs_report_path(&self) -> PathBuf {
        self.fs_report.clone().unwrap_or_else(|| self.out.join(FS_REPORT))
    }
}

/// Choices the algorithms leave open, recorded with every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub mi_estimator: String,
    pub log_base: u32,
    pub tie_rule: String,
    pub normalization: String,
    pub gate_metrics_split: String,
    pub positive_class: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Self {
            mi_estimator: "plug-in histogram, features discretized per ranking input".into(),
            log_base: 2,
            tie_rule: crate::ranking::TIE_RULE.into(),
            normalization: "per-column min-max fitted on the learn split".into(),
            gate_metrics_split: "test".into(),
            positive_class: "malware (label 1)".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub source: Option<String>,
    pub sha256: Option<String>,
    pub n_samples: usize,
    pub n_features: usize,
}

impl DatasetSummary {
    fn of(ds: &Dataset) -> Self {
        Self {
            source: ds.meta().source.clone(),
            sha256: ds.meta().source_sha256.clone(),
            n_samples: ds.n_samples(),
            n_features: ds.n_features(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub learn: usize,
    pub test: usize,
    pub validation: usize,
    pub seed: u64,
}

impl From<&DataSplit> for SplitSummary {
    fn from(s: &DataSplit) -> Self {
        Self {
            learn: s.learn.len(),
            test: s.test.len(),
            validation: s.validation.len(),
            seed: s.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PostGateResult {
    pub algorithm: Algorithm,
    pub n_features: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub pass: bool,
    pub features: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FsReport {
    pub config: PipelineConfig,
    pub conventions: Conventions,
    pub dataset: DatasetSummary,
    pub split: SplitSummary,
    pub tampering: TamperingAudit,
    /// No criterion passed the audit; the least-fooled one was kept.
    pub tampering_fallback: bool,
    pub suite_after_tampering: Vec<Algorithm>,
    pub traces: Vec<EliminationTrace>,
    pub mdrt: usize,
    pub post_gate: Vec<PostGateResult>,
    /// No criterion met gamma at the common MDRt; the MDRt-setting one was kept.
    pub post_gate_fallback: bool,
    pub suite: Vec<Algorithm>,
    pub selected_by: Algorithm,
    pub optimized_features: Vec<String>,
    pub rankings: Vec<FeatureRanking>,
    pub outputs: Vec<String>,
}

impl FsReport {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| {
            PipelineError::config(format!("cannot read feature-selection report {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text).at(Stage::Load)
    }

    pub fn features_for(&self, algorithm: Algorithm) -> Option<&[String]> {
        self.post_gate
            .iter()
            .find(|p| p.algorithm == algorithm)
            .map(|p| p.features.as_slice())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RrwReport {
    pub config: PipelineConfig,
    pub conventions: Conventions,
    pub dataset: DatasetSummary,
    pub features: Vec<String>,
    pub avg_f1: BTreeMap<Algorithm, f64>,
    pub rankings: Vec<FeatureRanking>,
    pub weights: RrwWeights,
    pub weighting_applied_after: String,
    pub outputs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AeReport {
    pub config: PipelineConfig,
    pub conventions: Conventions,
    pub dataset: DatasetSummary,
    pub split: SplitSummary,
    pub bottleneck: usize,
    pub bottleneck_source: String,
    pub layer_dims: Vec<usize>,
    pub curve: TrainingCurve,
    pub outputs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluateReport {
    pub config: PipelineConfig,
    pub conventions: Conventions,
    pub dataset: DatasetSummary,
    pub split: SplitSummary,
    /// Whether this run min-max scaled the input (skipped for inputs that
    /// are already scaled or reweighted).
    pub normalized_here: bool,
    pub layer_dims: Vec<usize>,
    pub metrics: ClassifierMetrics,
    pub curve: TrainingCurve,
    pub generalization_gap: Option<f64>,
    pub outputs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Report {
    Fs(Box<FsReport>),
    Rrw(Box<RrwReport>),
    Ae(Box<AeReport>),
    Evaluate(Box<EvaluateReport>),
}

/// Runs the configured mode.
pub fn run(config: &PipelineConfig) -> Result<Report> {
    Ok(match config.mode {
        Mode::Fs => Report::Fs(Box::new(run_fs(config)?)),
        Mode::Rrw => Report::Rrw(Box::new(run_rrw(config)?)),
        Mode::Ae => Report::Ae(Box::new(run_ae(config)?)),
        Mode::Evaluate => {
            let ds = load_input(config)?;
            Report::Evaluate(Box::new(run_evaluate(config, &ds)?))
        }
    })
}

fn expect_mode(config: &PipelineConfig, mode: Mode) -> Result<()> {
    config.validate()?;
    if config.mode != mode {
        return Err(PipelineError::config(format!(
            "configuration is for {:?}, not {:?}",
            config.mode, mode
        )));
    }
    Ok(())
}

fn load_input(config: &PipelineConfig) -> Result<Dataset> {
    load_csv(&config.input, &config.label).at(Stage::Load)
}

fn prepare_out(config: &PipelineConfig) -> Result<()> {
    fs::create_dir_all(&config.out).at(Stage::Write)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).at(Stage::Write)?;
    fs::write(path, text + "\n").at(Stage::Write)
}

fn gate_triplet(m: &ClassifierMetrics) -> (f64, f64, f64) {
    (m.accuracy.or_zero(), m.precision.or_zero(), m.recall.or_zero())
}

/// Tampering audit, backward elimination, common-MDRt gate, Optimized dataset.
pub fn run_fs(config: &PipelineConfig) -> Result<FsReport> {
    expect_mode(config, Mode::Fs)?;
    let ds = load_input(config)?;
    if ds.n_features() < 2 {
        return Err(PipelineError::new(Stage::Load, ErrorKind::Data, "feature selection needs at least 2 features"));
    }
    let criteria: Vec<Criterion> = config.algorithms.iter().map(|&a| config.criterion(a)).collect();

    let tampering = tampering_audit(
        &ds,
        &criteria,
        config.folds,
        config.seed,
        config.tamper_threshold,
        &config.binning,
    )
    .at(Stage::Tampering)?;
    let mut suite_after_tampering = tampering.passing();
    let tampering_fallback = suite_after_tampering.is_empty();
    if tampering_fallback {
        // keep the criterion whose worst-placed random feature ranks lowest
        let best = tampering
            .per_algorithm
            .iter()
            .map(|a| {
                let worst = a.random_feature_ranks.values().copied().fold(f64::INFINITY, f64::min);
                (a.algorithm, worst)
            })
            .fold(None::<(Algorithm, f64)>, |acc, (alg, w)| match acc {
                Some((_, bw)) if bw >= w => acc,
                _ => Some((alg, w)),
            })
            .expect("at least one algorithm");
        suite_after_tampering.push(best.0);
    }

    let data_split = split(&ds, config.seed).at(Stage::Elimination)?;
    let traces: Vec<EliminationTrace> = suite_after_tampering
        .par_iter()
        .map(|&a| {
            eliminate(
                &ds,
                config.criterion(a),
                &data_split,
                StopRule::Gate(config.gamma),
                &config.binning,
                &config.gate,
            )
        })
        .collect::<std::result::Result<_, _>>()
        .at(Stage::Elimination)?;
    let mdrt = traces.iter().map(|t| t.mdrt).min().expect("non-empty suite");

    let post_gate: Vec<PostGateResult> = traces
        .par_iter()
        .map(|trace| -> Result<PostGateResult> {
            let features = match trace.features_at(mdrt) {
                Some(f) => f,
                None => eliminate(
                    &ds,
                    config.criterion(trace.algorithm),
                    &data_split,
                    StopRule::Size(mdrt),
                    &config.binning,
                    &config.gate,
                )
                .at(Stage::PostGate)?
                .features_at(mdrt)
                .expect("eliminated down to mdrt"),
            };
            let view = ds.project(&features, "post-gate").at(Stage::PostGate)?;
            let m = gate_evaluate(&view, &data_split.learn, &data_split.test, &config.gate).at(Stage::PostGate)?;
            let (accuracy, precision, recall) = gate_triplet(&m);
            Ok(PostGateResult {
                algorithm: trace.algorithm,
                n_features: mdrt,
                accuracy,
                precision,
                recall,
                pass: accuracy >= config.gamma && precision >= config.gamma && recall >= config.gamma,
                features,
            })
        })
        .collect::<Result<_>>()?;

    let mut suite: Vec<Algorithm> = post_gate.iter().filter(|p| p.pass).map(|p| p.algorithm).collect();
    let post_gate_fallback = suite.is_empty();
    let setters: Vec<Algorithm> = traces.iter().filter(|t| t.mdrt == mdrt).map(|t| t.algorithm).collect();
    if post_gate_fallback {
        suite = setters.clone();
    }
    let selected_by = suite
        .iter()
        .copied()
        .find(|a| setters.contains(a))
        .unwrap_or(suite[0]);
    let optimized_features = post_gate
        .iter()
        .find(|p| p.algorithm == selected_by)
        .map(|p| p.features.clone())
        .expect("selected algorithm has a post-gate entry");

    let learn = ds.select_rows(&data_split.learn);
    let rankings = suite
        .par_iter()
        .map(|&a| rank(&learn, config.criterion(a), &config.binning))
        .collect::<std::result::Result<Vec<_>, _>>()
        .at(Stage::PostGate)?;

    prepare_out(config)?;
    let mut outputs = vec![FS_REPORT.to_string(), OPTIMIZED_CSV.to_string()];
    let optimized = ds
        .project(&optimized_features, &format!("optimized by {selected_by} at mdrt {mdrt}"))
        .at(Stage::Write)?;
    optimized.write_csv(config.out.join(OPTIMIZED_CSV)).at(Stage::Write)?;
    for trace in &traces {
        let stem = format!("trace_{}", trace.algorithm.name().to_lowercase());
        write_json(&config.out.join(format!("{stem}.json")), trace)?;
        fs::write(config.out.join(format!("{stem}.csv")), trace.to_csv()).at(Stage::Write)?;
        outputs.push(format!("{stem}.json"));
        outputs.push(format!("{stem}.csv"));
    }

    let report = FsReport {
        config: config.clone(),
        conventions: Conventions::default(),
        dataset: DatasetSummary::of(&ds),
        split: SplitSummary::from(&data_split),
        tampering,
        tampering_fallback,
        suite_after_tampering,
        traces,
        mdrt,
        post_gate,
        post_gate_fallback,
        suite,
        selected_by,
        optimized_features,
        rankings,
        outputs,
    };
    write_json(&config.out.join(FS_REPORT), &report)?;
    Ok(report)
}

/// RRw weights over the Optimized features and the reweighted dataset.
/// Requires a feature-selection report for the same input.
pub fn run_rrw(config: &PipelineConfig) -> Result<RrwReport> {
    expect_mode(config, Mode::Rrw)?;
    let fs_path = config.fs_report_path();
    if !fs_path.exists() {
        return Err(PipelineError::config(format!(
            "rrw needs a feature-selection report; run `fs` first or pass --fs-report (looked for {})",
            fs_path.display()
        )));
    }
    let fs_report = FsReport::load(&fs_path)?;
    let ds = load_input(config)?;
    if fs_report.dataset.sha256 != ds.meta().source_sha256 {
        return Err(PipelineError::config(
            "feature-selection report was produced from a different input file",
        ));
    }

    let data_split = split(&ds, config.seed).at(Stage::Weights)?;
    let features = fs_report.optimized_features.clone();
    let optimized = ds.project(&features, "optimized feature selection").at(Stage::Weights)?;
    let learn = optimized.select_rows(&data_split.learn);

    let per_algorithm = fs_report
        .suite
        .par_iter()
        .map(|&a| -> Result<(FeatureRanking, f64)> {
            let own = fs_report.features_for(a).unwrap_or(&features).to_vec();
            let own_ds = ds.project(&own, "mdrt features").at(Stage::Weights)?;
            let f1 = avg_f1_cv(&own_ds, config.folds, config.seed, &config.gate).at(Stage::Weights)?;
            let ranking = rank(&learn, config.criterion(a), &config.binning).at(Stage::Weights)?;
            Ok((ranking, f1))
        })
        .collect::<Result<Vec<_>>>()?;
    let weights = rrw_scores(&per_algorithm).at(Stage::Weights)?;

    let scaled = MinMaxScaler::fit_rows(&optimized, &data_split.learn)
        .transform(&optimized)
        .at(Stage::Weights)?;
    let weighted = apply_weights(&scaled, &weights).at(Stage::Weights)?;

    prepare_out(config)?;
    weighted.write_csv(config.out.join(RRW_CSV)).at(Stage::Write)?;
    write_json(&config.out.join(RRW_WEIGHTS), &weights)?;
    let report = RrwReport {
        config: config.clone(),
        conventions: Conventions::default(),
        dataset: DatasetSummary::of(&ds),
        features,
        avg_f1: per_algorithm.iter().map(|(r, f)| (r.algorithm, *f)).collect(),
        rankings: per_algorithm.into_iter().map(|(r, _)| r).collect(),
        weights,
        weighting_applied_after: "min-max normalization".into(),
        outputs: vec![RRW_REPORT.into(), RRW_CSV.into(), RRW_WEIGHTS.into()],
    };
    write_json(&config.out.join(RRW_REPORT), &report)?;
    Ok(report)
}

/// Autoencoder reduction to an MDRt-wide latent dataset.
pub fn run_ae(config: &PipelineConfig) -> Result<AeReport> {
    expect_mode(config, Mode::Ae)?;
    let (bottleneck, bottleneck_source) = match config.bottleneck {
        Some(b) => (b, "configuration".to_string()),
        None => {
            let path = config.fs_report_path();
            if !path.exists() {
                return Err(PipelineError::config(format!(
                    "no --bottleneck given and no feature-selection report at {}",
                    path.display()
                )));
            }
            (FsReport::load(&path)?.mdrt, format!("mdrt from {}", path.display()))
        }
    };
    let ds = load_input(config)?;
    let data_split = split(&ds, config.seed).at(Stage::Autoencoder)?;
    let scaled = MinMaxScaler::fit_rows(&ds, &data_split.learn)
        .transform(&ds)
        .at(Stage::Autoencoder)?;
    let mut model = ae_new(ds.n_features(), bottleneck, config.seed).at(Stage::Autoencoder)?;
    let curve = ae_train(
        &mut model,
        &scaled.select_rows(&data_split.learn),
        &scaled.select_rows(&data_split.validation),
        &config.train,
    )
    .at(Stage::Autoencoder)?;
    let encoded = ae_encode(&model, &scaled).at(Stage::Autoencoder)?;

    prepare_out(config)?;
    encoded.write_csv(config.out.join(AE_CSV)).at(Stage::Write)?;
    curve.write_csv(config.out.join(AE_CURVE)).at(Stage::Autoencoder)?;
    model.save(config.out.join(AE_MODEL)).at(Stage::Write)?;
    let report = AeReport {
        config: config.clone(),
        conventions: Conventions::default(),
        dataset: DatasetSummary::of(&ds),
        split: SplitSummary::from(&data_split),
        bottleneck,
        bottleneck_source,
        layer_dims: model.layer_dims.clone(),
        curve,
        outputs: vec![AE_REPORT.into(), AE_CSV.into(), AE_CURVE.into(), AE_MODEL.into()],
    };
    write_json(&config.out.join(AE_REPORT), &report)?;
    Ok(report)
}

/// Trains the `[f, 2f, 2f, 1]` detector on the learn split (validation split
/// for the VLC) and scores it on the test split.
pub fn run_evaluate(config: &PipelineConfig, dataset: &Dataset) -> Result<EvaluateReport> {
    expect_mode(config, Mode::Evaluate)?;
    let data_split = split(dataset, config.seed).at(Stage::Evaluate)?;
    let normalized_here = !dataset.is_scaled();
    let prepared = if normalized_here {
        MinMaxScaler::fit_rows(dataset, &data_split.learn)
            .transform(dataset)
            .at(Stage::Evaluate)?
    } else {
        dataset.clone()
    };
    let mut model = mlp_new(prepared.n_features().max(1), config.seed);
    let curve = mlp_train(
        &mut model,
        &prepared.select_rows(&data_split.learn),
        &prepared.select_rows(&data_split.validation),
        &config.train,
    )
    .at(Stage::Evaluate)?;
    let test = prepared.select_rows(&data_split.test);
    let predictions = classify(&mlp_predict(&model, &test).at(Stage::Evaluate)?);
    let metrics = compute_metrics(&predictions, test.labels())
        .map_err(|e| PipelineError::new(Stage::Evaluate, ErrorKind::Data, e))?;
    let generalization_gap = curve.epochs.last().map(|e| e.val_loss - e.train_loss);

    prepare_out(config)?;
    curve.write_csv(config.out.join(MLP_CURVE)).at(Stage::Evaluate)?;
    model.save(config.out.join(MLP_MODEL)).at(Stage::Write)?;
    let report = EvaluateReport {
        config: config.clone(),
        conventions: Conventions::default(),
        dataset: DatasetSummary::of(dataset),
        split: SplitSummary::from(&data_split),
        normalized_here,
        layer_dims: model.layer_dims.clone(),
        metrics,
        curve,
        generalization_gap,
        outputs: vec![EVALUATE_REPORT.into(), MLP_CURVE.into(), MLP_MODEL.into()],
    };
    write_json(&config.out.join(EVALUATE_REPORT), &report)?;
    Ok(report)
}
