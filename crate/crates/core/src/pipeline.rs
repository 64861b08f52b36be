//! Experiment configuration, model files, the VQC+QSVM ensemble, and the
//! end-to-end run: ingest → split → preprocess → train → predict → evaluate.
//!
//! Model files are JSON envelopes:
//!
//! ```json
//! { "format_version": "1", "model_type": "vqc", "model": { ... } }
//! ```

use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::encoding::{Entanglement, FeatureMapSpec};
use crate::error::{Error, Result};
use crate::evalstats::{evaluate, EvaluationReport, MIN_BOOTSTRAP_ITERATIONS};
use crate::explain::ProbabilisticClassifier;
use crate::preprocess::{fit_preprocess_capped, load_csv, split_indices, Dataset, PreprocessConfig, PreprocessModel};
use crate::qkernel::{kernel_matrix, signed_labels, train_qsvm, SmoConfig, SmoStatus, SvmModel};
use crate::vqc::{train_vqc, Encoding, Prediction, TrainConfig, VqcArch, VqcModel};

pub const FORMAT_VERSION: &str = "1";

pub const MODEL_FILE: &str = "model.json";
pub const PREPROCESS_FILE: &str = "preprocess.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";
const LOCK_FILE: &str = ".qmalware.lock";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Vqc,
    Qsvm,
    Ensemble,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Vqc => "vqc",
            ModelKind::Qsvm => "qsvm",
            ModelKind::Ensemble => "ensemble",
        }
    }

    fn uses_vqc(self) -> bool {
        matches!(self, ModelKind::Vqc | ModelKind::Ensemble)
    }

    fn uses_qsvm(self) -> bool {
        matches!(self, ModelKind::Qsvm | ModelKind::Ensemble)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingKind {
    Angle,
    Amplitude,
}

/// Circuit shape shared by the VQC and the QSVM feature map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CircuitConfig {
    pub n_qubits: usize,
    pub n_layers: usize,
    /// Feature-map repetitions (angle encoding only).
    pub repetitions: usize,
    pub encoding: EncodingKind,
    pub entanglement: Entanglement,
}

impl Default for CircuitConfig {
    fn default() -> Self {
        CircuitConfig {
            n_qubits: 8,
            n_layers: 4,
            repetitions: 2,
            encoding: EncodingKind::Angle,
            entanglement: Entanglement::Ring,
        }
    }
}

impl CircuitConfig {
    pub fn feature_map(&self) -> FeatureMapSpec {
        FeatureMapSpec::new(self.n_qubits)
            .with_repetitions(self.repetitions)
            .with_entanglement(self.entanglement)
    }

    pub fn vqc_arch(&self) -> VqcArch {
        VqcArch {
            n_qubits: self.n_qubits,
            n_layers: self.n_layers,
            encoding: match self.encoding {
                EncodingKind::Angle => Encoding::Angle(self.feature_map()),
                EncodingKind::Amplitude => Encoding::Amplitude,
            },
            entanglement: self.entanglement,
        }
    }

    /// Feature count the circuit accepts.
    pub fn max_features(&self) -> usize {
        self.vqc_arch().encoding.max_features(self.n_qubits.min(crate::statevector::MAX_QUBITS))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub bootstrap_iterations: usize,
    pub test_fraction: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            bootstrap_iterations: 1000,
            test_fraction: 0.2,
        }
    }
}

/// Everything one experiment needs. The top-level `seed` drives the split,
/// parameter initialization, minibatch order and bootstrap; it overrides
/// `training.seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub label_column: String,
    pub positive_label: String,
    pub model: ModelKind,
    pub preprocess: PreprocessConfig,
    pub circuit: CircuitConfig,
    pub training: TrainConfig,
    pub smo: SmoConfig,
    /// Soft-voting weights for (VQC, QSVM).
    pub ensemble_weights: [f64; 2],
    pub evaluation: EvaluationConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 42,
            label_column: "Class".into(),
            positive_label: "Malware".into(),
            model: ModelKind::Vqc,
            preprocess: PreprocessConfig::default(),
            circuit: CircuitConfig::default(),
            training: TrainConfig::default(),
            smo: SmoConfig::default(),
            ensemble_weights: [0.5, 0.5],
            evaluation: EvaluationConfig::default(),
        }
    }
}

fn as_config(e: Error) -> Error {
    match e {
        e @ (Error::Config(_) | Error::CapExceeded { .. }) => e,
        other => Error::Config(other.to_string()),
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every field combination before any data is touched.
    pub fn validate(&self) -> Result<()> {
        if self.label_column.is_empty() {
            return Err(Error::Config("label_column must not be empty".into()));
        }
        self.preprocess.validate()?;
        self.training.validate().map_err(as_config)?;
        if self.model.uses_vqc() {
            self.circuit.vqc_arch().validate().map_err(as_config)?;
        }
        if self.model.uses_qsvm() {
            if self.circuit.encoding != EncodingKind::Angle {
                return Err(Error::Config(format!(
                    "model `{}` needs angle encoding for the kernel feature map",
                    self.model.name()
                )));
            }
            self.circuit.feature_map().validate().map_err(as_config)?;
            self.smo.validate().map_err(as_config)?;
        }
        if let Some(k) = self.preprocess.pca_components {
            let max = self.circuit.max_features();
            if k > max {
                return Err(Error::Config(format!(
                    "pca_components {k} exceeds the {max} features the circuit accepts"
                )));
            }
        }
        if self.model == ModelKind::Ensemble {
            normalized_weights(&self.ensemble_weights).map_err(as_config)?;
        }
        if self.evaluation.bootstrap_iterations < MIN_BOOTSTRAP_ITERATIONS {
            return Err(Error::Config(format!(
                "bootstrap_iterations must be at least {MIN_BOOTSTRAP_ITERATIONS}"
            )));
        }
        let f = self.evaluation.test_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::Config(format!("test_fraction {f} must lie in (0, 1)")));
        }
        Ok(())
    }

    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.training.clone()
        }
    }
}

fn normalized_weights(weights: &[f64]) -> Result<Vec<f64>> {
    if weights.is_empty() {
        return Err(Error::invalid("an ensemble needs at least one member"));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid(format!("ensemble weights {weights:?} must be finite and non-negative")));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("ensemble weights sum to zero"));
    }
    Ok(weights.iter().map(|w| w / total).collect())
}

/// A member of an ensemble; QSVM members contribute their logistic-squashed
/// decision value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model_type", rename_all = "lowercase")]
pub enum MemberModel {
    Vqc(VqcModel),
    Qsvm(SvmModel),
}

impl MemberModel {
    fn probability(&self, x: &[f64]) -> Result<f64> {
        match self {
            MemberModel::Vqc(m) => m.probability(x),
            MemberModel::Qsvm(m) => m.probability(x),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            MemberModel::Vqc(m) => m.validate(),
            MemberModel::Qsvm(m) => m.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub weight: f64,
    pub model: MemberModel,
}

/// Soft-voting ensemble with weights normalized to sum to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub members: Vec<EnsembleMember>,
}

impl EnsembleModel {
    pub fn new(members: Vec<(MemberModel, f64)>) -> Result<Self> {
        let weights: Vec<f64> = members.iter().map(|(_, w)| *w).collect();
        let weights = normalized_weights(&weights)?;
        let ens = EnsembleModel {
            members: members
                .into_iter()
                .zip(weights)
                .map(|((model, _), weight)| EnsembleMember { weight, model })
                .collect(),
        };
        ens.validate()?;
        Ok(ens)
    }

    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::invalid("an ensemble needs at least one member"));
        }
        let total: f64 = self.members.iter().map(|m| m.weight).sum();
        if self.members.iter().any(|m| !(m.weight >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("ensemble weights must be non-negative and sum to 1, got {total}")));
        }
        self.members.iter().try_for_each(|m| m.model.validate())
    }

    /// `Σ wᵢ pᵢ(x)`. Every member is evaluated so a dimension mismatch in a
    /// zero-weight member still surfaces.
    pub fn probability(&self, x: &[f64]) -> Result<f64> {
        let votes = self
            .members
            .iter()
            .map(|m| Ok((m.weight, m.model.probability(x)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(soft_vote(&votes))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        Ok(Prediction::from_probability(self.probability(x)?))
    }
}

impl ProbabilisticClassifier for EnsembleModel {
    fn probability(&self, x: &[f64]) -> Result<f64> {
        EnsembleModel::probability(self, x)
    }
}

fn soft_vote(votes: &[(f64, f64)]) -> f64 {
    votes.iter().map(|(w, p)| w * p).sum::<f64>().clamp(0.0, 1.0)
}

/// Any trained classifier.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Vqc(VqcModel),
    Qsvm(SvmModel),
    Ensemble(EnsembleModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Vqc(_) => ModelKind::Vqc,
            Model::Qsvm(_) => ModelKind::Qsvm,
            Model::Ensemble(_) => ModelKind::Ensemble,
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        Ok(Prediction::from_probability(self.probability(x)?))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        match self {
            Model::Vqc(m) => save_model(m, path),
            Model::Qsvm(m) => save_model(m, path),
            Model::Ensemble(m) => save_model(m, path),
        }
    }

    /// Loads whichever classifier type the file declares.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (text, header) = read_envelope(path)?;
        match header.model_type.as_str() {
            "vqc" => decode_envelope(&text).map(Model::Vqc),
            "qsvm" => decode_envelope(&text).map(Model::Qsvm),
            "ensemble" => decode_envelope(&text).map(Model::Ensemble),
            other => Err(Error::ModelType {
                expected: "vqc, qsvm or ensemble".into(),
                found: other.into(),
            }),
        }
    }
}

impl ProbabilisticClassifier for Model {
    fn probability(&self, x: &[f64]) -> Result<f64> {
        match self {
            Model::Vqc(m) => m.probability(x),
            Model::Qsvm(m) => m.probability(x),
            Model::Ensemble(m) => m.probability(x),
        }
    }
}

/// Types that can be written as a model file.
pub trait ModelFile: Serialize + DeserializeOwned {
    const MODEL_TYPE: &'static str;

    fn check(&self) -> Result<()> {
        Ok(())
    }
}

impl ModelFile for VqcModel {
    const MODEL_TYPE: &'static str = "vqc";

    fn check(&self) -> Result<()> {
        self.validate()
    }
}

impl ModelFile for SvmModel {
    const MODEL_TYPE: &'static str = "qsvm";

    fn check(&self) -> Result<()> {
        self.validate()
    }
}

impl ModelFile for EnsembleModel {
    const MODEL_TYPE: &'static str = "ensemble";

    fn check(&self) -> Result<()> {
        self.validate()
    }
}

impl ModelFile for PreprocessModel {
    const MODEL_TYPE: &'static str = "preprocess";
}

#[derive(Serialize)]
struct EnvelopeOut<'a, M> {
    format_version: &'a str,
    model_type: &'a str,
    model: &'a M,
}

#[derive(Deserialize)]
struct EnvelopeIn<M> {
    model: M,
}

#[derive(Deserialize)]
struct Header {
    format_version: Option<serde_json::Value>,
    model_type: Option<String>,
}

pub fn save_model<M: ModelFile>(model: &M, path: impl AsRef<Path>) -> Result<()> {
    let env = EnvelopeOut {
        format_version: FORMAT_VERSION,
        model_type: M::MODEL_TYPE,
        model,
    };
    let mut text = serde_json::to_string_pretty(&env).expect("model serializes");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn load_model<M: ModelFile>(path: impl AsRef<Path>) -> Result<M> {
    let (text, header) = read_envelope(path.as_ref())?;
    if header.model_type != M::MODEL_TYPE {
        return Err(Error::ModelType {
            expected: M::MODEL_TYPE.into(),
            found: header.model_type,
        });
    }
    decode_envelope(&text)
}

struct CheckedHeader {
    model_type: String,
}

fn read_envelope(path: &Path) -> Result<(String, CheckedHeader)> {
    let text = fs::read_to_string(path)?;
    let header: Header = serde_json::from_str(&text).map_err(|e| parse_error(&text, &e))?;
    let version = match header.format_version {
        Some(serde_json::Value::String(s)) => s,
        Some(other) => other.to_string(),
        None => "<missing>".into(),
    };
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: FORMAT_VERSION.into(),
        });
    }
    let model_type = header.model_type.ok_or_else(|| Error::Parse {
        offset: 0,
        message: "missing `model_type` field".into(),
    })?;
    Ok((text, CheckedHeader { model_type }))
}

fn decode_envelope<M: ModelFile>(text: &str) -> Result<M> {
    let env: EnvelopeIn<M> = serde_json::from_str(text).map_err(|e| parse_error(text, &e))?;
    env.model.check()?;
    Ok(env.model)
}

/// Converts serde_json's 1-based line/column into a byte offset.
fn parse_error(text: &str, e: &serde_json::Error) -> Error {
    let line_start: usize = text
        .split_inclusive('\n')
        .take(e.line().saturating_sub(1))
        .map(str::len)
        .sum();
    Error::Parse {
        offset: (line_start + e.column().saturating_sub(1)).min(text.len()),
        message: e.to_string(),
    }
}

/// Summary of how the model was fitted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vqc_loss_history: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qsvm: Option<QsvmSummary>,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QsvmSummary {
    pub status: SmoStatus,
    pub iterations: usize,
    pub n_support: usize,
    pub final_objective: Option<f64>,
}

fn fit_vqc(data: &Dataset, cfg: &PipelineConfig) -> Result<(VqcModel, Vec<f64>)> {
    let out = train_vqc(data, cfg.circuit.vqc_arch(), &cfg.train_config())?;
    Ok((out.model, out.loss_history))
}

fn fit_qsvm(data: &Dataset, cfg: &PipelineConfig) -> Result<(SvmModel, QsvmSummary)> {
    let spec = cfg.circuit.feature_map();
    let rows = data.features();
    let k = kernel_matrix(rows, &spec)?;
    let (model, outcome) = train_qsvm(&k, rows, &signed_labels(data.labels()), spec, &cfg.smo)?;
    let summary = QsvmSummary {
        status: outcome.status,
        iterations: outcome.iterations,
        n_support: model.support_indices.len(),
        final_objective: outcome.objective_history.last().copied(),
    };
    Ok((model, summary))
}

/// Trains the configured model kind on already-preprocessed data.
pub fn train_model(data: &Dataset, cfg: &PipelineConfig) -> Result<(Model, TrainingSummary)> {
    cfg.validate()?;
    if !data.has_both_classes() {
        return Err(Error::invalid("training data must contain both classes"));
    }
    let (model, loss, qsvm) = match cfg.model {
        ModelKind::Vqc => {
            let (m, loss) = fit_vqc(data, cfg)?;
            (Model::Vqc(m), Some(loss), None)
        }
        ModelKind::Qsvm => {
            let (m, s) = fit_qsvm(data, cfg)?;
            (Model::Qsvm(m), None, Some(s))
        }
        ModelKind::Ensemble => {
            let (v, loss) = fit_vqc(data, cfg)?;
            let (q, s) = fit_qsvm(data, cfg)?;
            let ens = EnsembleModel::new(vec![
                (MemberModel::Vqc(v), cfg.ensemble_weights[0]),
                (MemberModel::Qsvm(q), cfg.ensemble_weights[1]),
            ])?;
            (Model::Ensemble(ens), Some(loss), Some(s))
        }
    };
    let preds = predict_rows(&model, data.features())?;
    let correct = preds.iter().zip(data.labels()).filter(|(p, y)| p.label == **y).count();
    let summary = TrainingSummary {
        vqc_loss_history: loss,
        qsvm,
        train_accuracy: correct as f64 / data.len() as f64,
    };
    Ok((model, summary))
}

pub fn predict_rows(model: &(impl ProbabilisticClassifier + ?Sized), rows: &[Vec<f64>]) -> Result<Vec<Prediction>> {
    rows.par_iter()
        .map(|x| model.probability(x).map(Prediction::from_probability))
        .collect()
}

/// One row of a predictions file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sample_index: usize,
    pub probability: f64,
    pub label: u8,
}

pub fn write_predictions(path: impl AsRef<Path>, records: &[PredictionRecord]) -> Result<()> {
    let mut out = String::from("sample_index,probability,label\n");
    for r in records {
        writeln!(out, "{},{},{}", r.sample_index, r.probability, r.label).expect("write to String");
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionRecord>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| ingest_error(path, "header", e))?;
    let mut out = Vec::new();
    for (i, rec) in reader.deserialize::<PredictionRecord>().enumerate() {
        let rec = rec.map_err(|e| ingest_error(path, &format!("row {}", i + 1), e))?;
        if rec.label > 1 {
            return Err(Error::Ingest {
                path: path.into(),
                location: format!("row {}", i + 1),
                message: format!("label {} is not 0 or 1", rec.label),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

fn ingest_error(path: &Path, location: &str, e: csv::Error) -> Error {
    Error::Ingest {
        path: path.into(),
        location: location.into(),
        message: e.to_string(),
    }
}

/// Holds the per-directory lock for the lifetime of a run.
struct RunLock(PathBuf);

impl RunLock {
    fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(RunLock(path)),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => Err(Error::Config(format!(
                "{} exists: another experiment is writing to this directory (delete the file if it is stale)",
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub model_type: ModelKind,
    pub seed: u64,
    pub n_rows: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub outliers_removed: usize,
    pub pruned_columns: Vec<String>,
    pub n_components: usize,
    pub training: TrainingSummary,
    pub evaluation: EvaluationReport,
    pub config: PipelineConfig,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "model: {}  seed: {}", self.model_type.name(), self.seed).unwrap();
        writeln!(
            s,
            "rows: {} (train {}, test {}), outliers removed: {}, pruned columns: {}, components: {}",
            self.n_rows,
            self.n_train,
            self.n_test,
            self.outliers_removed,
            self.pruned_columns.len(),
            self.n_components
        )
        .unwrap();
        writeln!(s, "training accuracy: {:.4}", self.training.train_accuracy).unwrap();
        if let Some(q) = &self.training.qsvm {
            writeln!(s, "smo: {:?} after {} iterations, {} support vectors", q.status, q.iterations, q.n_support).unwrap();
        }
        s.push('\n');
        s.push_str(&self.evaluation.to_table());
        s
    }
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

/// Default PCA width: as many components as the circuit accepts.
pub fn fit_pipeline_preprocess(data: &Dataset, cfg: &PipelineConfig) -> Result<crate::preprocess::FittedPreprocess> {
    fit_preprocess_capped(data, &cfg.preprocess, cfg.circuit.max_features())
}

/// Runs a full experiment and writes `model.json`, `preprocess.json`,
/// `predictions.csv`, `report.json` and `report.txt` into `out_dir`.
/// Preprocessing is fitted on the training split only.
pub fn run_experiment(cfg: &PipelineConfig, data_path: impl AsRef<Path>, out_dir: impl AsRef<Path>) -> Result<ExperimentReport> {
    stage("config", cfg.validate())?;
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir)?;
    let _lock = RunLock::acquire(out_dir)?;

    let data = stage("ingest", load_csv(data_path, &cfg.label_column, &cfg.positive_label))?;
    let (train_idx, test_idx) = stage(
        "split",
        split_indices(data.labels(), cfg.evaluation.test_fraction, cfg.seed),
    )?;
    let train_raw = data.select_rows(&train_idx);
    let test_raw = data.select_rows(&test_idx);

    let fitted = stage("preprocess", fit_pipeline_preprocess(&train_raw, cfg))?;
    let test = stage("preprocess", fitted.model.transform(&test_raw))?;

    let (model, training) = stage("train", train_model(&fitted.data, cfg))?;
    let preds = stage("predict", predict_rows(&model, test.features()))?;

    let pred_labels: Vec<u8> = preds.iter().map(|p| p.label).collect();
    let evaluation = stage(
        "evaluate",
        evaluate(&pred_labels, test.labels(), None, cfg.evaluation.bootstrap_iterations, cfg.seed),
    )?;

    let report = ExperimentReport {
        model_type: cfg.model,
        seed: cfg.seed,
        n_rows: data.len(),
        n_train: train_idx.len(),
        n_test: test_idx.len(),
        outliers_removed: fitted.removed_rows.len(),
        pruned_columns: fitted.pruned_columns.clone(),
        n_components: fitted.model.output_dim(),
        training,
        evaluation,
        config: cfg.clone(),
    };

    let records: Vec<PredictionRecord> = test_idx
        .iter()
        .zip(&preds)
        .map(|(&i, p)| PredictionRecord {
            sample_index: i,
            probability: p.probability_malicious,
            label: p.label,
        })
        .collect();
    stage("write", model.save(out_dir.join(MODEL_FILE)))?;
    stage("write", save_model(&fitted.model, out_dir.join(PREPROCESS_FILE)))?;
    stage("write", write_predictions(out_dir.join(PREDICTIONS_FILE), &records))?;
    stage("write", fs::write(out_dir.join(REPORT_JSON), report.to_json()).map_err(Error::from))?;
    stage("write", fs::write(out_dir.join(REPORT_TXT), report.to_text()).map_err(Error::from))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qkernel::SmoConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vqc(seed: u64) -> VqcModel {
        VqcModel::random(VqcArch::angle(2, 1), seed).unwrap()
    }

    fn svm() -> SvmModel {
        SvmModel {
            dual_coeffs: vec![0.8, -0.8],
            bias: 0.1,
            support_indices: vec![0, 1],
            support_vectors: vec![vec![0.2, 0.4], vec![-0.5, 1.0]],
            feature_map: FeatureMapSpec::new(2),
            smo: SmoConfig::default(),
            status: SmoStatus::Converged,
        }
    }

    #[test]
    fn ensemble_examples() {
        let x = [0.3, -0.7];
        let single = EnsembleModel::new(vec![(MemberModel::Vqc(vqc(1)), 3.0)]).unwrap();
        assert_eq!(single.members[0].weight, 1.0);
        assert_eq!(single.predict(&x).unwrap(), vqc(1).forward(&x).unwrap());

        let zero = EnsembleModel::new(vec![(MemberModel::Vqc(vqc(1)), 1.0), (MemberModel::Qsvm(svm()), 0.0)]).unwrap();
        assert!((zero.probability(&x).unwrap() - vqc(1).probability(&x).unwrap()).abs() < 1e-12);

        assert!(EnsembleModel::new(vec![]).is_err());
        assert!(EnsembleModel::new(vec![(MemberModel::Vqc(vqc(1)), -1.0)]).is_err());
        assert!(zero.probability(&[0.1, 0.2, 0.3]).is_err());
    }

    #[test]
    fn ensemble_tie_goes_malicious() {
        let p = soft_vote(&[(0.5, 0.2), (0.5, 0.8)]);
        assert_eq!(p, 0.5);
        assert_eq!(Prediction::from_probability(p).label, 1);
    }

    #[test]
    fn ensemble_is_convex() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for s in 0..20 {
            let w: f64 = rng.gen_range(0.0..1.0);
            let ens = EnsembleModel::new(vec![(MemberModel::Vqc(vqc(s)), w), (MemberModel::Qsvm(svm()), 1.0 - w)]).unwrap();
            let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let p1 = vqc(s).probability(&x).unwrap();
            let p2 = svm().probability(&x).unwrap();
            let p = ens.probability(&x).unwrap();
            assert!(p >= p1.min(p2) - 1e-12 && p <= p1.max(p2) + 1e-12);
        }
    }

    #[test]
    fn model_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m = vqc(5);
        save_model(&m, &path).unwrap();
        let back: VqcModel = load_model(&path).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let x = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            assert_eq!(m.probability(&x).unwrap().to_bits(), back.probability(&x).unwrap().to_bits());
        }
        assert!(matches!(Model::load(&path).unwrap(), Model::Vqc(_)));

        let qpath = dir.path().join("q.json");
        save_model(&svm(), &qpath).unwrap();
        assert!(matches!(load_model::<VqcModel>(&qpath), Err(Error::ModelType { .. })));

        let text = fs::read_to_string(&path).unwrap().replace("\"format_version\": \"1\"", "\"format_version\": \"99\"");
        fs::write(&path, &text).unwrap();
        assert!(matches!(load_model::<VqcModel>(&path), Err(Error::Version { .. })));
    }

    #[test]
    fn truncated_file_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_model(&vqc(5), &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let cut = text.len() / 2;
        fs::write(&path, &text[..cut]).unwrap();
        match load_model::<VqcModel>(&path) {
            Err(Error::Parse { offset, .. }) => assert!(offset <= cut && offset > 0),
            other => panic!("expected a parse error, got {other:?}"),
        }
        let bad = "{\n  \"format_version\": \"1\",\n  \"model_type\": \"vqc\",\n  \"model\": x\n}";
        fs::write(&path, bad).unwrap();
        match load_model::<VqcModel>(&path) {
            Err(Error::Parse { offset, .. }) => assert_eq!(&bad[offset..offset + 1], "x"),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        let json = cfg.to_json();
        assert_eq!(PipelineConfig::from_json(&json).unwrap(), cfg);
        assert_eq!(PipelineConfig::from_json("{}").unwrap(), cfg);

        let mut deep = cfg.clone();
        deep.circuit.n_layers = 10;
        deep.circuit.repetitions = 3;
        assert!(matches!(deep.validate(), Err(Error::Config(_))));

        let mut wide = cfg.clone();
        wide.circuit.n_qubits = 21;
        assert_eq!(wide.validate().unwrap_err().exit_code(), 1);

        let mut bad = cfg.clone();
        bad.evaluation.bootstrap_iterations = 10;
        assert!(bad.validate().is_err());

        let mut amp = cfg.clone();
        amp.model = ModelKind::Qsvm;
        amp.circuit.encoding = EncodingKind::Amplitude;
        assert!(amp.validate().is_err());

        let mut k = cfg.clone();
        k.preprocess.pca_components = Some(9);
        assert!(k.validate().is_err());

        let mut ens = cfg;
        ens.model = ModelKind::Ensemble;
        ens.ensemble_weights = [0.0, 0.0];
        assert!(ens.validate().is_err());

        assert!(matches!(PipelineConfig::from_json("{\"sed\": 1}"), Err(Error::Config(_))));
    }

    #[test]
    fn predictions_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let recs = vec![
            PredictionRecord { sample_index: 4, probability: 0.123456789012345, label: 0 },
            PredictionRecord { sample_index: 9, probability: 0.5, label: 1 },
        ];
        write_predictions(&path, &recs).unwrap();
        assert_eq!(read_predictions(&path).unwrap(), recs);
    }

    #[test]
    fn lock_blocks_second_writer() {
        let dir = tempfile::tempdir().unwrap();
        let lock = RunLock::acquire(dir.path()).unwrap();
        assert!(matches!(RunLock::acquire(dir.path()), Err(Error::Config(_))));
        drop(lock);
        assert!(RunLock::acquire(dir.path()).is_ok());
    }
}
