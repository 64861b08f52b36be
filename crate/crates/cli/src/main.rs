//! `qmalware`: preprocess, train, predict, explain, evaluate and run
//! hybrid quantum-classical malware classifiers from the command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numerical error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qmalware_core::evalstats::evaluate;
use qmalware_core::explain::{grad_attribution, score_attribution, summary, write_report_csv};
use qmalware_core::pipeline::{
    fit_pipeline_preprocess, load_model, predict_rows, read_predictions, run_experiment, save_model, train_model,
    write_predictions, Model, ModelKind, PipelineConfig, PredictionRecord, MODEL_FILE, PREDICTIONS_FILE,
    PREPROCESS_FILE,
};
use qmalware_core::preprocess::{load_csv, load_unlabeled_csv, write_csv, PreprocessModel};
use qmalware_core::qkernel::kernel_matrix;
use qmalware_core::{Error, Result};

/// Label value written to processed CSVs for the malicious class.
const PROCESSED_POSITIVE: &str = "1";

#[derive(Parser)]
#[command(name = "qmalware", version, about = "Hybrid quantum-classical malware classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON pipeline configuration; defaults apply to omitted fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configuration seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for output artifacts.
    #[arg(long, default_value = "qmalware-out")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the preprocessing chain on a raw labelled CSV.
    Preprocess {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// Train a classifier on a processed CSV (0/1 labels).
    Train {
        kind: Kind,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// Score every row of a CSV.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Preprocessing model to apply to raw rows first.
        #[arg(long)]
        preprocess: Option<PathBuf>,
    },
    /// Attribute one prediction to its input features.
    Explain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        preprocess: Option<PathBuf>,
        /// Zero-based data row to explain.
        #[arg(long, default_value_t = 0)]
        row: usize,
        #[arg(long, value_enum, default_value_t = Method::Grad)]
        method: Method,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
    },
    /// Metrics and bootstrap statistics for a predictions file.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        predictions: PathBuf,
        /// Labelled CSV the predictions' sample indices refer to.
        #[arg(long)]
        data: PathBuf,
        /// Second predictions file for a paired comparison.
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Label value counted as malicious (defaults to the config's).
        #[arg(long)]
        positive_label: Option<String>,
    },
    /// Export the quantum kernel Gram matrix of a processed CSV.
    Kernel {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// Full experiment: split, preprocess, train, predict, evaluate.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Vqc,
    Qsvm,
    Ensemble,
}

impl From<Kind> for ModelKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Vqc => ModelKind::Vqc,
            Kind::Qsvm => ModelKind::Qsvm,
            Kind::Ensemble => ModelKind::Ensemble,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Grad,
    Score,
}

fn load_config(common: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(p) => PipelineConfig::from_file(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(common: &Common) -> Result<&Path> {
    fs::create_dir_all(&common.out_dir)?;
    Ok(&common.out_dir)
}

/// Reads feature rows, applying the preprocessing model when given.
fn feature_rows(data: &Path, label_column: &str, preprocess: Option<&Path>) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let (names, rows) = load_unlabeled_csv(data, Some(label_column))?;
    let Some(path) = preprocess else {
        return Ok((names, rows));
    };
    let pre: PreprocessModel = load_model(path)?;
    if names != pre.input_names {
        return Err(Error::Shape(format!(
            "{} has columns {:?}, the preprocessing model expects {:?}",
            data.display(),
            names,
            pre.input_names
        )));
    }
    let rows = rows.iter().map(|r| pre.transform_row(r)).collect::<Result<Vec<_>>>()?;
    let names = (1..=pre.output_dim()).map(|c| format!("pc{c}")).collect();
    Ok((names, rows))
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Preprocess { common, data } => {
            let cfg = load_config(&common)?;
            let raw = load_csv(&data, &cfg.label_column, &cfg.positive_label)?;
            let fitted = fit_pipeline_preprocess(&raw, &cfg)?;
            let dir = out_dir(&common)?;
            write_csv(&fitted.data, dir.join("processed.csv"), &cfg.label_column)?;
            save_model(&fitted.model, dir.join(PREPROCESS_FILE))?;
            println!(
                "{} rows -> {} rows x {} components ({} outliers removed, pruned: {:?})",
                raw.len(),
                fitted.data.len(),
                fitted.model.output_dim(),
                fitted.removed_rows.len(),
                fitted.pruned_columns
            );
        }
        Command::Train { kind, common, data } => {
            let mut cfg = load_config(&common)?;
            cfg.model = kind.into();
            cfg.validate()?;
            let train = load_csv(&data, &cfg.label_column, PROCESSED_POSITIVE)?;
            let (model, summary) = train_model(&train, &cfg)?;
            let dir = out_dir(&common)?;
            model.save(dir.join(MODEL_FILE))?;
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
        }
        Command::Predict {
            common,
            model,
            data,
            preprocess,
        } => {
            let cfg = load_config(&common)?;
            let model = Model::load(&model)?;
            let (_, rows) = feature_rows(&data, &cfg.label_column, preprocess.as_deref())?;
            let preds = predict_rows(&model, &rows)?;
            let records: Vec<PredictionRecord> = preds
                .iter()
                .enumerate()
                .map(|(i, p)| PredictionRecord {
                    sample_index: i,
                    probability: p.probability_malicious,
                    label: p.label,
                })
                .collect();
            let dir = out_dir(&common)?;
            write_predictions(dir.join(PREDICTIONS_FILE), &records)?;
            let flagged = records.iter().filter(|r| r.label == 1).count();
            println!("{} rows scored, {flagged} flagged malicious", records.len());
        }
        Command::Explain {
            common,
            model,
            data,
            preprocess,
            row,
            method,
            top_k,
        } => {
            let cfg = load_config(&common)?;
            let model = Model::load(&model)?;
            let (names, rows) = feature_rows(&data, &cfg.label_column, preprocess.as_deref())?;
            let x = rows.get(row).ok_or_else(|| {
                Error::InvalidInput(format!("row {row} requested but {} has {} rows", data.display(), rows.len()))
            })?;
            let report = match (method, &model) {
                (Method::Grad, Model::Vqc(vqc)) => grad_attribution(vqc, x)?,
                (Method::Grad, other) => {
                    return Err(Error::Unsupported(format!(
                        "gradient attribution needs a vqc model, got {}; use --method score",
                        other.kind().name()
                    )))
                }
                (Method::Score, m) => score_attribution(m, x, None)?,
            };
            let dir = out_dir(&common)?;
            write_report_csv(&report, &names, dir.join("attribution.csv"))?;
            print!("{}", summary(&report, &names, top_k));
        }
        Command::Evaluate {
            common,
            predictions,
            data,
            baseline,
            positive_label,
        } => {
            let cfg = load_config(&common)?;
            let positive = positive_label.unwrap_or_else(|| cfg.positive_label.clone());
            let labelled = load_csv(&data, &cfg.label_column, &positive)?;
            let preds = read_predictions(&predictions)?;
            let labels = preds
                .iter()
                .map(|r| {
                    labelled.labels().get(r.sample_index).copied().ok_or_else(|| {
                        Error::InvalidInput(format!(
                            "sample_index {} is outside the {} rows of {}",
                            r.sample_index,
                            labelled.len(),
                            data.display()
                        ))
                    })
                })
                .collect::<Result<Vec<u8>>>()?;
            let pred_labels: Vec<u8> = preds.iter().map(|r| r.label).collect();
            let base_labels = match &baseline {
                Some(path) => {
                    let base = read_predictions(path)?;
                    let same_rows = base.len() == preds.len()
                        && base.iter().zip(&preds).all(|(a, b)| a.sample_index == b.sample_index);
                    if !same_rows {
                        return Err(Error::Shape(format!(
                            "{} does not cover the same samples as {}",
                            path.display(),
                            predictions.display()
                        )));
                    }
                    Some(base.iter().map(|r| r.label).collect::<Vec<u8>>())
                }
                None => None,
            };
            let report = evaluate(
                &pred_labels,
                &labels,
                base_labels.as_deref(),
                cfg.evaluation.bootstrap_iterations,
                cfg.seed,
            )?;
            let dir = out_dir(&common)?;
            fs::write(dir.join("evaluation.json"), report.to_json() + "\n")?;
            fs::write(dir.join("evaluation.txt"), report.to_table())?;
            print!("{}", report.to_table());
        }
        Command::Kernel { common, data } => {
            let cfg = load_config(&common)?;
            let (_, rows) = load_unlabeled_csv(&data, Some(&cfg.label_column))?;
            let k = kernel_matrix(&rows, &cfg.circuit.feature_map())?;
            let dir = out_dir(&common)?;
            k.write_csv(dir.join("kernel.csv"))?;
            println!("{0}x{0} kernel written to {1}", k.size(), dir.join("kernel.csv").display());
        }
        Command::Run { common, data } => {
            let cfg = load_config(&common)?;
            let report = run_experiment(&cfg, &data, &common.out_dir)?;
            print!("{}", report.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
