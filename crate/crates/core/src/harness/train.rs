use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{EvalSelection, ModelKind, TrainConfig};
use super::metrics::{evaluate, Scores};
use crate::data::{load_hetero, load_homo, HeteroGraph, HomoGraph};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::model::{HeteroModel, HeteroParams, HomoModel, HomoParams, Model};
use crate::optim::{adam_step, AdamState, RandomStream};

const INIT_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub class_loss: f64,
    pub recon_loss: f64,
    pub total_loss: f64,
    pub train_acc: f64,
    pub train_macro_f1: f64,
    pub val_acc: Option<f64>,
    pub val_macro_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalMetrics {
    /// Epoch whose parameters were evaluated (0 = untrained).
    pub epoch: usize,
    pub train: Scores,
    pub val: Option<Scores>,
    pub test: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub config: TrainConfig,
    pub dataset_name: String,
    /// Untrained parameters; losses from an inference-mode pass.
    pub initial: EpochRecord,
    /// One record per epoch: losses of that epoch's training pass, metrics
    /// after its update.
    pub epochs: Vec<EpochRecord>,
    #[serde(rename = "final")]
    pub final_metrics: FinalMetrics,
    pub duration_secs: f64,
}

impl RunLog {
    /// Per-epoch records as CSV, starting with the untrained row.
    pub fn epochs_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from("epoch,class_loss,recon_loss,total_loss,train_acc,train_macro_f1,val_acc,val_macro_f1\n");
        for r in std::iter::once(&self.initial).chain(&self.epochs) {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.epoch,
                r.class_loss,
                r.recon_loss,
                r.total_loss,
                r.train_acc,
                r.train_macro_f1,
                opt(r.val_acc),
                opt(r.val_macro_f1)
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum TrainedParams {
    Homo(HomoParams),
    Hetero(HeteroParams),
}

/// Parameters together with the configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub config: TrainConfig,
    pub params: TrainedParams,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub log: RunLog,
    pub params: TrainedParams,
}

/// A loaded dataset, shared by every run over it.
#[derive(Debug, Clone)]
pub enum Dataset {
    Homo(Arc<HomoGraph>),
    Hetero(Arc<HeteroGraph>),
}

impl Dataset {
    pub fn load(dir: &Path, kind: ModelKind) -> Result<Dataset> {
        Ok(match kind {
            ModelKind::Homo => Dataset::Homo(Arc::new(load_homo(dir)?)),
            ModelKind::Hetero => Dataset::Hetero(Arc::new(load_hetero(dir)?)),
        })
    }

    pub fn name(&self) -> &str {
        match self {
            Dataset::Homo(g) => &g.meta.name,
            Dataset::Hetero(g) => &g.meta.name,
        }
    }
}

fn optional_scores<M: Model>(
    model: &M,
    probs: &DenseMatrix,
    mask: &[usize],
) -> Result<Option<Scores>> {
    if mask.is_empty() {
        Ok(None)
    } else {
        evaluate(probs, model.labels(), mask).map(Some)
    }
}

/// Higher is better; compared only between epochs of one run.
fn selection_score(kind: ModelKind, val: Option<Scores>) -> f64 {
    match (kind, val) {
        (ModelKind::Homo, Some(s)) => s.accuracy,
        (ModelKind::Hetero, Some(s)) => s.macro_f1,
        (_, None) => f64::NEG_INFINITY,
    }
}

/// Trains `model` per `config` (one seed) and evaluates the selected
/// parameters on every split.
pub fn train_model<M: Model>(
    model: &M,
    config: &TrainConfig,
    dataset_name: &str,
) -> Result<(RunLog, M::Params)> {
    let started = Instant::now();
    let splits = model.splits();
    if splits.train.is_empty() || splits.test.is_empty() {
        return Err(Error::Config(
            "training and test splits must be non-empty".into(),
        ));
    }
    if config.eval == EvalSelection::BestVal && splits.val.is_empty() {
        return Err(Error::Config(
            "best_val selection needs a non-empty validation split".into(),
        ));
    }
    let root = RandomStream::new(config.seed);
    let mut init_stream = root.derive(INIT_STREAM);
    let mut dropout_stream = root.derive(DROPOUT_STREAM);

    let mut params = model.init_params(&mut init_stream)?;
    let mut adam = AdamState::new(&params);

    let record = |epoch: usize,
                  class_loss: f64,
                  recon_loss: f64,
                  total_loss: f64,
                  params: &M::Params|
     -> Result<(EpochRecord, Option<Scores>)> {
        let probs = model.predict(params)?;
        let train = evaluate(&probs, model.labels(), &splits.train)?;
        let val = optional_scores(model, &probs, &splits.val)?;
        Ok((
            EpochRecord {
                epoch,
                class_loss,
                recon_loss,
                total_loss,
                train_acc: train.accuracy,
                train_macro_f1: train.macro_f1,
                val_acc: val.map(|s| s.accuracy),
                val_macro_f1: val.map(|s| s.macro_f1),
            },
            val,
        ))
    };

    let untrained = model.forward(&params, false, &mut dropout_stream.clone())?;
    let (initial, initial_val) = record(
        0,
        untrained.class_loss,
        untrained.recon_loss,
        untrained.total_loss,
        &params,
    )?;
    let mut best = (
        selection_score(config.model, initial_val),
        0usize,
        params.clone(),
    );

    let mut epochs = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let fwd = model.forward(&params, true, &mut dropout_stream)?;
        if !fwd.total_loss.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite loss at epoch {epoch} (class {}, recon {}); last good epoch {}",
                fwd.class_loss,
                fwd.recon_loss,
                epoch - 1
            )));
        }
        let grads = model.backward(&params, &fwd)?;
        adam_step(
            &mut params,
            &grads,
            &mut adam,
            config.lr,
            config.weight_decay,
        )
        .map_err(|e| match e {
            Error::Numerical(msg) => Error::Numerical(format!(
                "epoch {epoch}: {msg}; last good epoch {}",
                epoch - 1
            )),
            other => other,
        })?;
        let (rec, val) = record(
            epoch,
            fwd.class_loss,
            fwd.recon_loss,
            fwd.total_loss,
            &params,
        )?;
        epochs.push(rec);
        if config.eval == EvalSelection::BestVal {
            let score = selection_score(config.model, val);
            if score > best.0 {
                best = (score, epoch, params.clone());
            }
        }
    }

    let (epoch, chosen) = match config.eval {
        EvalSelection::Final => (config.epochs, params),
        EvalSelection::BestVal => (best.1, best.2),
    };
    let probs = model.predict(&chosen)?;
    let final_metrics = FinalMetrics {
        epoch,
        train: evaluate(&probs, model.labels(), &splits.train)?,
        val: optional_scores(model, &probs, &splits.val)?,
        test: evaluate(&probs, model.labels(), &splits.test)?,
    };
    let log = RunLog {
        config: config.clone(),
        dataset_name: dataset_name.to_string(),
        initial,
        epochs,
        final_metrics,
        duration_secs: started.elapsed().as_secs_f64(),
    };
    Ok((log, chosen))
}

/// One training run on an already loaded dataset.
pub fn run_on(dataset: &Dataset, config: &TrainConfig) -> Result<RunOutcome> {
    config.validate()?;
    match (dataset, config.model) {
        (Dataset::Homo(g), ModelKind::Homo) => {
            let model = HomoModel::new(Arc::clone(g), config.homo_settings())?;
            let (log, params) = train_model(&model, config, &g.meta.name)?;
            Ok(RunOutcome {
                log,
                params: TrainedParams::Homo(params),
            })
        }
        (Dataset::Hetero(g), ModelKind::Hetero) => {
            let model = HeteroModel::new(Arc::clone(g), config.hetero_settings())?;
            let (log, params) = train_model(&model, config, &g.meta.name)?;
            Ok(RunOutcome {
                log,
                params: TrainedParams::Hetero(params),
            })
        }
        _ => Err(Error::Config(
            "dataset kind does not match the model kind".into(),
        )),
    }
}

/// Loads the dataset and trains once with `config.seed`.
pub fn run_train(config: &TrainConfig) -> Result<RunLog> {
    let dataset = Dataset::load(&config.dataset, config.model)?;
    Ok(run_on(&dataset, config)?.log)
}

/// One run per seed of `config.run_seeds()`, `parallel` at a time. Results
/// are in seed-list order regardless of scheduling.
pub fn run_seeds(
    dataset: &Dataset,
    config: &TrainConfig,
    parallel: usize,
) -> Result<Vec<RunOutcome>> {
    let seeds = config.run_seeds();
    if parallel <= 1 {
        return seeds
            .iter()
            .map(|&s| run_on(dataset, &config.with_seed(s)))
            .collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {parallel} worker threads: {e}")))?;
    pool.install(|| {
        seeds
            .par_iter()
            .map(|&s| run_on(dataset, &config.with_seed(s)))
            .collect::<Vec<_>>()
    })
    .into_iter()
    .collect()
}

/// Test-split scores of saved parameters on `dataset`.
/// Inference-mode class probabilities of trained parameters on `dataset`.
pub fn predict_trained(
    dataset: &Dataset,
    config: &TrainConfig,
    params: &TrainedParams,
) -> Result<DenseMatrix> {
    let shape_err = |e: Error| match e {
        Error::Dimension { op, detail } => Error::Config(format!(
            "parameters do not fit this dataset ({op}: {detail})"
        )),
        other => other,
    };
    match (dataset, params) {
        (Dataset::Homo(g), TrainedParams::Homo(p)) => {
            HomoModel::new(Arc::clone(g), config.homo_settings())?
                .predict(p)
                .map_err(shape_err)
        }
        (Dataset::Hetero(g), TrainedParams::Hetero(p)) => {
            HeteroModel::new(Arc::clone(g), config.hetero_settings())?
                .predict(p)
                .map_err(shape_err)
        }
        _ => Err(Error::Config(
            "saved parameters are for a different model kind".into(),
        )),
    }
}

pub fn evaluate_saved(dataset: &Dataset, saved: &SavedModel) -> Result<FinalMetrics> {
    let probs = predict_trained(dataset, &saved.config, &saved.params)?;
    let (labels, splits) = match dataset {
        Dataset::Homo(g) => (&g.labels, &g.splits),
        Dataset::Hetero(g) => (&g.labels, &g.splits),
    };
    Ok(FinalMetrics {
        epoch: 0,
        train: evaluate(&probs, labels, &splits.train)?,
        val: if splits.val.is_empty() {
            None
        } else {
            Some(evaluate(&probs, labels, &splits.val)?)
        },
        test: evaluate(&probs, labels, &splits.test)?,
    })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `run-seed<S>.json`, `epochs-seed<S>.csv` and
/// `params-seed<S>.json` into `dir`.
pub fn write_run(dir: &Path, outcome: &RunOutcome) -> Result<()> {
    let seed = outcome.log.config.seed;
    let log = serde_json::to_string_pretty(&outcome.log).expect("run log serializes");
    write_text(&dir.join(format!("run-seed{seed}.json")), &log)?;
    write_text(
        &dir.join(format!("epochs-seed{seed}.csv")),
        &outcome.log.epochs_csv(),
    )?;
    let saved = SavedModel {
        config: outcome.log.config.clone(),
        params: outcome.params.clone(),
    };
    write_text(
        &dir.join(format!("params-seed{seed}.json")),
        &serde_json::to_string(&saved).expect("parameters serialize"),
    )
}

pub fn read_run_log(path: &Path) -> Result<RunLog> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text)
        .map_err(|e| Error::validation(path.display().to_string(), Some(e.line()), e.to_string()))
}

pub fn read_saved_model(path: &Path) -> Result<SavedModel> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text)
        .map_err(|e| Error::validation(path.display().to_string(), Some(e.line()), e.to_string()))
}
