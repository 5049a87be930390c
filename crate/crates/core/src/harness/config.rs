use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DecoderEval, HeteroSettings, HomoSettings, VariantKind};
use crate::nn::ReconMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Homo,
    Hetero,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "homo" => Ok(ModelKind::Homo),
            "hetero" => Ok(ModelKind::Hetero),
            _ => Err(Error::Config(format!(
                "unknown model '{s}' (expected homo or hetero)"
            ))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Homo => "homo",
            ModelKind::Hetero => "hetero",
        })
    }
}

/// Which parameters are reported after training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalSelection {
    /// The parameters after the last epoch.
    #[default]
    Final,
    /// The parameters of the epoch with the best validation score.
    BestVal,
}

impl FromStr for EvalSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "final" => Ok(EvalSelection::Final),
            "best_val" | "best-val" => Ok(EvalSelection::BestVal),
            _ => Err(Error::Config(format!(
                "unknown eval selection '{s}' (expected final or best_val)"
            ))),
        }
    }
}

/// Every setting as it may appear in a JSON config file or on the command
/// line. Unset fields fall back to the per-dataset defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigOverrides {
    pub dataset: Option<PathBuf>,
    pub model: Option<ModelKind>,
    pub variant: Option<VariantKind>,
    pub gamma: Option<f64>,
    pub lr: Option<f64>,
    pub weight_decay: Option<f64>,
    pub dropout: Option<f64>,
    pub epochs: Option<usize>,
    pub d0: Option<usize>,
    pub d1: Option<usize>,
    pub channels: Option<usize>,
    pub decoder_layers: Option<usize>,
    pub seed: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub eval: Option<EvalSelection>,
    pub recon_mode: Option<ReconMode>,
    pub normalize_targets: Option<bool>,
    pub block_rows: Option<usize>,
}

impl ConfigOverrides {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `other` win.
    pub fn merge(self, other: ConfigOverrides) -> ConfigOverrides {
        macro_rules! pick {
            ($($f:ident),*) => { ConfigOverrides { $($f: other.$f.or(self.$f)),* } };
        }
        pick!(
            dataset,
            model,
            variant,
            gamma,
            lr,
            weight_decay,
            dropout,
            epochs,
            d0,
            d1,
            channels,
            decoder_layers,
            seed,
            seeds,
            eval,
            recon_mode,
            normalize_targets,
            block_rows
        )
    }
}

/// A fully resolved training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dataset: PathBuf,
    pub model: ModelKind,
    pub variant: VariantKind,
    pub gamma: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub epochs: usize,
    pub d0: usize,
    pub d1: usize,
    pub channels: usize,
    pub decoder_layers: usize,
    pub seed: u64,
    pub seeds: Option<Vec<u64>>,
    pub eval: EvalSelection,
    pub recon_mode: ReconMode,
    pub normalize_targets: bool,
    /// Row block of the dense decoder evaluation; `None` picks the cheapest
    /// exact route for the loss.
    pub block_rows: Option<usize>,
}

impl TrainConfig {
    /// Fills unset fields with the published recipe for `dataset_name`
    /// (the `name` in meta.json) and validates the result.
    pub fn resolve(o: &ConfigOverrides, dataset_name: &str) -> Result<TrainConfig> {
        let dataset = o
            .dataset
            .clone()
            .ok_or_else(|| Error::Config("no dataset directory given".into()))?;
        let model = o.model.unwrap_or(ModelKind::Homo);
        let name = dataset_name.to_lowercase();
        let cfg = match model {
            ModelKind::Homo => TrainConfig {
                dataset,
                model,
                variant: o.variant.unwrap_or(VariantKind::AegX),
                gamma: o
                    .gamma
                    .unwrap_or(if name == "pubmed" { 0.001 } else { 10.0 }),
                lr: o.lr.unwrap_or(0.01),
                weight_decay: o.weight_decay.unwrap_or(5e-4),
                dropout: o.dropout.unwrap_or(0.5),
                epochs: o.epochs.unwrap_or(200),
                d0: o.d0.unwrap_or(128),
                d1: o.d1.unwrap_or(18),
                channels: o.channels.unwrap_or(2),
                decoder_layers: o.decoder_layers.unwrap_or(1),
                seed: o.seed.unwrap_or(0),
                seeds: o.seeds.clone(),
                eval: o.eval.unwrap_or_default(),
                recon_mode: o.recon_mode.unwrap_or_default(),
                normalize_targets: o.normalize_targets.unwrap_or(true),
                block_rows: o.block_rows,
            },
            ModelKind::Hetero => TrainConfig {
                dataset,
                model,
                variant: o.variant.unwrap_or(VariantKind::AegX),
                gamma: o.gamma.unwrap_or(1.0),
                lr: o.lr.unwrap_or(0.005),
                weight_decay: o.weight_decay.unwrap_or(0.001),
                dropout: o.dropout.unwrap_or(0.0),
                epochs: o.epochs.unwrap_or(if name == "imdb" { 20 } else { 40 }),
                d0: o.d0.unwrap_or(128),
                d1: o.d1.unwrap_or(64),
                channels: o.channels.unwrap_or(2),
                decoder_layers: o.decoder_layers.unwrap_or(1),
                seed: o.seed.unwrap_or(0),
                seeds: o.seeds.clone(),
                eval: o.eval.unwrap_or_default(),
                recon_mode: o.recon_mode.unwrap_or_default(),
                normalize_targets: o.normalize_targets.unwrap_or(true),
                block_rows: o.block_rows,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!(
                "gamma must be a finite non-negative number, got {}",
                self.gamma
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!(
                "weight decay must be non-negative, got {}",
                self.weight_decay
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.model == ModelKind::Hetero && self.dropout != 0.0 {
            return bad("the heterogeneous model does not use dropout".into());
        }
        if self.d1 == 0 || self.d0 == 0 || self.channels == 0 {
            return bad("d0, d1 and channels must be positive".into());
        }
        if self.model == ModelKind::Hetero && !self.d0.is_multiple_of(self.channels) {
            return bad(format!(
                "d0 = {} is not divisible by channels = {}",
                self.d0, self.channels
            ));
        }
        if !(1..=2).contains(&self.decoder_layers) {
            return bad(format!(
                "decoder layers must be 1 or 2, got {}",
                self.decoder_layers
            ));
        }
        if self.block_rows == Some(0) {
            return bad("block rows must be positive".into());
        }
        if matches!(&self.seeds, Some(s) if s.is_empty()) {
            return bad("seed list is empty".into());
        }
        Ok(())
    }

    pub fn run_seeds(&self) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| vec![self.seed])
    }

    /// The same configuration pinned to one seed.
    pub fn with_seed(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            seed,
            seeds: None,
            ..self.clone()
        }
    }

    fn decoder_eval(&self) -> DecoderEval {
        match self.block_rows {
            Some(rows) => DecoderEval::Blocked { rows },
            None => DecoderEval::Auto,
        }
    }

    pub fn homo_settings(&self) -> HomoSettings {
        HomoSettings {
            d1: self.d1,
            gamma: self.gamma,
            dropout: self.dropout,
            decoder_layers: self.decoder_layers,
            recon_mode: self.recon_mode,
            decoder_eval: self.decoder_eval(),
        }
    }

    pub fn hetero_settings(&self) -> HeteroSettings {
        HeteroSettings {
            d0: self.d0,
            d1: self.d1,
            channels: self.channels,
            variant: self.variant,
            gamma: self.gamma,
            decoder_layers: self.decoder_layers,
            recon_mode: self.recon_mode,
            decoder_eval: self.decoder_eval(),
            normalize_targets: self.normalize_targets,
        }
    }
}
