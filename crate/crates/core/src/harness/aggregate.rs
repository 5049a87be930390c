use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::metrics::mean_std;
use super::train::RunLog;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let (mean, std) = mean_std(values);
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub dataset_name: String,
    /// The shared configuration with the seed fields cleared.
    pub config: TrainConfig,
    pub runs: usize,
    pub seeds: Vec<u64>,
    pub test_accuracy: MeanStd,
    pub test_macro_f1: MeanStd,
}

fn without_seed(c: &TrainConfig) -> TrainConfig {
    TrainConfig {
        seed: 0,
        seeds: None,
        ..c.clone()
    }
}

/// Mean and sample standard deviation of the final test scores of runs that
/// differ only by seed.
pub fn aggregate(logs: &[RunLog]) -> Result<Summary> {
    let first = logs
        .first()
        .ok_or_else(|| Error::Argument("nothing to aggregate".into()))?;
    let config = without_seed(&first.config);
    for log in logs {
        if without_seed(&log.config) != config || log.dataset_name != first.dataset_name {
            return Err(Error::Argument(format!(
                "run with seed {} has a different configuration from run with seed {}",
                log.config.seed, first.config.seed
            )));
        }
    }
    let acc: Vec<f64> = logs.iter().map(|l| l.final_metrics.test.accuracy).collect();
    let f1: Vec<f64> = logs.iter().map(|l| l.final_metrics.test.macro_f1).collect();
    Ok(Summary {
        dataset_name: first.dataset_name.clone(),
        config,
        runs: logs.len(),
        seeds: logs.iter().map(|l| l.config.seed).collect(),
        test_accuracy: MeanStd::of(&acc),
        test_macro_f1: MeanStd::of(&f1),
    })
}

impl Summary {
    pub fn table(&self) -> String {
        let c = &self.config;
        let model = match c.model {
            super::config::ModelKind::Homo => format!("homo, decoder layers {}", c.decoder_layers),
            super::config::ModelKind::Hetero => {
                format!("hetero {}, decoder layers {}", c.variant, c.decoder_layers)
            }
        };
        format!(
            "dataset   {} ({model}, gamma {})\nruns      {}\naccuracy  {:.2} ± {:.2}\nmacro-F1  {:.2} ± {:.2}\n",
            self.dataset_name,
            c.gamma,
            self.runs,
            100.0 * self.test_accuracy.mean,
            100.0 * self.test_accuracy.std,
            100.0 * self.test_macro_f1.mean,
            100.0 * self.test_macro_f1.std,
        )
    }
}
