//! Configuration, training loop, metrics and run aggregation.

mod aggregate;
mod config;
mod gradcheck;
mod metrics;
mod train;

pub use aggregate::{aggregate, MeanStd, Summary};
pub use config::{ConfigOverrides, EvalSelection, ModelKind, TrainConfig};
pub use gradcheck::{
    default_cases, gradcheck, CaseReport, GradcheckCase, GradcheckReport, ParamCheck,
    GRADCHECK_INSTANCES, GRADCHECK_STEP, GRADCHECK_TOLERANCE,
};
pub use metrics::{argmax, evaluate, mean_std, score_pairs, Scores};
pub use train::{
    evaluate_saved, predict_trained, read_run_log, read_saved_model, run_on, run_seeds, run_train,
    train_model, write_run, Dataset, EpochRecord, FinalMetrics, RunLog, RunOutcome, SavedModel,
    TrainedParams,
};
