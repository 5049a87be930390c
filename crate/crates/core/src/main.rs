use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aegcn::data::read_meta;
use aegcn::harness::{
    aggregate, default_cases, evaluate_saved, gradcheck, read_run_log, read_saved_model, run_seeds,
    write_run, ConfigOverrides, Dataset, EvalSelection, GradcheckCase, ModelKind, RunLog,
    TrainConfig,
};
use aegcn::model::VariantKind;
use aegcn::nn::ReconMode;
use aegcn::{Error, Result};

#[derive(Parser)]
#[command(
    name = "aegcn",
    version,
    about = "Autoencoder-constrained GCN node classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run per seed and report test scores.
    Train(TrainArgs),
    /// Score saved parameters on a dataset.
    Eval(EvalArgs),
    /// Finite-difference check of the analytic gradients on toy graphs.
    Gradcheck(GradcheckArgs),
    /// Mean and standard deviation over saved run logs.
    Aggregate(AggregateArgs),
}

#[derive(Args, Default)]
struct Settings {
    /// JSON file with any of the settings below; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// homo or hetero
    #[arg(long)]
    model: Option<String>,
    /// x, h, a or s (heterogeneous model only)
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    d0: Option<usize>,
    #[arg(long)]
    d1: Option<usize>,
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long)]
    decoder_layers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated seed list, one run each.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// final or best_val
    #[arg(long)]
    eval: Option<String>,
    /// one_sided or full_bce
    #[arg(long)]
    recon_mode: Option<String>,
    #[arg(long)]
    normalize_targets: Option<bool>,
    /// Evaluate the decoder densely in blocks of this many rows.
    #[arg(long)]
    block_rows: Option<usize>,
}

impl Settings {
    fn overrides(&self) -> Result<ConfigOverrides> {
        let file = match &self.config {
            Some(p) => ConfigOverrides::from_file(p)?,
            None => ConfigOverrides::default(),
        };
        let recon_mode = self
            .recon_mode
            .as_deref()
            .map(|s| match s {
                "one_sided" => Ok(ReconMode::OneSided),
                "full_bce" => Ok(ReconMode::FullBce),
                _ => Err(Error::Config(format!(
                    "unknown recon mode '{s}' (expected one_sided or full_bce)"
                ))),
            })
            .transpose()?;
        let flags = ConfigOverrides {
            dataset: self.dataset.clone(),
            model: self
                .model
                .as_deref()
                .map(str::parse::<ModelKind>)
                .transpose()?,
            variant: self
                .variant
                .as_deref()
                .map(str::parse::<VariantKind>)
                .transpose()?,
            gamma: self.gamma,
            lr: self.lr,
            weight_decay: self.weight_decay,
            dropout: self.dropout,
            epochs: self.epochs,
            d0: self.d0,
            d1: self.d1,
            channels: self.channels,
            decoder_layers: self.decoder_layers,
            seed: self.seed,
            seeds: self.seeds.clone(),
            eval: self
                .eval
                .as_deref()
                .map(str::parse::<EvalSelection>)
                .transpose()?,
            recon_mode,
            normalize_targets: self.normalize_targets,
            block_rows: self.block_rows,
        };
        Ok(file.merge(flags))
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    settings: Settings,
    /// Directory for run logs, per-epoch CSVs, parameters and the summary.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seeds trained concurrently.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// A params-seed<S>.json written by `train --out`.
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[command(flatten)]
    settings: Settings,
    /// Scale this parameter's analytic gradient by 1.01 before checking.
    #[arg(long, hide = true)]
    corrupt: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AggregateArgs {
    /// Run logs, or directories searched for run-seed*.json.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn train(args: TrainArgs) -> Result<()> {
    let overrides = args.settings.overrides()?;
    let dir = overrides
        .dataset
        .clone()
        .ok_or_else(|| Error::Config("--dataset is required".into()))?;
    let meta = read_meta(&dir)?;
    let config = TrainConfig::resolve(&overrides, &meta.name)?;
    let dataset = Dataset::load(&config.dataset, config.model)?;
    let outcomes = run_seeds(&dataset, &config, args.parallel)?;
    for o in &outcomes {
        let t = &o.log.final_metrics.test;
        println!(
            "seed {:>6}  test accuracy {:.4}  macro-F1 {:.4}  ({:.1}s)",
            o.log.config.seed, t.accuracy, t.macro_f1, o.log.duration_secs
        );
        if let Some(out) = &args.out {
            write_run(out, o)?;
        }
    }
    let logs: Vec<RunLog> = outcomes.into_iter().map(|o| o.log).collect();
    let summary = aggregate(&logs)?;
    print!("{}", summary.table());
    if let Some(out) = &args.out {
        write_json(&out.join("summary.json"), &summary)?;
    }
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let saved = read_saved_model(&args.params)?;
    let dataset = Dataset::load(&args.dataset, saved.config.model)?;
    let metrics = evaluate_saved(&dataset, &saved)?;
    println!(
        "test accuracy {:.4}  macro-F1 {:.4}",
        metrics.test.accuracy, metrics.test.macro_f1
    );
    if let Some(out) = &args.out {
        write_json(out, &metrics)?;
    }
    Ok(())
}

fn gradcheck_cmd(args: GradcheckArgs) -> Result<bool> {
    let o = args.settings.overrides()?;
    let recon_mode = o.recon_mode.unwrap_or_default();
    let cases: Vec<GradcheckCase> = default_cases()
        .into_iter()
        .map(|c| GradcheckCase { recon_mode, ..c })
        .filter(|c| o.model.is_none_or(|m| m == c.model))
        .filter(|c| c.model == ModelKind::Homo || o.variant.is_none_or(|v| v == c.variant))
        .map(|c| GradcheckCase {
            decoder_layers: o.decoder_layers.unwrap_or(c.decoder_layers),
            ..c
        })
        .fold(Vec::new(), |mut acc, c| {
            if !acc.contains(&c) {
                acc.push(c);
            }
            acc
        });
    let report = gradcheck(&cases, o.seed.unwrap_or(0), args.corrupt.as_deref())?;
    println!("{report}");
    if let Some(out) = &args.out {
        write_json(out, &report)?;
    }
    Ok(report.passed)
}

fn collect_logs(inputs: &[PathBuf]) -> Result<Vec<RunLog>> {
    let mut paths = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|source| Error::Io {
                    path: p.clone(),
                    source,
                })?
                .flatten()
                .map(|e| e.path())
                .filter(|f| {
                    f.file_name()
                        .and_then(|n| n.to_str())
                        .is_some_and(|n| n.starts_with("run-seed") && n.ends_with(".json"))
                })
                .collect();
            found.sort();
            paths.extend(found);
        } else {
            paths.push(p.clone());
        }
    }
    paths.iter().map(|p| read_run_log(p)).collect()
}

fn aggregate_cmd(args: AggregateArgs) -> Result<()> {
    let logs = collect_logs(&args.inputs)?;
    let summary = aggregate(&logs)?;
    print!("{}", summary.table());
    match &args.out {
        Some(out) => write_json(out, &summary)?,
        None => println!(
            "{}",
            serde_json::to_string_pretty(&summary).expect("serializable")
        ),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Gradcheck(a) => match gradcheck_cmd(a) {
            Ok(true) => Ok(()),
            Ok(false) => Err(Error::Numerical("gradient check failed".into())),
            Err(e) => Err(e),
        },
        Command::Aggregate(a) => aggregate_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
