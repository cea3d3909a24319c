//! Thin command-line front end; all logic lives in the library.

use clap::{Args, Parser, Subcommand};
use dualinc::eval::Strategy;
use dualinc::exp::{
    cmd_analyze, cmd_eval, cmd_sweep, cmd_train, EvalOverrides, ExperimentConfig, RunError,
    SweepAxis,
};
use dualinc::trainer::Objective;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "dualinc",
    version,
    about = "Class-incremental training with a joint orientation objective and test-time orientation ensembling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run all phases of one experiment and write reports under the run directory
    Train(TrainArgs),
    /// Re-evaluate a checkpoint, optionally overriding strategy or orientations
    Eval(EvalArgs),
    /// One full run per value along one axis (gamma | orientations | memory)
    Sweep(SweepArgs),
    /// Orientation agreement table and optional activation heatmaps
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct ConfigOverrides {
    /// Experiment configuration file (TOML); defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// dilf | da | ss | plain
    #[arg(long)]
    objective: Option<String>,
    /// Weight of the orientation loss term
    #[arg(long)]
    gamma: Option<f32>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// avg | mode | max | none
    #[arg(long)]
    strategy: Option<String>,
    /// Comma-separated degrees starting with 0, e.g. 0,90
    #[arg(long)]
    angles: Option<String>,
    /// Replay exemplars kept per class
    #[arg(long)]
    memory: Option<usize>,
    #[arg(long)]
    base_classes: Option<usize>,
    /// Number of incremental phases after the base phase
    #[arg(long)]
    phases: Option<usize>,
    /// Model preset: small | cifar
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Keep run artifacts byte-reproducible (no wall-clock content)
    #[arg(long)]
    deterministic: Option<bool>,
    /// Permit ensemble evaluation of a plain-trained model
    #[arg(long)]
    allow_plain_ensemble: bool,
    /// synthetic | cifar100
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    cifar_train: Option<PathBuf>,
    #[arg(long)]
    cifar_test: Option<PathBuf>,
    /// Synthetic dataset: class count
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    train_per_class: Option<usize>,
    #[arg(long)]
    test_per_class: Option<usize>,
    /// Synthetic dataset: image side in pixels
    #[arg(long)]
    side: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    overrides: ConfigOverrides,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint written by `train`
    #[arg(long)]
    checkpoint: PathBuf,
    /// avg | mode | max | none
    #[arg(long)]
    strategy: Option<String>,
    /// Comma-separated degrees starting with 0
    #[arg(long)]
    angles: Option<String>,
    #[arg(long)]
    allow_plain_ensemble: bool,
    /// Write the report CSV here as well as to stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    overrides: ConfigOverrides,
    /// gamma | orientations | memory
    #[arg(long)]
    axis: String,
    /// Comma-separated values; orientation lists join angles with '+', e.g. 0,0+90
    #[arg(long)]
    values: String,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Checkpoint written by `train`
    #[arg(long)]
    checkpoint: PathBuf,
    /// First orientation angle in degrees
    #[arg(long)]
    o1: f32,
    /// Second orientation angle in degrees
    #[arg(long)]
    o2: f32,
    /// Comma-separated test-sample indices to export as heatmaps
    #[arg(long)]
    heatmap_ids: Option<String>,
    #[arg(long)]
    out_dir: PathBuf,
}

fn parse_angles(text: &str) -> Result<Vec<f32>, RunError> {
    text.split(',')
        .map(|a| a.trim().parse::<f32>())
        .collect::<Result<Vec<f32>, _>>()
        .map_err(|_| RunError::Config(format!("malformed angle list '{text}'")))
}

fn parse_ids(text: &str) -> Result<Vec<usize>, RunError> {
    text.split(',')
        .map(|a| a.trim().parse::<usize>())
        .collect::<Result<Vec<usize>, _>>()
        .map_err(|_| RunError::Config(format!("malformed id list '{text}'")))
}

fn load_config(args: &ConfigOverrides) -> Result<ExperimentConfig, RunError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_toml_file(path).map_err(RunError::Config)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = args.seed {
        cfg.run.seed = v;
    }
    if let Some(v) = &args.out_dir {
        cfg.run.out_dir = v.clone();
    }
    if let Some(v) = &args.objective {
        cfg.train.objective = Objective::by_name(v)
            .ok_or_else(|| RunError::Config(format!("unknown objective '{v}' (dilf, da, ss, plain)")))?;
    }
    if let Some(v) = args.gamma {
        cfg.train.gamma = v;
    }
    if let Some(v) = args.epochs {
        cfg.train.epochs = v;
    }
    if let Some(v) = args.batch_size {
        cfg.train.batch_size = v;
    }
    if let Some(v) = args.learning_rate {
        cfg.train.learning_rate = v;
    }
    if let Some(v) = &args.strategy {
        cfg.eval.strategy = Strategy::by_name(v)
            .ok_or_else(|| RunError::Config(format!("unknown strategy '{v}' (avg, mode, max, none)")))?;
    }
    if let Some(v) = &args.angles {
        cfg.orientations.angles = parse_angles(v)?;
    }
    if let Some(v) = args.memory {
        cfg.train.memory_per_class = v;
    }
    if let Some(v) = args.base_classes {
        cfg.schedule.base_classes = v;
    }
    if let Some(v) = args.phases {
        cfg.schedule.phases = v;
    }
    if let Some(v) = &args.preset {
        cfg.model.preset = v.clone();
    }
    if let Some(v) = args.repeats {
        cfg.run.repeats = v;
    }
    if let Some(v) = args.deterministic {
        cfg.run.deterministic = v;
    }
    if args.allow_plain_ensemble {
        cfg.eval.allow_plain_ensemble = true;
    }
    if let Some(v) = &args.dataset {
        cfg.dataset.kind = v.clone();
    }
    if let Some(v) = &args.cifar_train {
        cfg.dataset.train_path = Some(v.clone());
    }
    if let Some(v) = &args.cifar_test {
        cfg.dataset.test_path = Some(v.clone());
    }
    if let Some(v) = args.classes {
        cfg.dataset.classes = v;
    }
    if let Some(v) = args.train_per_class {
        cfg.dataset.train_per_class = v;
    }
    if let Some(v) = args.test_per_class {
        cfg.dataset.test_per_class = v;
    }
    if let Some(v) = args.side {
        cfg.dataset.side = v;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Train(args) => {
            let cfg = load_config(&args.overrides)?;
            let summary = cmd_train(&cfg)?;
            for p in &summary.report.phases {
                println!("phase {}: {} classes, accuracy {:.4}", p.phase, p.classes_seen, p.accuracy);
            }
            println!("average incremental accuracy: {:.4}", summary.average_incremental_accuracy);
            println!("run directory: {}", summary.run_dir.display());
        }
        Command::Eval(args) => {
            let overrides = EvalOverrides {
                strategy: match &args.strategy {
                    Some(v) => Some(Strategy::by_name(v).ok_or_else(|| {
                        RunError::Config(format!("unknown strategy '{v}' (avg, mode, max, none)"))
                    })?),
                    None => None,
                },
                angles: match &args.angles {
                    Some(v) => Some(parse_angles(v)?),
                    None => None,
                },
                allow_plain_ensemble: args.allow_plain_ensemble,
                out: args.out.clone(),
            };
            let report = cmd_eval(&args.checkpoint, &overrides)?;
            print!("{}", report.to_csv());
            eprintln!("label: {}", report.label);
        }
        Command::Sweep(args) => {
            let cfg = load_config(&args.overrides)?;
            let axis = SweepAxis::by_name(&args.axis).ok_or_else(|| {
                RunError::Config(format!("unknown sweep axis '{}' (gamma, orientations, memory)", args.axis))
            })?;
            let values: Vec<String> =
                args.values.split(',').map(|v| v.trim().to_string()).collect();
            let csv_path = cmd_sweep(&cfg, axis, &values)?;
            print!("{}", std::fs::read_to_string(&csv_path).unwrap_or_default());
            println!("sweep table: {}", csv_path.display());
        }
        Command::Analyze(args) => {
            let ids = match &args.heatmap_ids {
                Some(v) => parse_ids(v)?,
                None => Vec::new(),
            };
            let outcome = cmd_analyze(&args.checkpoint, args.o1, args.o2, &ids, &args.out_dir)?;
            println!("{}", dualinc::eval::AgreementTable::csv_header());
            println!("{}", outcome.table.csv_row());
            println!("agreement table: {}", outcome.csv_path.display());
            for p in &outcome.heatmap_paths {
                println!("heatmap: {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
