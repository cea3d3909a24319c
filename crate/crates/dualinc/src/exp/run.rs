//! Seeded end-to-end runs: train across phases, re-evaluate checkpoints,
//! sweep one axis, and run the agreement/activation analysis.

use super::config::{build_dataset, ExperimentConfig};
use super::plot::phase_accuracy_svg;
use super::RunError;
use crate::data::{make_phase_schedule, phase_data, Dataset, OrientationSet, PhaseSchedule};
use crate::derive_seed;
use crate::eval::{agreement_analysis, evaluate, gradcam, write_pgm, AgreementTable, EvalReport, Strategy};
use crate::model::{init_model, load_checkpoint, save_checkpoint, Model};
use crate::trainer::{append_metrics_csv, train_phase, ExemplarMemory, Objective, PhaseOutcome};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// What one training run produced.
pub struct RunSummary {
    pub run_dir: PathBuf,
    pub report: EvalReport,
    pub average_incremental_accuracy: f32,
}

fn write_file(path: &Path, contents: &str) -> Result<(), RunError> {
    std::fs::write(path, contents)
        .map_err(|source| RunError::Io { path: path.display().to_string(), source })
}

fn create_dir(path: &Path) -> Result<(), RunError> {
    std::fs::create_dir_all(path)
        .map_err(|source| RunError::Io { path: path.display().to_string(), source })
}

/// Execute phases 0..=P: train, evaluate on all classes seen so far, write
/// checkpoints, the metrics stream, the phase report, and the accuracy plot.
pub fn cmd_train(config: &ExperimentConfig) -> Result<RunSummary, RunError> {
    let warnings = config.validate().map_err(RunError::Config)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let run_dir = config.resolved_out_dir();
    create_dir(&run_dir)?;

    if config.run.repeats == 1 {
        return train_single(config, &run_dir);
    }
    let mut rows = Vec::new();
    let mut last = None;
    for rep in 0..config.run.repeats {
        let mut rep_config = config.clone();
        rep_config.run.seed = derive_seed(config.run.seed, rep as u64);
        rep_config.run.repeats = 1;
        let rep_dir = run_dir.join(format!("rep{rep}"));
        create_dir(&rep_dir)?;
        let summary = train_single(&rep_config, &rep_dir)?;
        rows.push(format!("{},{},{}", rep, rep_config.run.seed, summary.average_incremental_accuracy));
        last = Some(summary);
    }
    let mean: f32 = rows
        .iter()
        .map(|r| r.rsplit(',').next().unwrap().parse::<f32>().unwrap())
        .sum::<f32>()
        / rows.len() as f32;
    let mut csv = String::from("repeat,seed,avg_incremental_accuracy\n");
    for r in &rows {
        csv.push_str(r);
        csv.push('\n');
    }
    csv.push_str(&format!("mean,,{mean}\n"));
    write_file(&run_dir.join("repeats.csv"), &csv)?;
    Ok(last.expect("at least one repeat"))
}

fn train_single(config: &ExperimentConfig, run_dir: &Path) -> Result<RunSummary, RunError> {
    let started = Instant::now();
    config.validate().map_err(RunError::Config)?;
    create_dir(run_dir)?;
    let config_echo = config.to_toml_string();
    write_file(&run_dir.join("config.toml"), &config_echo)?;

    let dataset = build_dataset(config)?;
    let schedule = make_phase_schedule(
        config.total_classes(),
        config.schedule.base_classes,
        config.schedule.phases,
        config.class_order_seed(),
    )?;
    let orientations = config.orientation_set();
    let train_config = config.train_config().map_err(RunError::Config)?;
    let model_config = config.model_config().map_err(RunError::Config)?;

    let mut model = init_model(
        &model_config,
        config.schedule.base_classes,
        orientations.len(),
        derive_seed(config.run.seed, 0x1417),
    );
    let mut memory = ExemplarMemory::new(train_config.memory_per_class, train_config.selection);
    let mut teacher = None;
    let mut report = EvalReport::new(config.eval.strategy, objective_label(config));
    let metrics_path = run_dir.join("metrics.csv");

    for phase in 0..=schedule.phase_count() {
        if phase > 0 {
            model.expand_image_head(schedule.increment());
        }
        let split = phase_data(&dataset, &schedule, phase)?;
        let PhaseOutcome { metrics, snapshot } = train_phase(
            &mut model,
            &mut memory,
            &split,
            phase,
            teacher.as_ref(),
            &orientations,
            &train_config,
            derive_seed(config.run.seed, 0x7ea1 + phase as u64),
        )?;
        append_metrics_csv(&metrics_path, &metrics)?;
        teacher = Some(snapshot);

        let accuracy = evaluate(&model, &split.test, &orientations, config.eval.strategy);
        report.push(phase, split.seen_classes, accuracy);
        save_checkpoint(
            &run_dir.join(format!("checkpoint_phase{phase}.json")),
            &model,
            phase,
            schedule.class_order(),
            &config_echo,
        )?;
    }

    write_file(&run_dir.join("report.csv"), &report.to_csv())?;
    write_file(&run_dir.join("accuracy.svg"), &phase_accuracy_svg(&report))?;
    if !config.run.deterministic {
        write_file(
            &run_dir.join("timing.txt"),
            &format!("wall_seconds = {:.3}\n", started.elapsed().as_secs_f64()),
        )?;
    }
    let avg = report.average_incremental_accuracy();
    Ok(RunSummary { run_dir: run_dir.to_path_buf(), report, average_incremental_accuracy: avg })
}

fn objective_label(config: &ExperimentConfig) -> String {
    format!("{}+{}", config.train.objective.name(), config.eval.strategy.name())
}

/// Overrides applied when re-evaluating a checkpoint.
#[derive(Clone, Debug, Default)]
pub struct EvalOverrides {
    pub strategy: Option<Strategy>,
    pub angles: Option<Vec<f32>>,
    pub allow_plain_ensemble: bool,
    /// Where to write the report CSV; stdout-only when absent.
    pub out: Option<PathBuf>,
}

/// Context shared by the checkpoint-driven commands.
struct LoadedRun {
    model: Model,
    config: ExperimentConfig,
    dataset: Dataset,
    schedule: PhaseSchedule,
    phase: usize,
}

fn load_run(checkpoint: &Path) -> Result<LoadedRun, RunError> {
    let (model, ck) = load_checkpoint(checkpoint)?;
    let config = ExperimentConfig::from_toml_str(&ck.experiment_toml)
        .map_err(|e| RunError::Config(format!("checkpoint config echo: {e}")))?;
    let dataset = build_dataset(&config)?;
    let schedule = PhaseSchedule::from_order(
        ck.class_order.clone(),
        config.schedule.base_classes,
        config.schedule.phases,
    )?;
    Ok(LoadedRun { model, config, dataset, schedule, phase: ck.phase })
}

/// Re-evaluate a checkpoint on the classes it has seen, with optional
/// strategy and orientation overrides.
pub fn cmd_eval(checkpoint: &Path, overrides: &EvalOverrides) -> Result<EvalReport, RunError> {
    let run = load_run(checkpoint)?;
    let strategy = overrides.strategy.unwrap_or(run.config.eval.strategy);
    let angles = overrides.angles.clone().unwrap_or_else(|| run.config.orientations.angles.clone());
    super::config::validate_angles(&angles).map_err(RunError::Config)?;
    let plain_override = run.config.train.objective == Objective::Plain && strategy.is_ensemble();
    if plain_override && !(overrides.allow_plain_ensemble || run.config.eval.allow_plain_ensemble) {
        return Err(RunError::Config(
            "refusing ensemble evaluation of a plain-trained checkpoint; pass \
             --allow-plain-ensemble to run the degradation experiment anyway"
                .into(),
        ));
    }
    if angles.len() == 1 && strategy.is_ensemble() {
        eprintln!("warning: strategy '{}' with a single orientation degenerates to 'none'", strategy.name());
    }
    let orientations = OrientationSet::new(angles);
    let label = if plain_override { "EN-without-DILF".to_string() } else { objective_label_for(&run.config, strategy) };

    let mut report = EvalReport::new(strategy, label);
    let split = phase_data(&run.dataset, &run.schedule, run.phase)?;
    let accuracy = evaluate(&run.model, &split.test, &orientations, strategy);
    report.push(run.phase, split.seen_classes, accuracy);

    if let Some(out) = &overrides.out {
        if let Some(parent) = out.parent() {
            create_dir(parent)?;
        }
        write_file(out, &report.to_csv())?;
    }
    Ok(report)
}

fn objective_label_for(config: &ExperimentConfig, strategy: Strategy) -> String {
    format!("{}+{}", config.train.objective.name(), strategy.name())
}

/// Swept axis of [`cmd_sweep`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    Gamma,
    Orientations,
    Memory,
}

impl SweepAxis {
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "gamma" => Some(SweepAxis::Gamma),
            "orientations" => Some(SweepAxis::Orientations),
            "memory" => Some(SweepAxis::Memory),
            _ => None,
        }
    }
}

/// One full run per value with a shared seed; rows differ only in the swept
/// axis. Values: gamma and memory take plain numbers; orientations take
/// `+`-joined angle lists such as `0+90+180`.
pub fn cmd_sweep(
    config: &ExperimentConfig,
    axis: SweepAxis,
    values: &[String],
) -> Result<PathBuf, RunError> {
    if values.is_empty() {
        return Err(RunError::Config("sweep needs at least one value".into()));
    }
    let sweep_dir = config.resolved_out_dir();
    create_dir(&sweep_dir)?;
    let mut rows = Vec::new();
    for (i, raw) in values.iter().enumerate() {
        let mut variant = config.clone();
        let label = raw.clone();
        match axis {
            SweepAxis::Gamma => {
                variant.train.gamma = raw
                    .parse::<f32>()
                    .map_err(|_| RunError::Config(format!("gamma value '{raw}' is not a number")))?;
            }
            SweepAxis::Memory => {
                variant.train.memory_per_class = raw
                    .parse::<usize>()
                    .map_err(|_| RunError::Config(format!("memory value '{raw}' is not an integer")))?;
            }
            SweepAxis::Orientations => {
                let angles: Result<Vec<f32>, _> = raw.split('+').map(str::parse::<f32>).collect();
                variant.orientations.angles = angles
                    .map_err(|_| RunError::Config(format!("orientation list '{raw}' is malformed")))?;
            }
        }
        variant.run.out_dir = sweep_dir.join(format!("value{i}"));
        // the sweep owns the directory layout; bypass the env root join
        let summary = train_single(&variant, &variant.run.out_dir)?;
        rows.push(format!("{label},{}", summary.average_incremental_accuracy));
    }
    let mut csv = String::from("value,avg_incremental_accuracy\n");
    for r in &rows {
        csv.push_str(r);
        csv.push('\n');
    }
    let out = sweep_dir.join("sweep.csv");
    write_file(&out, &csv)?;
    Ok(out)
}

/// Output of [`cmd_analyze`].
pub struct AnalyzeOutcome {
    pub table: AgreementTable,
    pub csv_path: PathBuf,
    pub heatmap_paths: Vec<PathBuf>,
}

/// Agreement analysis over the base-phase test classes, plus optional
/// activation heatmaps for selected test sample indices.
pub fn cmd_analyze(
    checkpoint: &Path,
    o1: f32,
    o2: f32,
    heatmap_ids: &[usize],
    out_dir: &Path,
) -> Result<AnalyzeOutcome, RunError> {
    if o1 == o2 {
        return Err(RunError::Config("agreement orientations o1 and o2 must differ".into()));
    }
    let run = load_run(checkpoint)?;
    let vocabulary = &run.config.orientations.angles;
    for angle in [o1, o2] {
        if !vocabulary.contains(&angle) {
            return Err(RunError::Config(format!(
                "orientation {angle} is not in the model's orientation vocabulary {vocabulary:?}"
            )));
        }
    }
    create_dir(out_dir)?;

    // base-phase test classes, evaluated with the full current head
    let base = phase_data(&run.dataset, &run.schedule, 0)?;
    let table = agreement_analysis(&run.model, &base.test, o1, o2);
    let csv = format!("{}\n{}\n", AgreementTable::csv_header(), table.csv_row());
    let csv_path = out_dir.join("agreement.csv");
    write_file(&csv_path, &csv)?;

    let mut heatmap_paths = Vec::new();
    for &id in heatmap_ids {
        let sample = base.test.get(id).ok_or_else(|| {
            RunError::Config(format!("heatmap id {id} outside the {}-sample split", base.test.len()))
        })?;
        let map = gradcam(&run.model, &sample.image, sample.image_class);
        let path = out_dir.join(format!("heatmap_{id}.pgm"));
        write_pgm(&path, &map)
            .map_err(|source| RunError::Io { path: path.display().to_string(), source })?;
        heatmap_paths.push(path);
    }
    Ok(AnalyzeOutcome { table, csv_path, heatmap_paths })
}
