//! Batch commands. Each one is a pure function of its input files, the
//! resolved configuration and the seed.

use std::collections::HashMap;

use crowdprior_core::autothresh::{self, Interval, Threshold};
use crowdprior_core::bayes::{posterior, posterior_mode, uniform_prior};
use crowdprior_core::head::{head_forward, train_head, TrainExample, TrainReport};
use crowdprior_core::metrics::{self, ambiguity, confidence, hard_weights, soft_distance, soft_weight, MetricsReport};
use crowdprior_core::priors::{blend_prior, repeats_summary, StepSummary};
use crowdprior_core::rng::{derived_rng, stable_hash};
use crowdprior_core::sim::{self, synthetic_predictor};
use crowdprior_core::split::split_dataset;
use crowdprior_core::{tally, CategoryScheme, DatasetSplit, DirichletParams, SoftLabel, TaskRecord};
use serde::{Deserialize, Serialize};

use crate::config::{PipelineConfig, PriorKind};
use crate::error::{CliError, Result};
use crate::format::{csv, float_cell, opt_cell, report_json, round_sig};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, clap::Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset: scheme, tasks and responses
    Simulate,
    /// Partition tasks into train/val/test by group
    Split,
    /// Posterior parameters per task under the configured prior
    Infer,
    /// Fit the prediction head on the train split
    Train,
    /// Head predictions for every task at the inference depth
    Predict {
        /// Use the noisy oracle on true labels instead of the trained head
        #[arg(long)]
        synthetic: bool,
    },
    /// Metrics of predictions against crowd soft labels on the test split
    Eval,
    /// Automation-correctness curve with bootstrap bands
    Curve {
        #[arg(long, value_enum, default_value = "test")]
        split: SplitName,
    },
    /// Target-accuracy thresholds on val, evaluated on test
    Calibrate,
    /// Binned predicted vs. actual ambiguity on the test split
    Ambiguity,
    /// Repeated-annotation replay under uniform and informed priors
    Repeats {
        /// Drop test tasks the calibrated threshold would automate
        #[arg(long)]
        exclude_automated: bool,
    },
    /// Run every stage in order
    Pipeline,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
}

pub struct Context {
    pub cfg: PipelineConfig,
    hash: String,
}

impl Context {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let hash = cfg.hash();
        Ok(Self { cfg, hash })
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    fn provenance(&self, command: &str) -> Provenance {
        Provenance {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: self.hash.clone(),
            seed: self.cfg.seed,
        }
    }

    fn provenance_line(&self, command: &str) -> String {
        format!(
            "{} {} command={command} config_hash={} seed={}",
            env!("CARGO_PKG_NAME"),
            env!("CARGO_PKG_VERSION"),
            self.hash,
            self.cfg.seed
        )
    }

    fn scheme(&self) -> Result<CategoryScheme> {
        io::read_scheme(&self.cfg.scheme_path())
    }

    fn dataset(&self, scheme: &CategoryScheme, responses: bool) -> Result<Vec<TaskRecord>> {
        let responses_path = self.cfg.responses_path();
        io::read_dataset(scheme, &self.cfg.tasks_path(), responses.then_some(responses_path.as_path()))
    }

    fn split(&self) -> Result<DatasetSplit> {
        io::read_split(&self.cfg.split_path())
    }

    fn predictions(&self, scheme: &CategoryScheme) -> Result<HashMap<String, DirichletParams>> {
        io::read_params(&self.cfg.predictions_path(), scheme.len())
    }
}

pub fn run(ctx: &Context, command: &Command) -> Result<String> {
    match command {
        Command::Simulate => simulate(ctx),
        Command::Split => split(ctx),
        Command::Infer => infer(ctx),
        Command::Train => train(ctx),
        Command::Predict { synthetic } => predict(ctx, *synthetic),
        Command::Eval => eval(ctx),
        Command::Curve { split } => curve(ctx, *split),
        Command::Calibrate => calibrate(ctx),
        Command::Ambiguity => ambiguity_bins(ctx),
        Command::Repeats { exclude_automated } => repeats(ctx, ctx.cfg.prior == PriorKind::Model, *exclude_automated),
        Command::Pipeline => pipeline(ctx),
    }
}

pub fn simulate(ctx: &Context) -> Result<String> {
    let cfg = &ctx.cfg;
    let tasks = sim::simulate(&cfg.sim)?;
    let scheme = CategoryScheme::anonymous(cfg.sim.num_proper)?;
    io::write_scheme(&cfg.scheme_path(), &scheme)?;
    io::write_tasks(&cfg.tasks_path(), &tasks)?;
    io::write_responses(&cfg.responses_path(), &scheme, &tasks)?;
    let responses: usize = tasks.iter().map(|t| t.responses.len()).sum();
    Ok(format!("simulated {} tasks, {responses} responses", tasks.len()))
}

pub fn split(ctx: &Context) -> Result<String> {
    let scheme = ctx.scheme()?;
    let tasks = ctx.dataset(&scheme, false)?;
    let split = split_dataset(&tasks, ctx.cfg.split_ratios, |t| t.group_key(), ctx.cfg.seed)?;
    io::write_split(&ctx.cfg.split_path(), &split)?;
    Ok(format!(
        "split {} tasks: train {}, val {}, test {}",
        tasks.len(),
        split.train.len(),
        split.val.len(),
        split.test.len()
    ))
}

fn features(task: &TaskRecord) -> Result<&[f64]> {
    task.features
        .as_deref()
        .ok_or_else(|| CliError::Input(format!("task {:?} has no features", task.task_id)))
}

fn informed_prior(model: &crowdprior_core::head::HeadModel, task: &TaskRecord, blend: f64) -> Result<DirichletParams> {
    Ok(blend_prior(&head_forward(model, features(task)?, 0)?, blend)?)
}

fn load_model(ctx: &Context, scheme: &CategoryScheme) -> Result<crowdprior_core::head::HeadModel> {
    let model = io::read_model(&ctx.cfg.model_path())?;
    if model.categories() != scheme.len() {
        return Err(CliError::Input(format!(
            "model predicts {} categories, scheme has {}",
            model.categories(),
            scheme.len()
        )));
    }
    Ok(model)
}

pub fn infer(ctx: &Context) -> Result<String> {
    let scheme = ctx.scheme()?;
    let tasks = ctx.dataset(&scheme, true)?;
    let model = match ctx.cfg.prior {
        PriorKind::Uniform => None,
        PriorKind::Model => Some(load_model(ctx, &scheme)?),
    };
    let mut lines = Vec::with_capacity(tasks.len());
    for task in &tasks {
        let prior = match &model {
            None => uniform_prior(&scheme),
            Some(m) => informed_prior(m, task, ctx.cfg.blend)?,
        };
        let counts = tally(&task.responses, &scheme)?;
        lines.push(io::ParamsLine {
            task_id: task.task_id.clone(),
            alpha: posterior(&prior, &counts)?.into_inner(),
            n: counts.total(),
        });
    }
    io::write_jsonl(&ctx.cfg.output("posteriors.jsonl"), &lines)?;
    Ok(format!("wrote {} posteriors", lines.len()))
}

/// Tasks of one split in split order.
fn select<'a>(tasks: &'a [TaskRecord], ids: &[String]) -> Result<Vec<&'a TaskRecord>> {
    let index: HashMap<&str, &TaskRecord> = tasks.iter().map(|t| (t.task_id.as_str(), t)).collect();
    ids.iter()
        .map(|id| {
            index
                .get(id.as_str())
                .copied()
                .ok_or_else(|| CliError::Input(format!("split names unknown task {id:?}")))
        })
        .collect()
}

fn ids_of(split: &DatasetSplit, name: SplitName) -> &[String] {
    match name {
        SplitName::Train => &split.train,
        SplitName::Val => &split.val,
        SplitName::Test => &split.test,
    }
}

/// Empirical response frequencies; `None` without responses.
fn reference(task: &TaskRecord, scheme: &CategoryScheme) -> Result<Option<SoftLabel>> {
    Ok(tally(&task.responses, scheme)?.frequencies())
}

/// Hard class weights from majority labels of the training tasks.
fn class_weights(train: &[&TaskRecord], scheme: &CategoryScheme) -> Result<Vec<f64>> {
    let mut counts = vec![0u64; scheme.len()];
    for task in train {
        if let Some(q) = reference(task, scheme)? {
            counts[q.argmax()] += 1;
        }
    }
    Ok(hard_weights(&counts)?)
}

#[derive(Serialize)]
struct TrainFile<'a> {
    provenance: Provenance,
    train_tasks: usize,
    val_tasks: usize,
    class_weights: &'a [f64],
    report: &'a TrainReport,
}

pub fn train(ctx: &Context) -> Result<String> {
    let scheme = ctx.scheme()?;
    let tasks = ctx.dataset(&scheme, true)?;
    let split = ctx.split()?;
    let train_tasks = select(&tasks, &split.train)?;
    let weights = class_weights(&train_tasks, &scheme)?;
    let prior = uniform_prior(&scheme);
    let examples = |ids: &[String]| -> Result<Vec<TrainExample>> {
        let mut out = Vec::new();
        for task in select(&tasks, ids)? {
            let counts = tally(&task.responses, &scheme)?;
            let Some(q) = counts.frequencies() else { continue };
            out.push(TrainExample {
                features: features(task)?.to_vec(),
                target: posterior(&prior, &counts)?,
                n: counts.total(),
                weight: soft_weight(&q, &weights)?,
            });
        }
        Ok(out)
    };
    let (train_set, val_set) = (examples(&split.train)?, examples(&split.val)?);
    let (model, report) = train_head(&train_set, &val_set, scheme.len() as f64, &ctx.cfg.train)?;
    io::write_model(&ctx.cfg.model_path(), &model)?;
    let file = TrainFile {
        provenance: ctx.provenance("train"),
        train_tasks: train_set.len(),
        val_tasks: val_set.len(),
        class_weights: &weights,
        report: &report,
    };
    io::write_text(&ctx.cfg.output("train_report.json"), &report_json(&file))?;
    let selected = match report.selected_epoch {
        0 => report.initial_val_loss,
        epoch => report.val_loss[epoch - 1],
    };
    Ok(format!(
        "trained on {} tasks: val loss {} -> {} (epoch {})",
        train_set.len(),
        float_cell(report.initial_val_loss),
        float_cell(selected),
        report.selected_epoch
    ))
}

pub fn predict(ctx: &Context, synthetic: bool) -> Result<String> {
    let scheme = ctx.scheme()?;
    let tasks = ctx.dataset(&scheme, false)?;
    let n = ctx.cfg.inference_n;
    let model = if synthetic { None } else { Some(load_model(ctx, &scheme)?) };
    let mut lines = Vec::with_capacity(tasks.len());
    for task in &tasks {
        let alpha = match &model {
            Some(m) => head_forward(m, features(task)?, n)?,
            None => {
                let mut rng = derived_rng(ctx.cfg.seed, "synthetic-predictor", stable_hash(task.task_id.as_bytes()));
                synthetic_predictor(task, n, &ctx.cfg.sim, &mut rng)?
            }
        };
        lines.push(io::ParamsLine {
            task_id: task.task_id.clone(),
            alpha: alpha.into_inner(),
            n,
        });
    }
    io::write_jsonl(&ctx.cfg.predictions_path(), &lines)?;
    let source = if synthetic { "synthetic predictor" } else { "head" };
    Ok(format!("wrote {} predictions from the {source} at n = {n}", lines.len()))
}

/// Predicted modes and crowd references for the tasks of a split that have
/// responses.
struct Scored<'a> {
    tasks: Vec<&'a TaskRecord>,
    predicted: Vec<SoftLabel>,
    reference: Vec<SoftLabel>,
}

impl Scored<'_> {
    fn confidences(&self) -> Vec<f64> {
        self.predicted.iter().map(confidence).collect()
    }

    fn correct(&self) -> Vec<bool> {
        self.predicted
            .iter()
            .zip(&self.reference)
            .map(|(p, r)| p.argmax() == r.argmax())
            .collect()
    }
}

fn score<'a>(
    tasks: &'a [TaskRecord],
    ids: &[String],
    scheme: &CategoryScheme,
    predictions: &HashMap<String, DirichletParams>,
) -> Result<Scored<'a>> {
    let mut out = Scored {
        tasks: Vec::new(),
        predicted: Vec::new(),
        reference: Vec::new(),
    };
    for task in select(tasks, ids)? {
        let Some(r) = reference(task, scheme)? else { continue };
        let alpha = predictions
            .get(&task.task_id)
            .ok_or_else(|| CliError::Input(format!("no prediction for task {:?}", task.task_id)))?;
        out.tasks.push(task);
        out.predicted.push(posterior_mode(alpha));
        out.reference.push(r);
    }
    if out.tasks.is_empty() {
        return Err(CliError::Input("split has no tasks with responses".into()));
    }
    Ok(out)
}

#[derive(Serialize)]
struct EvalFile<'a> {
    provenance: Provenance,
    split: SplitName,
    class_weights: &'a [f64],
    metrics: &'a MetricsReport,
}

pub fn eval(ctx: &Context) -> Result<String> {
    let scheme = ctx.scheme()?;
    let tasks = ctx.dataset(&scheme, true)?;
    let split = ctx.split()?;
    let predictions = ctx.predictions(&scheme)?;
    let weights = class_weights(&select(&tasks, &split.train)?, &scheme)?;
    let test = score(&tasks, &split.test, &scheme, &predictions)?;
    let report = metrics::evaluate(&test.predicted, &test.reference, Some(&weights))?;
    let file = EvalFile {
        provenance: ctx.provenance("eval"),
        split: SplitName::Test,
        class_weights: &weights,
        metrics: &report,
    };
    io::write_text(&ctx.cfg.output("report.json"), &report_json(&file))?;
    Ok(format!(
        "test: {} tasks, acc {}, mean D {}",
        report.n_tasks,
        float_cell(report.acc),
        float_cell(report.mean_D)
    ))
}

pub fn curve(ctx: &Context, which: SplitName) -> Result<String> {
    let scheme = ctx.scheme()?;
    let tasks = ctx.dataset(&scheme, true)?;
    let split = ctx.split()?;
    let predictions = ctx.predictions(&scheme)?;
    let scored = score(&tasks, ids_of(&split, which), &scheme, &predictions)?;
    let boot = autothresh::bootstrap_curves(&scored.confidences(), &scored.correct(), ctx.cfg.bootstrap, ctx.cfg.seed)?;
    let rows = boot.band.iter().map(|p| {
        vec![
            float_cell(p.threshold),
            float_cell(p.automation),
            opt_cell(p.acc_q025),
            opt_cell(p.acc_q50),
            opt_cell(p.acc_q975),
        ]
    });
    let text = csv(
        &ctx.provenance_line("curve"),
        &["threshold", "automation", "acc_q025", "acc_q50", "acc_q975"],
        rows,
    );
    io::write_text(&ctx.cfg.output("curve.csv"), &text)?;
    Ok(format!("curve over {} tasks with {} thresholds", scored.tasks.len(), boot.band.len()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationFile {
    pub provenance: Provenance,
    pub target_accuracy: f64,
    pub bootstrap: usize,
    pub val_tasks: usize,
    pub test_tasks: usize,
    /// Median of the realized thresholds; `null` abstains from automation.
    pub deployment_threshold: Threshold,
    pub automation_ci: Interval,
    pub accuracy_ci: Option<Interval>,
    pub abstention_rate: f64,
    pub thresholds: Vec<Threshold>,
}

pub fn calibrate(ctx: &Context) -> Result<String> {
    let scheme = ctx.scheme()?;
    let tasks = ctx.dataset(&scheme, true)?;
    let split = ctx.split()?;
    let predictions = ctx.predictions(&scheme)?;
    let val = score(&tasks, &split.val, &scheme, &predictions)?;
    let test = score(&tasks, &split.test, &scheme, &predictions)?;
    let cal = autothresh::calibrate(
        &val.confidences(),
        &val.correct(),
        &test.confidences(),
        &test.correct(),
        ctx.cfg.target_accuracy,
        ctx.cfg.bootstrap,
        ctx.cfg.seed,
    )?;
    let file = CalibrationFile {
        provenance: ctx.provenance("calibrate"),
        target_accuracy: cal.target_accuracy,
        bootstrap: ctx.cfg.bootstrap,
        val_tasks: val.tasks.len(),
        test_tasks: test.tasks.len(),
        deployment_threshold: cal.deployment_threshold,
        automation_ci: cal.test.automation_ci,
        accuracy_ci: cal.test.accuracy_ci,
        abstention_rate: cal.test.abstention_rate,
        thresholds: cal.thresholds,
    };
    io::write_text(&ctx.cfg.output("calibration.json"), &report_json(&file))?;
    let acc = file
        .accuracy_ci
        .map_or_else(|| "none".into(), |i| format!("[{}, {}]", float_cell(i.lo), float_cell(i.hi)));
    Ok(format!(
        "test automation [{}, {}], accuracy {acc}, abstention rate {}",
        float_cell(file.automation_ci.lo),
        float_cell(file.automation_ci.hi),
        float_cell(file.abstention_rate)
    ))
}

pub fn read_calibration(path: &std::path::Path) -> Result<CalibrationFile> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::parse(path, e.line(), e))
}

pub fn ambiguity_bins(ctx: &Context) -> Result<String> {
    let scheme = ctx.scheme()?;
    let tasks = ctx.dataset(&scheme, true)?;
    let split = ctx.split()?;
    let predictions = ctx.predictions(&scheme)?;
    let test = score(&tasks, &split.test, &scheme, &predictions)?;
    let cfg = &ctx.cfg.ambiguity;
    let predicted = test.predicted.iter().map(|q| ambiguity(q, cfg)).collect::<Result<Vec<_>, _>>()?;
    let actual = test.reference.iter().map(|q| ambiguity(q, cfg)).collect::<Result<Vec<_>, _>>()?;
    let distances: Vec<f64> = test
        .predicted
        .iter()
        .zip(&test.reference)
        .map(|(p, r)| soft_distance(p, r))
        .collect();
    let bins = autothresh::ambiguity_calibration(&predicted, &actual, &distances, ctx.cfg.bins)?;
    let rows = bins.iter().map(|b| {
        vec![
            float_cell(b.lo),
            float_cell(b.hi),
            b.count.to_string(),
            opt_cell(b.mean_predicted),
            opt_cell(b.mean_actual),
            opt_cell(b.mean_distance),
        ]
    });
    let text = csv(
        &ctx.provenance_line("ambiguity"),
        &["lo", "hi", "count", "mean_predicted", "mean_actual", "mean_distance"],
        rows,
    );
    io::write_text(&ctx.cfg.output("bins.csv"), &text)?;
    let occupied = bins.iter().filter(|b| b.count > 0).count();
    Ok(format!("{} test tasks in {occupied} of {} bins", test.tasks.len(), bins.len()))
}

pub fn repeats(ctx: &Context, informed: bool, exclude_automated: bool) -> Result<String> {
    let scheme = ctx.scheme()?;
    let tasks = ctx.dataset(&scheme, true)?;
    let split = ctx.split()?;
    let mut test: Vec<&TaskRecord> = select(&tasks, &split.test)?
        .into_iter()
        .filter(|t| !t.responses.is_empty())
        .collect();
    let before = test.len();
    if exclude_automated {
        let cal = read_calibration(&ctx.cfg.output("calibration.json"))?;
        let predictions = ctx.predictions(&scheme)?;
        let mut kept = Vec::with_capacity(test.len());
        for task in test {
            let alpha = predictions
                .get(&task.task_id)
                .ok_or_else(|| CliError::Input(format!("no prediction for task {:?}", task.task_id)))?;
            // The stored threshold carries nine significant digits.
            if !cal.deployment_threshold.retains(round_sig(confidence(&posterior_mode(alpha)))) {
                kept.push(task);
            }
        }
        test = kept;
    }
    if test.is_empty() {
        return Err(CliError::Input("no test tasks left for the repeats analysis".into()));
    }
    let priors = if informed {
        let model = load_model(ctx, &scheme)?;
        Some(test.iter().map(|t| informed_prior(&model, t, ctx.cfg.blend)).collect::<Result<Vec<_>>>()?)
    } else {
        None
    };
    let owned: Vec<TaskRecord> = test.iter().map(|&t| t.clone()).collect();
    let summary = repeats_summary(
        &owned,
        scheme.len(),
        priors.as_deref(),
        ctx.cfg.max_repeats.unwrap_or(usize::MAX),
        ctx.cfg.permutations,
        ctx.cfg.seed,
    )?;
    let row = |variant: &str, s: &StepSummary| {
        vec![
            variant.to_owned(),
            s.step.to_string(),
            float_cell(s.q025),
            float_cell(s.q25),
            float_cell(s.median),
            float_cell(s.q75),
            float_cell(s.q975),
            s.n_tasks.to_string(),
        ]
    };
    let mut rows: Vec<Vec<String>> = summary.uniform.iter().map(|s| row("uniform", s)).collect();
    if let Some(inf) = &summary.informed {
        rows.extend(inf.iter().map(|s| row("informed", s)));
    }
    let provenance = format!(
        "{} tasks={} excluded_automated={}",
        ctx.provenance_line("repeats"),
        owned.len(),
        before - owned.len()
    );
    let text = csv(
        &provenance,
        &["variant", "step", "q025", "q25", "median", "q75", "q975", "n_tasks"],
        rows,
    );
    io::write_text(&ctx.cfg.output("repeats.csv"), &text)?;
    let first = |s: &[StepSummary]| s.first().map_or_else(String::new, |s| float_cell(s.median));
    let mut msg = format!("{} tasks, step-1 median distance uniform {}", owned.len(), first(&summary.uniform));
    if let Some(inf) = &summary.informed {
        msg.push_str(&format!(", informed {}", first(inf)));
    }
    Ok(msg)
}

/// Every stage in order. Simulation is skipped when the config names a
/// tasks file.
pub fn pipeline(ctx: &Context) -> Result<String> {
    let mut log = Vec::new();
    let mut resolved = ctx.cfg.clone();
    resolved.paths.out_dir = None;
    io::write_text(&ctx.cfg.output("config.toml"), &resolved.to_toml())?;
    if ctx.cfg.paths.tasks.is_none() {
        log.push(simulate(ctx)?);
    }
    log.push(split(ctx)?);
    log.push(train(ctx)?);
    log.push(infer(ctx)?);
    log.push(predict(ctx, false)?);
    log.push(eval(ctx)?);
    log.push(curve(ctx, SplitName::Test)?);
    log.push(calibrate(ctx)?);
    log.push(ambiguity_bins(ctx)?);
    log.push(repeats(ctx, true, true)?);
    Ok(log.join("\n"))
}

/// Artifact names written below the output directory by [`pipeline`].
pub const PIPELINE_ARTIFACTS: [&str; 14] = [
    "config.toml",
    "scheme.json",
    "tasks.jsonl",
    "responses.jsonl",
    "split.json",
    "model.txt",
    "train_report.json",
    "posteriors.jsonl",
    "predictions.jsonl",
    "report.json",
    "curve.csv",
    "calibration.json",
    "bins.csv",
    "repeats.csv",
];
