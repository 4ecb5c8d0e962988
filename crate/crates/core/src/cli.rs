//! Command implementations behind the `sain` binary.
//!
//! Every command first resolves a [`RunConfig`]: defaults, then the JSON file
//! given by `--config`, then command-line flags. The resolved config is
//! written into every artifact the command produces.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::autodiff::Checkpoint;
use crate::cell::AblationMode;
use crate::data::example::dataset_to_string;
use crate::data::{gen_synthetic_chain, load_dataset, ClauseOrder, RawExample, SynthConfig, TaggedExample, TaskKind, Vocabs};
use crate::encoder::{ContextMode, ContextVectors, EncoderConfig};
use crate::error::{Result, SainError};
use crate::eval::{evaluate, export_trace, render_heatmap, render_table, sweep_noise, sweep_steps, Experiment};
use crate::heads::DEFAULT_MAX_SPAN;
use crate::model::{ModelConfig, Sain};
use crate::tensor::Real;
use crate::train::{gradcheck_model, train_loop, GradcheckInstance, TrainConfig, TrainData, Trainer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Single,
    Double,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    #[default]
    Steps,
    Noise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSettings {
    pub kind: SweepKind,
    pub m_list: Vec<usize>,
    pub noise: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            kind: SweepKind::Steps,
            m_list: (1..=7).collect(),
            noise: vec![0.0, 0.2, 0.4],
            seeds: vec![0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GradcheckSettings {
    pub d_s: usize,
    pub d_w: usize,
    pub passage_len: usize,
    pub question_len: usize,
    /// Trailing padded passage positions.
    pub masked: usize,
    pub tolerance: f64,
}

impl Default for GradcheckSettings {
    fn default() -> Self {
        GradcheckSettings {
            d_s: 4,
            d_w: 4,
            passage_len: 12,
            question_len: 6,
            masked: 2,
            tolerance: crate::train::gradcheck::DEFAULT_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceSettings {
    pub index: usize,
    pub id: Option<String>,
}

/// Everything a command needs, merged from defaults, config file and flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub command: String,
    pub seed: u64,
    pub precision: Precision,
    pub task: Option<TaskKind>,
    #[serde(rename = "M")]
    pub steps: Option<usize>,
    pub ablation: Option<AblationMode>,
    pub encoder: EncoderConfig,
    pub shared_cell: bool,
    pub max_span_len: usize,
    pub num_classes: usize,
    pub train: TrainConfig,
    pub data: Option<PathBuf>,
    pub eval_data: Option<PathBuf>,
    pub vectors: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub resume: Option<PathBuf>,
    /// Output location; not embedded so artifacts do not depend on it.
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    pub synth: SynthConfig,
    pub sweep: SweepSettings,
    pub gradcheck: GradcheckSettings,
    pub trace: TraceSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: String::new(),
            seed: 0,
            precision: Precision::Single,
            task: None,
            steps: None,
            ablation: None,
            encoder: EncoderConfig::default(),
            shared_cell: true,
            max_span_len: DEFAULT_MAX_SPAN,
            num_classes: 3,
            train: TrainConfig::default(),
            data: None,
            eval_data: None,
            vectors: None,
            checkpoint: None,
            resume: None,
            out: None,
            synth: SynthConfig::default(),
            sweep: SweepSettings::default(),
            gradcheck: GradcheckSettings::default(),
            trace: TraceSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| SainError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| SainError::Parse {
            context: path.display().to_string(),
            detail: e.to_string(),
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("run config serialises")
    }

    fn task(&self) -> TaskKind {
        self.task.unwrap_or(TaskKind::Mrc)
    }

    fn model_config(&self, vocabs: &Vocabs) -> ModelConfig {
        ModelConfig {
            task: self.task(),
            steps: self.steps.unwrap_or(3),
            encoder: self.encoder,
            ablation: self.ablation.unwrap_or_default(),
            shared_cell: self.shared_cell,
            num_tokens: vocabs.tokens.len(),
            num_labels: vocabs.labels.len(),
            num_classes: self.num_classes,
            max_span_len: self.max_span_len,
        }
    }

    fn require<'a>(&self, value: &'a Option<PathBuf>, flag: &str) -> Result<&'a PathBuf> {
        value
            .as_ref()
            .ok_or_else(|| SainError::Config(format!("missing {flag} (required by `{}`)", self.command)))
    }
}

#[derive(Debug, Parser)]
#[command(name = "sain", version, about = "Train, evaluate and inspect semantics-aware reasoning models")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Default, Args)]
pub struct CommonArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub precision: Option<Precision>,
    /// Reasoning steps and structures per sentence.
    #[arg(long = "M", global = true)]
    pub m: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub ablation: Option<AblationMode>,
    #[arg(long, global = true, value_enum)]
    pub task: Option<TaskKind>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write checkpoints plus a metrics log.
    Train(TrainArgs),
    /// Score a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Export per-step attention for one example.
    Trace(TraceArgs),
    /// Compare analytic gradients of a fresh model with finite differences.
    Gradcheck(GradcheckArgs),
    /// Generate a synthetic chain-reasoning dataset.
    Synth(SynthArgs),
    /// Retrain across step counts or label-noise levels.
    Sweep(SweepArgs),
}

#[derive(Debug, Default, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub d_s: Option<usize>,
    #[arg(long)]
    pub d_w: Option<usize>,
    #[arg(long, value_enum)]
    pub encoder: Option<ContextMode>,
    /// Separate cell weights for every step.
    #[arg(long)]
    pub per_step_cell: bool,
}

#[derive(Debug, Default, Args)]
pub struct OptimArgs {
    /// Optimizer steps.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub warmup_ratio: Option<f64>,
    #[arg(long)]
    pub clip_norm: Option<f64>,
    /// Disable gradient clipping.
    #[arg(long, conflicts_with = "clip_norm")]
    pub no_clip: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Precomputed contextual vectors.
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub vectors: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    /// Position of the example in the dataset.
    #[arg(long, conflicts_with = "id")]
    pub index: Option<usize>,
    #[arg(long)]
    pub id: Option<String>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub d_s: Option<usize>,
    #[arg(long)]
    pub d_w: Option<usize>,
    #[arg(long)]
    pub passage_len: Option<usize>,
    #[arg(long)]
    pub question_len: Option<usize>,
    #[arg(long)]
    pub masked: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub chain_len: Option<usize>,
    #[arg(long)]
    pub count: Option<usize>,
    /// Size of the entity-name pool.
    #[arg(long)]
    pub vocab: Option<usize>,
    #[arg(long)]
    pub no_decoys: bool,
    /// Add a role-swapped second predicate to every clause.
    #[arg(long)]
    pub companions: bool,
    #[arg(long)]
    pub shuffled: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub kind: Option<SweepKind>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub eval_data: Option<PathBuf>,
    /// Comma-separated step counts.
    #[arg(long, value_delimiter = ',')]
    pub m_list: Option<Vec<usize>>,
    /// Comma-separated noise proportions.
    #[arg(long, value_delimiter = ',')]
    pub noise: Option<Vec<f64>>,
    /// Comma-separated seeds; each cell is averaged over them.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
}

fn apply_model(run: &mut RunConfig, a: &ModelArgs) {
    if let Some(v) = a.d_s {
        run.encoder.d_s = v;
    }
    if let Some(v) = a.d_w {
        run.encoder.d_w = v;
    }
    if let Some(v) = a.encoder {
        run.encoder.mode = v;
    }
    if a.per_step_cell {
        run.shared_cell = false;
    }
}

fn apply_optim(run: &mut RunConfig, a: &OptimArgs) {
    if let Some(v) = a.steps {
        run.train.max_steps = v;
    }
    if let Some(v) = a.lr {
        run.train.lr = v;
    }
    if let Some(v) = a.batch_size {
        run.train.batch_size = v;
    }
    if let Some(v) = a.warmup_ratio {
        run.train.warmup_ratio = v;
    }
    if let Some(v) = a.clip_norm {
        run.train.clip_norm = Some(v);
    }
    if a.no_clip {
        run.train.clip_norm = None;
    }
}

fn set<T>(slot: &mut Option<T>, value: &Option<T>)
where
    T: Clone,
{
    if value.is_some() {
        slot.clone_from(value);
    }
}

/// Defaults, then the config file, then flags.
pub fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut run = match &cli.common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let c = &cli.common;
    if let Some(s) = c.seed {
        run.seed = s;
    }
    if let Some(p) = c.precision {
        run.precision = p;
    }
    set(&mut run.out, &c.out);
    set(&mut run.steps, &c.m);
    set(&mut run.ablation, &c.ablation);
    set(&mut run.task, &c.task);
    match &cli.command {
        Command::Train(a) => {
            run.command = "train".into();
            set(&mut run.data, &a.data);
            set(&mut run.vectors, &a.vectors);
            set(&mut run.resume, &a.resume);
            if a.checkpoint_every.is_some() {
                run.train.checkpoint_every = a.checkpoint_every;
            }
            apply_model(&mut run, &a.model);
            apply_optim(&mut run, &a.optim);
        }
        Command::Eval(a) => {
            run.command = "eval".into();
            set(&mut run.data, &a.data);
            set(&mut run.checkpoint, &a.checkpoint);
            set(&mut run.vectors, &a.vectors);
        }
        Command::Trace(a) => {
            run.command = "trace".into();
            set(&mut run.data, &a.data);
            set(&mut run.checkpoint, &a.checkpoint);
            set(&mut run.vectors, &a.vectors);
            if let Some(i) = a.index {
                run.trace.index = i;
                run.trace.id = None;
            }
            set(&mut run.trace.id, &a.id);
        }
        Command::Gradcheck(a) => {
            run.command = "gradcheck".into();
            let g = &mut run.gradcheck;
            for (slot, v) in [
                (&mut g.d_s, a.d_s),
                (&mut g.d_w, a.d_w),
                (&mut g.passage_len, a.passage_len),
                (&mut g.question_len, a.question_len),
                (&mut g.masked, a.masked),
            ] {
                if let Some(v) = v {
                    *slot = v;
                }
            }
            if let Some(t) = a.tolerance {
                g.tolerance = t;
            }
        }
        Command::Synth(a) => {
            run.command = "synth".into();
            let s = &mut run.synth;
            if let Some(v) = a.chain_len {
                s.chain_len = v;
            }
            if let Some(v) = a.count {
                s.count = v;
            }
            if let Some(v) = a.vocab {
                s.vocab = v;
            }
            if a.no_decoys {
                s.decoys = false;
            }
            if a.companions {
                s.companions = true;
            }
            if a.shuffled {
                s.clause_order = ClauseOrder::Shuffled;
            }
        }
        Command::Sweep(a) => {
            run.command = "sweep".into();
            set(&mut run.data, &a.data);
            set(&mut run.eval_data, &a.eval_data);
            if let Some(k) = a.kind {
                run.sweep.kind = k;
            }
            if let Some(v) = &a.m_list {
                run.sweep.m_list.clone_from(v);
            }
            if let Some(v) = &a.noise {
                run.sweep.noise.clone_from(v);
            }
            if let Some(v) = &a.seeds {
                run.sweep.seeds.clone_from(v);
            }
            apply_model(&mut run, &a.model);
            apply_optim(&mut run, &a.optim);
        }
    }
    run.train.seed = run.seed;
    run.synth.seed = run.seed;
    Ok(run)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| SainError::io(dir, e))?;
    }
    let mut text = serde_json::to_string_pretty(value).expect("artifact serialises");
    text.push('\n');
    fs::write(path, text).map_err(|e| SainError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| SainError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| SainError::io(path, e))
}

fn load_vectors(run: &RunConfig, mode: ContextMode) -> Result<Option<ContextVectors>> {
    match mode {
        ContextMode::Toy => Ok(None),
        ContextMode::Precomputed => Ok(Some(ContextVectors::load(run.require(&run.vectors, "--vectors")?)?)),
    }
}

fn cmd_train<T: Real>(run: &RunConfig) -> Result<bool> {
    let data = run.require(&run.data, "--data")?;
    let raw = load_dataset(data, run.task())?;
    let out = run.out.clone().unwrap_or_else(|| PathBuf::from("sain-train"));
    let (mut trainer, vocabs) = match &run.resume {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            let vocabs = vocabs_from(&ck)?;
            let expected = run.model_config(&vocabs);
            let mut trainer = Trainer::<T>::from_checkpoint(&ck, Some(&expected))?;
            trainer.config.max_steps = run.train.max_steps;
            (trainer, vocabs)
        }
        None => {
            let vocabs = Vocabs::build(&raw);
            let model = Sain::<T>::new(run.model_config(&vocabs), run.seed)?;
            (Trainer::new(model, run.train.clone())?, vocabs)
        }
    };
    let steps = trainer.model.config.steps;
    let tagged = vocabs.tag_all(&raw, steps)?;
    let vectors = load_vectors(run, trainer.model.config.encoder.mode)?;
    let meta = serde_json::json!({ "run": run.to_json(), "vocabs": vocabs });
    let started = Instant::now();
    let outcome = train_loop(
        &mut trainer,
        TrainData {
            examples: &tagged,
            vectors: vectors.as_ref(),
        },
        Some(&out),
        meta,
    )?;
    write_json(&out.join("run.json"), &run.to_json())?;
    let last = outcome.records.last();
    println!(
        "trained {} steps in {:.1}s; final loss {}; checkpoint {}",
        trainer.step,
        started.elapsed().as_secs_f64(),
        last.map_or("n/a".to_string(), |r| format!("{:.4}", r.loss)),
        outcome.final_checkpoint.as_deref().unwrap_or(Path::new("-")).display()
    );
    Ok(true)
}

fn vocabs_from(ck: &Checkpoint) -> Result<Vocabs> {
    let mut v: Vocabs = serde_json::from_value(ck.manifest.meta["vocabs"].clone())
        .map_err(|e| SainError::Checkpoint(format!("vocabularies: {e}")))?;
    v.reindex();
    Ok(v)
}

/// Loads a checkpoint and checks it against any model settings the user
/// gave explicitly.
fn load_model<T: Real>(run: &mut RunConfig) -> Result<(Sain<T>, Vocabs)> {
    let path = run.require(&run.checkpoint, "--checkpoint")?;
    let ck = Checkpoint::load(path)?;
    let model = Sain::<T>::from_checkpoint(&ck, None)?;
    let stored = &model.config;
    if let Some(m) = run.steps.filter(|&m| m != stored.steps) {
        return Err(SainError::Incompatible(format!(
            "checkpoint trained with M = {}, requested M = {m}",
            stored.steps
        )));
    }
    if let Some(a) = run.ablation.filter(|&a| a != stored.ablation) {
        return Err(SainError::Incompatible(format!(
            "checkpoint trained with ablation {}, requested {a}",
            stored.ablation
        )));
    }
    if let Some(t) = run.task.filter(|&t| t != stored.task) {
        return Err(SainError::Incompatible(format!(
            "checkpoint trained for {:?}, requested {t:?}",
            stored.task
        )));
    }
    run.steps = Some(stored.steps);
    run.ablation = Some(stored.ablation);
    run.task = Some(stored.task);
    run.encoder = stored.encoder;
    run.shared_cell = stored.shared_cell;
    run.max_span_len = stored.max_span_len;
    run.num_classes = stored.num_classes;
    Ok((model, vocabs_from(&ck)?))
}

fn tagged_dataset(run: &RunConfig, vocabs: &Vocabs, steps: usize) -> Result<Vec<TaggedExample>> {
    let raw = load_dataset(run.require(&run.data, "--data")?, run.task())?;
    vocabs.tag_all(&raw, steps)
}

fn cmd_eval<T: Real>(run: &mut RunConfig) -> Result<bool> {
    run.require(&run.data, "--data")?;
    let (model, vocabs) = load_model::<T>(run)?;
    let data = tagged_dataset(run, &vocabs, model.config.steps)?;
    let vectors = load_vectors(run, model.config.encoder.mode)?;
    let mut report = evaluate(&model, &data, model.config.task, vectors.as_ref())?;
    report.run = Some(run.to_json());
    let out = run.out.clone().unwrap_or_else(|| PathBuf::from("eval.json"));
    write_json(&out, &report)?;
    match (report.exact_match, report.f1, report.accuracy) {
        (Some(em), Some(f1), _) => println!("{} examples: EM {em:.2} F1 {f1:.2}", report.records.len()),
        (_, _, Some(acc)) => println!("{} examples: accuracy {acc:.2}", report.records.len()),
        _ => {}
    }
    Ok(true)
}

fn cmd_trace<T: Real>(run: &mut RunConfig) -> Result<bool> {
    run.require(&run.data, "--data")?;
    let (model, vocabs) = load_model::<T>(run)?;
    let data = tagged_dataset(run, &vocabs, model.config.steps)?;
    let example = match &run.trace.id {
        Some(id) => data
            .iter()
            .find(|e| &e.id == id)
            .ok_or_else(|| SainError::Config(format!("no example with id {id}")))?,
        None => data.get(run.trace.index).ok_or_else(|| {
            SainError::Config(format!("index {} outside dataset of {}", run.trace.index, data.len()))
        })?,
    };
    let vectors = load_vectors(run, model.config.encoder.mode)?;
    let mut trace = export_trace(&model, example, vectors.as_ref())?;
    trace.run = Some(run.to_json());
    let heatmap = render_heatmap(&trace);
    let out = run.out.clone().unwrap_or_else(|| PathBuf::from("trace.json"));
    write_json(&out, &trace)?;
    write_text(&out.with_extension("txt"), &heatmap)?;
    print!("{heatmap}");
    Ok(true)
}

fn cmd_gradcheck(run: &RunConfig) -> Result<bool> {
    let s = &run.gradcheck;
    let config = ModelConfig {
        task: run.task(),
        steps: run.steps.unwrap_or(3),
        encoder: EncoderConfig {
            d_s: s.d_s,
            d_w: s.d_w,
            mode: ContextMode::Toy,
        },
        ablation: run.ablation.unwrap_or_default(),
        shared_cell: run.shared_cell,
        num_tokens: 20,
        num_labels: 5,
        num_classes: run.num_classes,
        max_span_len: run.max_span_len,
    };
    if s.masked >= s.passage_len {
        return Err(SainError::Config("gradcheck needs at least one unmasked passage position".into()));
    }
    let model = Sain::<f64>::new(config, run.seed)?;
    let instance = GradcheckInstance::random(&model, s.passage_len, s.question_len, s.masked, run.seed);
    let started = Instant::now();
    let report = gradcheck_model(&model, &instance, s.tolerance)?;
    let secs = started.elapsed().as_secs_f64();
    if let Some(out) = &run.out {
        write_json(
            out,
            &serde_json::json!({ "run": run.to_json(), "seconds": secs, "report": report }),
        )?;
    }
    let worst = report.worst().map_or("-", |g| g.name.as_str());
    println!(
        "{}: max relative error {:.3e} (worst {worst}, tolerance {:.0e}, {secs:.2}s)",
        if report.passed { "PASS" } else { "FAIL" },
        report.max_rel_err,
        report.tolerance
    );
    Ok(report.passed)
}

fn cmd_synth(run: &RunConfig) -> Result<bool> {
    let examples: Vec<RawExample> = gen_synthetic_chain(&run.synth)?;
    let text = dataset_to_string(&examples);
    match &run.out {
        Some(out) => {
            write_text(out, &text)?;
            let mut sidecar = out.clone().into_os_string();
            sidecar.push(".run.json");
            write_json(Path::new(&sidecar), &run.to_json())?;
            eprintln!("wrote {} examples to {}", examples.len(), out.display());
        }
        None => print!("{text}"),
    }
    Ok(true)
}

fn cmd_sweep(run: &RunConfig) -> Result<bool> {
    let task = run.task();
    let train = load_dataset(run.require(&run.data, "--data")?, task)?;
    let eval = load_dataset(run.require(&run.eval_data, "--eval-data")?, task)?;
    let exp = Experiment {
        model: run.model_config(&Vocabs::build(&train)),
        train: run.train.clone(),
        train_set: &train,
        eval_set: &eval,
        seeds: run.sweep.seeds.clone(),
    };
    let mut table = match run.sweep.kind {
        SweepKind::Steps => sweep_steps(&exp, &run.sweep.m_list)?,
        SweepKind::Noise => sweep_noise(&exp, &run.sweep.noise)?,
    };
    table.run = Some(run.to_json());
    let out = run.out.clone().unwrap_or_else(|| PathBuf::from("sweep.json"));
    write_json(&out, &table)?;
    let rendered = render_table(&table);
    write_text(&out.with_extension("txt"), &rendered)?;
    print!("{rendered}");
    Ok(true)
}

/// Runs a parsed command; `Ok(false)` means it ran but failed its check.
pub fn run(cli: &Cli) -> Result<bool> {
    let mut run = resolve(cli)?;
    match (run.command.as_str(), run.precision) {
        ("train", Precision::Single) => cmd_train::<f32>(&run),
        ("train", Precision::Double) => cmd_train::<f64>(&run),
        ("eval", Precision::Single) => cmd_eval::<f32>(&mut run),
        ("eval", Precision::Double) => cmd_eval::<f64>(&mut run),
        ("trace", Precision::Single) => cmd_trace::<f32>(&mut run),
        ("trace", Precision::Double) => cmd_trace::<f64>(&mut run),
        ("gradcheck", _) => cmd_gradcheck(&run),
        ("synth", _) => cmd_synth(&run),
        ("sweep", _) => cmd_sweep(&run),
        (other, _) => Err(SainError::Config(format!("unknown command {other}"))),
    }
}

/// Entry point of the binary.
pub fn main_with_args<I, S>(args: I) -> ExitCode
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                SainError::Config(_) => 2,
                _ => 1,
            })
        }
    }
}
