//! Command-line experiments: corpus synthesis, training, tagging, DocRelTime
//! prediction, scoring, and hyperparameter search.
//!
//! Every command reads an optional JSON [`RunConfig`], applies the command
//! line overrides, and writes the resolved configuration next to its
//! outputs as `config.resolved.json`. All randomness derives from the
//! config seed through named sub-seeds, so reruns reproduce every artifact
//! byte for byte.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::corpus::{generate_synthetic_corpus, load_corpus, save_corpus, CorpusFormat, Document, GeneratorConfig, Span};
use crate::docreltime::{
    evaluate as evaluate_phase2, gold_label_map, parse_predictions, predict_corpus, render_predictions, train_phase2, Phase2Config,
    Phase2Mode, Phase2Model,
};
use crate::embeddings::{build_vocab, load_word2vec_text};
use crate::error::{Error, Result};
use crate::eval::{align_documents, score_corpus, score_labels, score_spans, MatchMode, PrfScore, ScoreReport};
use crate::factorgraph::{CrfTagger, GibbsConfig, ModelKind, SgdConfig, TaggerConfig};
use crate::rnn::{preset_config, random_grid_search, Candidate, Preset, RnnTagger, SearchSpace, Task};
use crate::util::{sub_seed, write_atomic};

pub const RESOLVED_CONFIG: &str = "config.resolved.json";
pub const MANIFEST: &str = "manifest.json";
pub const TRAINING_LOG: &str = "training_log.json";
const RNN_MODEL: &str = "model.json";

/// What `train` builds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainTask {
    Tokenize,
    Pos,
    Timex3,
    Event,
    CrfRun1,
    CrfRun2,
    CrfRun3,
    Phase2,
}

impl TrainTask {
    const ALL: [TrainTask; 8] = [
        TrainTask::Tokenize,
        TrainTask::Pos,
        TrainTask::Timex3,
        TrainTask::Event,
        TrainTask::CrfRun1,
        TrainTask::CrfRun2,
        TrainTask::CrfRun3,
        TrainTask::Phase2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TrainTask::Tokenize => "tokenize",
            TrainTask::Pos => "pos",
            TrainTask::Timex3 => "timex3",
            TrainTask::Event => "event",
            TrainTask::CrfRun1 => "crf-run1",
            TrainTask::CrfRun2 => "crf-run2",
            TrainTask::CrfRun3 => "crf-run3",
            TrainTask::Phase2 => "phase2",
        }
    }

    /// The recurrent tagger task, if this is one.
    pub fn rnn_task(self) -> Option<Task> {
        match self {
            TrainTask::Tokenize => Some(Task::Tokenizer),
            TrainTask::Pos => Some(Task::Pos),
            TrainTask::Timex3 => Some(Task::Timex3),
            TrainTask::Event => Some(Task::Event),
            _ => None,
        }
    }

    /// The feature run, if this is a factor-graph tagger.
    pub fn crf_run(self) -> Option<u8> {
        match self {
            TrainTask::CrfRun1 => Some(1),
            TrainTask::CrfRun2 => Some(2),
            TrainTask::CrfRun3 => Some(3),
            _ => None,
        }
    }
}

impl fmt::Display for TrainTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for TrainTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown task {s:?}")))
    }
}

/// Corpus and model file locations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Training corpus.
    pub train: Option<PathBuf>,
    /// Development corpus for early stopping and search.
    pub dev: Option<PathBuf>,
    /// Corpus to tag or predict, or the prediction side of `eval`.
    pub input: Option<PathBuf>,
    /// Gold side of `eval`.
    pub gold: Option<PathBuf>,
    /// Directory written by `train`, read by `tag` and `predict`.
    pub model: Option<PathBuf>,
    /// Pretrained vectors in word2vec text format.
    pub embeddings: Option<PathBuf>,
    /// Corpus format; inferred from file extensions when absent.
    pub format: Option<CorpusFormat>,
}

/// Recurrent tagger settings. Unset fields fall back to the task preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RnnConfig {
    pub dim: usize,
    pub epochs: usize,
    /// Epochs without dev improvement before stopping.
    pub patience: usize,
    pub hidden: Option<usize>,
    pub context: Option<usize>,
    pub lr: Option<f64>,
    pub pad: Option<usize>,
}

impl Default for RnnConfig {
    fn default() -> Self {
        Self {
            dim: 100,
            epochs: 10,
            patience: 5,
            hidden: None,
            context: None,
            lr: None,
            pad: None,
        }
    }
}

impl RnnConfig {
    pub fn preset(&self, task: Task) -> Preset {
        let mut p = preset_config(task, self.dim);
        p.hidden = self.hidden.unwrap_or(p.hidden);
        p.context = self.context.unwrap_or(p.context);
        p.lr = self.lr.unwrap_or(p.lr);
        p.pad = self.pad.unwrap_or(p.pad);
        p
    }
}

/// Factor-graph tagger settings; the feature run comes from the task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrfConfig {
    pub klass: String,
    pub kind: ModelKind,
    pub skip_window: usize,
    pub sgd: SgdConfig,
    pub gibbs: GibbsConfig,
}

impl Default for CrfConfig {
    fn default() -> Self {
        let t = TaggerConfig::default();
        Self {
            klass: t.klass,
            kind: t.kind,
            skip_window: t.skip_window,
            sgd: t.sgd,
            gibbs: t.gibbs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub budget: usize,
    /// Training epochs per candidate.
    pub epochs: usize,
    /// Ranges to sample; defaults depend on the task's input level.
    pub space: Option<SearchSpace>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            budget: 8,
            epochs: 5,
            space: None,
        }
    }
}

/// Everything a command needs. Unknown keys are rejected at every level.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub task: Option<TrainTask>,
    /// `exact`/`overlap` for `eval`, `lr`/`lr+skip` for `predict`.
    pub mode: Option<String>,
    pub paths: PathsConfig,
    /// Output directory.
    pub output: Option<PathBuf>,
    pub generator: GeneratorConfig,
    pub rnn: RnnConfig,
    pub crf: CrfConfig,
    pub phase2: Phase2Config,
    pub search: SearchConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn output_dir(&self) -> Result<&Path> {
        self.output
            .as_deref()
            .ok_or_else(|| Error::Config("no output directory: pass --out or set \"output\"".into()))
    }

    fn task(&self) -> Result<TrainTask> {
        self.task.ok_or_else(|| Error::Config("no task: set \"task\" in the config".into()))
    }

    /// Writes the resolved config into the output directory.
    fn write_resolved(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_atomic(&dir.join(RESOLVED_CONFIG), text.as_bytes())
    }

    fn read_corpus(&self, path: Option<&Path>, what: &str) -> Result<Vec<Document>> {
        let path = path.ok_or_else(|| Error::Config(format!("no {what} corpus given")))?;
        if !path.exists() {
            return Err(Error::Config(format!("{what} corpus {} does not exist", path.display())));
        }
        load_corpus(path, self.format_of(path)?)
    }

    fn format_of(&self, path: &Path) -> Result<CorpusFormat> {
        self.paths
            .format
            .or_else(|| CorpusFormat::from_path(path))
            .ok_or_else(|| Error::Config(format!("cannot infer the corpus format of {}; set paths.format", path.display())))
    }
}

#[derive(Debug, Parser)]
#[command(name = "chronotag", version, about = "Temporal information extraction for clinical text")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Scoring mode for `eval`, decoding mode for `predict`.
    #[arg(long)]
    pub mode: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic annotated corpus (CoNLL and JSON).
    Synth {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train the model named by the config's task.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Training corpus; overrides paths.train.
        corpus: Option<PathBuf>,
    },
    /// Annotate a corpus with a trained tagger.
    Tag {
        #[command(flatten)]
        common: CommonArgs,
        /// Model directory; overrides paths.model.
        model: Option<PathBuf>,
        /// Corpus to annotate; overrides paths.input.
        input: Option<PathBuf>,
    },
    /// Predict DocRelTime labels for every event of a corpus.
    Predict {
        #[command(flatten)]
        common: CommonArgs,
        model: Option<PathBuf>,
        input: Option<PathBuf>,
    },
    /// Score predictions against gold annotations.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        gold: Option<PathBuf>,
        /// A corpus, or a DocRelTime predictions file.
        pred: Option<PathBuf>,
    },
    /// Random search over recurrent tagger hyperparameters.
    GridSearch {
        #[command(flatten)]
        common: CommonArgs,
    },
}

/// Process exit code for an error: 2 for usage and configuration
/// problems, 1 for everything that fails at run time.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::ModelKind(_) => 2,
        _ => 1,
    }
}

fn resolve(common: &CommonArgs) -> Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.output = Some(out.clone());
    }
    if let Some(mode) = &common.mode {
        config.mode = Some(mode.clone());
    }
    Ok(config)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { common } => synth(&resolve(&common)?),
        Command::Train { common, corpus } => {
            let mut config = resolve(&common)?;
            if corpus.is_some() {
                config.paths.train = corpus;
            }
            train(&config)
        }
        Command::Tag { common, model, input } => {
            let mut config = resolve(&common)?;
            override_paths(&mut config, model, input);
            tag(&config)
        }
        Command::Predict { common, model, input } => {
            let mut config = resolve(&common)?;
            override_paths(&mut config, model, input);
            predict(&config)
        }
        Command::Eval { common, gold, pred } => {
            let mut config = resolve(&common)?;
            if gold.is_some() {
                config.paths.gold = gold;
            }
            if pred.is_some() {
                config.paths.input = pred;
            }
            eval(&config).map(|_| ())
        }
        Command::GridSearch { common } => grid_search(&resolve(&common)?),
    }
}

fn override_paths(config: &mut RunConfig, model: Option<PathBuf>, input: Option<PathBuf>) {
    if model.is_some() {
        config.paths.model = model;
    }
    if input.is_some() {
        config.paths.input = input;
    }
}

/// Writes `corpus.conll` and `corpus.json`.
pub fn synth(config: &RunConfig) -> Result<()> {
    let out = config.output_dir()?;
    let docs = generate_synthetic_corpus(&config.generator, config.seed)?;
    config.write_resolved(out)?;
    save_corpus(&docs, &out.join("corpus.conll"), CorpusFormat::Conll)?;
    save_corpus(&docs, &out.join("corpus.json"), CorpusFormat::Json)?;
    log::info!("wrote {} documents to {}", docs.len(), out.display());
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    task: TrainTask,
}

/// One epoch of a training log. `objective` is the summed loss for
/// recurrent taggers and the training objective for factor graphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub objective: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dev_score: Option<f64>,
}

/// Contents of `training_log.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub task: TrainTask,
    pub epochs: Vec<EpochRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_epoch: Option<usize>,
    /// Score on the training corpus of the saved model: exact-span F1 for
    /// span taggers, token F1 for the tokenizer, accuracy for POS, micro
    /// F1 in `lr+skip` mode for Phase 2.
    pub train_score: f64,
}

fn records(objectives: &[f64], dev: Option<&[f64]>) -> Vec<EpochRecord> {
    objectives
        .iter()
        .enumerate()
        .map(|(epoch, &objective)| EpochRecord {
            epoch,
            objective,
            dev_score: dev.and_then(|d| d.get(epoch).copied()),
        })
        .collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Trains the configured task and writes the model, `manifest.json` and
/// `training_log.json` into the output directory.
pub fn train(config: &RunConfig) -> Result<()> {
    let task = config.task()?;
    let out = config.output_dir()?;
    let corpus = config.read_corpus(config.paths.train.as_deref(), "training")?;
    let dev = match &config.paths.dev {
        Some(p) => Some(config.read_corpus(Some(p), "dev")?),
        None => None,
    };
    config.write_resolved(out)?;
    let log = if let Some(rnn_task) = task.rnn_task() {
        let tagger_seed = sub_seed(config.seed, "rnn");
        let mut tagger = new_rnn_tagger(config, rnn_task, &config.rnn.preset(rnn_task), &corpus, tagger_seed)?;
        let hp = config.rnn.preset(rnn_task).hyperparams(config.rnn.epochs, sub_seed(config.seed, "shuffle"));
        let (epochs, best_epoch) = match &dev {
            Some(dev) => {
                let report = tagger.fit_with_dev(&corpus, dev, &hp, config.rnn.patience)?;
                (records(&report.losses, Some(&report.scores)), Some(report.best_epoch))
            }
            None => (records(&tagger.fit(&corpus, &hp)?, None), None),
        };
        tagger.save(&out.join(RNN_MODEL))?;
        TrainingLog {
            task,
            epochs,
            best_epoch,
            train_score: tagger.score(&corpus)?,
        }
    } else if let Some(run) = task.crf_run() {
        let tagger_config = TaggerConfig {
            klass: config.crf.klass.clone(),
            run,
            kind: config.crf.kind,
            skip_window: config.crf.skip_window,
            sgd: SgdConfig {
                seed: sub_seed(config.seed, "sgd"),
                ..config.crf.sgd
            },
            gibbs: GibbsConfig {
                seed: sub_seed(config.seed, "gibbs"),
                ..config.crf.gibbs
            },
        };
        let (tagger, history) = CrfTagger::train(&corpus, &tagger_config)?;
        tagger.save(out)?;
        let tagged = corpus.iter().map(|d| crf_annotate(&tagger, d)).collect::<Result<Vec<_>>>()?;
        TrainingLog {
            task,
            epochs: records(&history, None),
            best_epoch: None,
            train_score: score_corpus(&corpus, &tagged, &tagger_config.klass, MatchMode::Exact)?.f1,
        }
    } else {
        let (model, history) = train_phase2(&corpus, &config.phase2, sub_seed(config.seed, "phase2"))?;
        model.save(out)?;
        TrainingLog {
            task,
            epochs: records(&history, None),
            best_epoch: None,
            train_score: evaluate_phase2(&corpus, &model, Phase2Mode::LrSkip, predict_seed(config))?.micro.f1,
        }
    };
    for r in &log.epochs {
        log::info!("epoch {}: objective {:.6}", r.epoch, r.objective);
    }
    log::info!("training score {:.6}", log.train_score);
    write_json(&out.join(TRAINING_LOG), &log)?;
    write_json(&out.join(MANIFEST), &Manifest { task })
}

fn predict_seed(config: &RunConfig) -> u64 {
    sub_seed(config.seed, "predict")
}

fn new_rnn_tagger(config: &RunConfig, task: Task, preset: &Preset, corpus: &[Document], seed: u64) -> Result<RnnTagger> {
    let pretrained = match &config.paths.embeddings {
        Some(path) => {
            let vocab = build_vocab(corpus, task.level());
            let table = load_word2vec_text(path, &vocab, preset.dim, sub_seed(seed, "embeddings"))?;
            Some((vocab, table))
        }
        None => None,
    };
    RnnTagger::new(corpus, preset, pretrained, seed)
}

fn crf_annotate(tagger: &CrfTagger, doc: &Document) -> Result<Document> {
    let mut out = doc.clone();
    out.gold_spans = tagger.predict_spans(doc)?;
    Ok(out)
}

/// A trained model directory.
pub enum LoadedModel {
    Rnn(RnnTagger),
    Crf(CrfTagger),
    Phase2(Phase2Model),
}

pub fn load_model(dir: &Path) -> Result<(TrainTask, LoadedModel)> {
    let manifest_path = dir.join(MANIFEST);
    if !manifest_path.exists() {
        return Err(Error::Config(format!("{} is not a trained model directory", dir.display())));
    }
    let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(manifest_path)?)?;
    let model = if manifest.task.rnn_task().is_some() {
        LoadedModel::Rnn(RnnTagger::load(&dir.join(RNN_MODEL))?)
    } else if manifest.task.crf_run().is_some() {
        LoadedModel::Crf(CrfTagger::load(dir)?)
    } else {
        LoadedModel::Phase2(Phase2Model::load(dir)?)
    };
    Ok((manifest.task, model))
}

fn model_dir(config: &RunConfig) -> Result<&Path> {
    config
        .paths
        .model
        .as_deref()
        .ok_or_else(|| Error::Config("no model directory given".into()))
}

/// Annotates the input corpus and writes `tagged.conll` and `tagged.json`.
pub fn tag(config: &RunConfig) -> Result<()> {
    let out = config.output_dir()?;
    let (task, model) = load_model(model_dir(config)?)?;
    let input = config.read_corpus(config.paths.input.as_deref(), "input")?;
    let tagged = match &model {
        LoadedModel::Rnn(t) => input.iter().map(|d| t.annotate(d)).collect::<Result<Vec<_>>>()?,
        LoadedModel::Crf(t) => input.iter().map(|d| crf_annotate(t, d)).collect::<Result<Vec<_>>>()?,
        LoadedModel::Phase2(_) => {
            return Err(Error::ModelKind(format!("{task} models label events; use `predict`")));
        }
    };
    config.write_resolved(out)?;
    save_corpus(&tagged, &out.join("tagged.conll"), CorpusFormat::Conll)?;
    save_corpus(&tagged, &out.join("tagged.json"), CorpusFormat::Json)
}

/// Writes `predictions.tsv` with one DocRelTime label per event.
pub fn predict(config: &RunConfig) -> Result<()> {
    let out = config.output_dir()?;
    let mode: Phase2Mode = config.mode.as_deref().unwrap_or("lr+skip").parse()?;
    let (task, model) = load_model(model_dir(config)?)?;
    let LoadedModel::Phase2(model) = model else {
        return Err(Error::ModelKind(format!("{task} models do not label events; use `tag`")));
    };
    let input = config.read_corpus(config.paths.input.as_deref(), "input")?;
    let predictions = predict_corpus(&input, &model, mode, predict_seed(config))?;
    config.write_resolved(out)?;
    write_atomic(&out.join("predictions.tsv"), render_predictions(&predictions).as_bytes())
}

fn token_spans(doc: &Document) -> Vec<Span> {
    doc.sentences
        .iter()
        .flat_map(|s| &s.tokens)
        .map(|t| Span::new(t.begin, t.end, "TOKEN"))
        .collect()
}

fn is_prediction_file(path: &Path) -> Result<bool> {
    let text = std::fs::read_to_string(path)?;
    let first = text.lines().find(|l| !l.trim().is_empty());
    Ok(first.is_some_and(|l| !l.starts_with("#doc") && !l.trim_start().starts_with('[') && l.split('\t').count() == 4))
}

/// Scores the prediction side against gold, prints a table followed by the
/// same rows as JSON, and writes both into the output directory when one
/// is set.
///
/// Corpus predictions get one row per entity class (the classes the
/// predictions carry, or gold's when they carry none), a `tokens` row, and
/// a `pos` accuracy row when both sides have POS tags on the same tokens.
/// A DocRelTime predictions file gets one row per label plus `micro`.
pub fn eval(config: &RunConfig) -> Result<ScoreReport> {
    let gold_path = config.paths.gold.as_deref();
    let pred_path = config
        .paths
        .input
        .as_deref()
        .ok_or_else(|| Error::Config("no prediction file given".into()))?;
    if !pred_path.exists() {
        return Err(Error::Config(format!("prediction file {} does not exist", pred_path.display())));
    }
    let gold = config.read_corpus(gold_path, "gold")?;
    let mut report = ScoreReport::default();
    if is_prediction_file(pred_path)? {
        let predicted = parse_predictions(&std::fs::read_to_string(pred_path)?, pred_path)?;
        let scores = score_labels(&gold_label_map(&gold), &predicted)?;
        for (label, s) in &scores.per_class {
            report.push(label.as_str(), "label", s.clone());
        }
        report.push("micro", "label", scores.micro);
    } else {
        let mode: MatchMode = config.mode.as_deref().unwrap_or("exact").parse()?;
        let pred = config.read_corpus(Some(pred_path), "prediction")?;
        let pairs = align_documents(&gold, &pred)?;
        let classes_of = |docs: &[Document]| -> BTreeSet<String> {
            docs.iter().flat_map(|d| &d.gold_spans).map(|s| s.klass.clone()).collect()
        };
        let mut classes = classes_of(&pred);
        if classes.is_empty() {
            classes = classes_of(&gold);
        }
        for klass in &classes {
            report.push(klass.as_str(), mode.to_string(), score_corpus(&gold, &pred, klass, mode)?);
        }
        let mut tokens = PrfScore::default();
        let (mut right, mut total, mut tagged) = (0usize, 0usize, true);
        for (g, p) in pairs {
            tokens = tokens.merge(&score_spans(&token_spans(g), &token_spans(p), MatchMode::Exact)?);
            match (&g.pos_tags, &p.pos_tags) {
                (Some(gt), Some(pt)) if g.sentences == p.sentences => {
                    for (a, b) in gt.iter().flatten().zip(pt.iter().flatten()) {
                        right += usize::from(a == b);
                        total += 1;
                    }
                }
                _ => tagged = false,
            }
        }
        report.push("tokens", "exact", tokens);
        if tagged && total > 0 {
            report.push("pos", "accuracy", PrfScore::from_counts(right, total - right, total - right));
        }
    }
    let json = report.to_json()?.trim_end().to_string();
    // A closed stdout (say, piped into `head`) is not a scoring failure.
    let mut stdout = std::io::stdout().lock();
    let _ = write!(stdout, "{}", report.to_table()).and_then(|_| writeln!(stdout, "{json}"));
    if let Some(out) = &config.output {
        config.write_resolved(out)?;
        write_atomic(&out.join("scores.txt"), report.to_table().as_bytes())?;
        write_atomic(&out.join("scores.json"), format!("{json}\n").as_bytes())?;
    }
    Ok(report)
}

/// Random search over recurrent tagger settings, scored on the dev corpus.
/// Writes `search.json`.
pub fn grid_search(config: &RunConfig) -> Result<()> {
    let task = config.task()?;
    let rnn_task = task
        .rnn_task()
        .ok_or_else(|| Error::Config(format!("grid search covers recurrent taggers, not {task}")))?;
    let out = config.output_dir()?;
    let corpus = config.read_corpus(config.paths.train.as_deref(), "training")?;
    let dev = config.read_corpus(config.paths.dev.as_deref(), "dev")?;
    let space = config.search.space.clone().unwrap_or_else(|| match rnn_task {
        Task::Tokenizer => SearchSpace::char_level(),
        _ => SearchSpace::word_level(),
    });
    config.write_resolved(out)?;
    let base = config.rnn.preset(rnn_task);
    let result = random_grid_search(&space, config.search.budget, sub_seed(config.seed, "search"), |c: &Candidate| {
        let preset = Preset {
            hidden: c.hidden,
            context: c.context,
            lr: c.lr,
            dim: c.dim.unwrap_or(base.dim),
            pad: c.pad.unwrap_or(base.pad),
            ..base.clone()
        };
        let seed = sub_seed(config.seed, "rnn");
        let mut tagger = new_rnn_tagger(config, rnn_task, &preset, &corpus, seed)?;
        tagger.fit(&corpus, &preset.hyperparams(config.search.epochs, sub_seed(config.seed, "shuffle")))?;
        tagger.score(&dev)
    })?;
    log::info!("best {:?} with dev score {:.4}", result.best, result.best_score);
    write_json(&out.join("search.json"), &result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_names_round_trip() {
        for t in TrainTask::ALL {
            assert_eq!(t.as_str().parse::<TrainTask>().unwrap(), t);
            assert_eq!(serde_json::to_string(&t).unwrap(), format!("\"{t}\""));
        }
        assert!(matches!("crf".parse::<TrainTask>(), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"seed": 1, "sede": 2}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"rnn": {"epochz": 2}}"#).is_err());
        let c: RunConfig = serde_json::from_str(r#"{"task": "crf-run2", "crf": {"klass": "EVENT"}}"#).unwrap();
        assert_eq!(c.task, Some(TrainTask::CrfRun2));
        assert_eq!(c.crf.skip_window, 3);
    }

    #[test]
    fn resolved_config_parses_back() {
        let c = RunConfig {
            task: Some(TrainTask::Phase2),
            output: Some("out".into()),
            ..RunConfig::default()
        };
        let text = serde_json::to_string_pretty(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), c);
    }

    #[test]
    fn preset_overrides() {
        let rnn = RnnConfig {
            hidden: Some(7),
            lr: Some(0.5),
            ..RnnConfig::default()
        };
        let p = rnn.preset(Task::Timex3);
        assert_eq!((p.hidden, p.context, p.lr), (7, 2, 0.5));
    }

    #[test]
    fn usage_errors_exit_with_two() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Data("x".into())), 1);
    }
}
