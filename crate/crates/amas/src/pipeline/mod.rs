//! End-to-end orchestration: configuration, staged runs, evaluation modes,
//! and reports.
//!
//! A full run executes, per seed: edge-logit optimization, candidate
//! harvesting, designer-dataset construction, designer training, and a
//! four-mode evaluation (each fixed candidate, designer-routed, per-sample
//! oracle, uniform random). Every stage persists its artifacts under
//! `output_dir/seed_<seed>/`; the aggregate report carries per-seed means,
//! the median over seeds, and latency accounting.

pub mod pilot;

use crate::backend::MockBackend;
use crate::designer::{
    build_designer_dataset, load_records, save_records, select_graph, train_scorer, DesignerRecord,
    FeatureConfig, FeatureScorer, PairWeightMode, RemoteScorer, ScoreMatrix, Scorer, TrainHyper,
    TrainReport,
};
use crate::executor::GenLimits;
use crate::graph::GraphParams;
use crate::hash::mix_seed;
use crate::llm::{BackendConfig, LlmClient};
use crate::optim::{harvest_candidates, optimize, CandidateSet, Checkpoint, OptimConfig};
use crate::runner::{ExecRunner, Runner, SyntheticRunner};
use crate::tasks::{load_split, split_samples, synthetic_affinity_task, MetricKind, TaskSample, TaskSpec};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

/// Accounted seconds per scorer evaluation under simulated timing.
pub const SCORER_CALL_COST: f64 = 0.01;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("optimize stage failed: {0}")]
    Optimize(String),
    #[error("harvest stage failed: {0}")]
    Harvest(String),
    #[error("designer-data stage failed: {0}")]
    BuildData(String),
    #[error("designer-training stage failed: {0}")]
    TrainDesigner(String),
    #[error("evaluation stage failed: {0}")]
    Evaluate(String),
}

impl PipelineError {
    /// Stable exit code per failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Io { .. } => 3,
            PipelineError::Optimize(_) => 10,
            PipelineError::Harvest(_) => 11,
            PipelineError::BuildData(_) => 12,
            PipelineError::TrainDesigner(_) => 13,
            PipelineError::Evaluate(_) => 14,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskConfig {
    pub name: String,
    pub intro: String,
    pub metric: MetricKind,
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    #[serde(default = "default_synthetic_samples")]
    pub synthetic_samples: usize,
    #[serde(default)]
    pub split_seed: u64,
}

fn default_synthetic_samples() -> usize {
    1000
}

impl TaskConfig {
    pub fn spec(&self) -> TaskSpec {
        TaskSpec {
            name: self.name.clone(),
            intro: self.intro.clone(),
            metric: self.metric,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendChoice {
    #[default]
    Mock,
    Http {
        #[serde(flatten)]
        config: BackendConfig,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignerConfig {
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_warmup_frac")]
    pub warmup_frac: f64,
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_designer_epochs")]
    pub max_epochs: usize,
    #[serde(default)]
    pub batch_groups: Option<usize>,
    #[serde(default)]
    pub uniform_pair_weight: bool,
    #[serde(default)]
    pub printed_m_formula: bool,
    #[serde(default)]
    pub select_highest: bool,
    #[serde(default = "default_len_buckets")]
    pub len_buckets: usize,
    #[serde(default = "default_hash_buckets")]
    pub hash_buckets: usize,
    #[serde(default)]
    pub remote_scorer_url: Option<String>,
}

fn default_lr() -> f64 {
    1e-4
}
fn default_warmup_frac() -> f64 {
    0.06
}
fn default_eval_every() -> usize {
    50
}
fn default_patience() -> usize {
    10
}
fn default_designer_epochs() -> usize {
    10
}
fn default_len_buckets() -> usize {
    8
}
fn default_hash_buckets() -> usize {
    16
}

impl Default for DesignerConfig {
    fn default() -> Self {
        toml::from_str("").expect("all designer fields have defaults")
    }
}

impl DesignerConfig {
    pub fn pair_weight_mode(&self) -> Result<PairWeightMode, PipelineError> {
        match (self.uniform_pair_weight, self.printed_m_formula) {
            (true, true) => Err(PipelineError::Config(
                "uniform_pair_weight and printed_m_formula are mutually exclusive".into(),
            )),
            (true, false) => Ok(PairWeightMode::Uniform),
            (false, true) => Ok(PairWeightMode::Printed),
            (false, false) => Ok(PairWeightMode::Weighted),
        }
    }

    pub fn hyper(&self, seed: u64) -> Result<TrainHyper, PipelineError> {
        Ok(TrainHyper {
            lr: self.lr,
            warmup_frac: self.warmup_frac,
            eval_every: self.eval_every,
            patience: self.patience,
            max_epochs: self.max_epochs,
            batch_groups: self.batch_groups,
            seed,
            pair_weight_mode: self.pair_weight_mode()?,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphConfig {
    #[serde(default = "default_preset")]
    pub preset: String,
    #[serde(default)]
    pub theta_init: f64,
}

fn default_preset() -> String {
    "reference".into()
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            preset: default_preset(),
            theta_init: 0.0,
        }
    }
}

impl GraphConfig {
    pub fn params(&self) -> Result<GraphParams, PipelineError> {
        match self.preset.as_str() {
            "reference" => Ok(GraphParams::reference(self.theta_init)),
            "tiny" => Ok(GraphParams::tiny(self.theta_init)),
            other => Err(PipelineError::Config(format!("unknown graph preset '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub task: TaskConfig,
    #[serde(default)]
    pub backend: BackendChoice,
    #[serde(default)]
    pub optim: OptimConfig,
    #[serde(default)]
    pub designer: DesignerConfig,
    #[serde(default)]
    pub graph: GraphConfig,
    #[serde(default = "default_k")]
    pub k: usize,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    #[serde(default = "default_max_calls")]
    pub max_calls: u32,
}

fn default_k() -> usize {
    4
}
fn default_max_calls() -> u32 {
    100_000
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let config: RunConfig =
            toml::from_str(&text).map_err(|e| PipelineError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.k == 0 {
            return Err(PipelineError::Config("k must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(PipelineError::Config("seeds must be non-empty".into()));
        }
        if self.task.metric != MetricKind::Synthetic && self.task.dataset.is_none() {
            return Err(PipelineError::Config(
                "non-synthetic tasks need a dataset path".into(),
            ));
        }
        self.designer.pair_weight_mode()?;
        self.graph.params()?;
        self.optim
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn seed_dir(&self, seed: u64) -> PathBuf {
        self.output_dir.join(format!("seed_{seed}"))
    }
}

/// Loaded task splits plus the synthetic ground truth when applicable.
pub struct TaskData {
    pub spec: TaskSpec,
    pub train: Vec<TaskSample>,
    pub dev: Vec<TaskSample>,
    pub test: Vec<TaskSample>,
    pub matrix: Option<ScoreMatrix>,
}

pub fn load_task_data(config: &RunConfig) -> Result<TaskData, PipelineError> {
    let spec = config.task.spec();
    if config.task.metric == MetricKind::Synthetic {
        let (samples, matrix) = synthetic_affinity_task(
            config.task.synthetic_samples,
            config.k,
            config.task.split_seed,
        );
        let (train, dev, test) = split_samples(samples, config.task.split_seed);
        return Ok(TaskData {
            spec,
            train,
            dev,
            test,
            matrix: Some(matrix),
        });
    }
    let path = config
        .task
        .dataset
        .as_ref()
        .ok_or_else(|| PipelineError::Config("missing dataset path".into()))?;
    let (train, dev, test) =
        load_split(path, config.task.split_seed).map_err(|e| PipelineError::Config(e.to_string()))?;
    Ok(TaskData {
        spec,
        train,
        dev,
        test,
        matrix: None,
    })
}

pub fn build_runner(config: &RunConfig, data: &TaskData) -> Result<Arc<dyn Runner>, PipelineError> {
    if config.task.metric == MetricKind::Synthetic {
        let matrix = data
            .matrix
            .clone()
            .ok_or_else(|| PipelineError::Config("synthetic task lost its matrix".into()))?;
        return Ok(Arc::new(SyntheticRunner::new(matrix, config.k)));
    }
    let backend: Arc<dyn crate::backend::TextBackend> = match &config.backend {
        BackendChoice::Mock => Arc::new(MockBackend::new()),
        BackendChoice::Http { config: http } => Arc::new(
            LlmClient::new(http.clone()).map_err(|e| PipelineError::Config(e.to_string()))?,
        ),
    };
    let limits = GenLimits {
        max_calls: config.max_calls,
        ..GenLimits::default()
    };
    Ok(Arc::new(
        ExecRunner::new(backend, data.spec.clone()).with_limits(limits),
    ))
}

fn scorer_for(config: &RunConfig, seed_dir: &Path) -> Result<Box<dyn Scorer>, PipelineError> {
    match &config.designer.remote_scorer_url {
        Some(url) => Ok(Box::new(
            RemoteScorer::new(url.clone(), 30.0)
                .map_err(|e| PipelineError::Config(e.to_string()))?,
        )),
        None => {
            let path = seed_dir.join("designer").join("scorer.json");
            Ok(Box::new(FeatureScorer::load(&path).map_err(|e| {
                PipelineError::TrainDesigner(format!("load scorer: {e}"))
            })?))
        }
    }
}

// Stage seed salts, so stages draw independent deterministic streams.
const SALT_HARVEST: u64 = 0x11AA;
const SALT_DATA: u64 = 0x22BB;
const SALT_EVAL: u64 = 0x33CC;
const SALT_TRAIN: u64 = 0x44DD;

/// Stage 1: REINFORCE over the training split, persisting checkpoints.
pub fn stage_optimize(
    config: &RunConfig,
    data: &TaskData,
    runner: &dyn Runner,
    seed: u64,
) -> Result<Vec<Checkpoint>, PipelineError> {
    let dir = config.seed_dir(seed).join("checkpoints");
    let params0 = config.graph.params()?;
    let (_, checkpoints) = optimize(
        &params0,
        &data.train,
        runner,
        &config.optim,
        seed,
        Some(&dir),
    )
    .map_err(|e| PipelineError::Optimize(e.to_string()))?;
    Ok(checkpoints)
}

/// Stage 2: score checkpoints on the dev split, keep the top K, annotate the
/// checkpoint files with their dev scores.
pub fn stage_harvest(
    config: &RunConfig,
    data: &TaskData,
    runner: &dyn Runner,
    seed: u64,
) -> Result<CandidateSet, PipelineError> {
    let seed_dir = config.seed_dir(seed);
    let checkpoint_dir = seed_dir.join("checkpoints");
    let mut checkpoints =
        Checkpoint::load_dir(&checkpoint_dir).map_err(|e| PipelineError::Harvest(e.to_string()))?;
    if checkpoints.is_empty() {
        return Err(PipelineError::Harvest("no checkpoints found".into()));
    }
    let candidates = harvest_candidates(
        &mut checkpoints,
        &data.dev,
        runner,
        config.k,
        mix_seed(seed, SALT_HARVEST),
    )
    .map_err(|e| PipelineError::Harvest(e.to_string()))?;
    for checkpoint in &checkpoints {
        checkpoint
            .save(&checkpoint_dir)
            .map_err(|e| PipelineError::Harvest(e.to_string()))?;
    }
    candidates
        .save(&seed_dir.join("candidates.json"))
        .map_err(|e| PipelineError::Harvest(e.to_string()))?;
    Ok(candidates)
}

/// Stage 3: run every candidate on the train and dev splits and persist the
/// designer records.
pub fn stage_build_data(
    config: &RunConfig,
    data: &TaskData,
    runner: &dyn Runner,
    seed: u64,
) -> Result<(Vec<DesignerRecord>, Vec<DesignerRecord>), PipelineError> {
    let seed_dir = config.seed_dir(seed);
    let candidates = CandidateSet::load(&seed_dir.join("candidates.json"))
        .map_err(|e| PipelineError::BuildData(e.to_string()))?;
    let designer_dir = seed_dir.join("designer");
    std::fs::create_dir_all(&designer_dir).map_err(io_err(&designer_dir))?;
    let base = mix_seed(seed, SALT_DATA);
    let train = build_designer_dataset(&data.train, &candidates, runner, &data.spec, base)
        .map_err(|e| PipelineError::BuildData(e.to_string()))?;
    let dev = build_designer_dataset(&data.dev, &candidates, runner, &data.spec, base)
        .map_err(|e| PipelineError::BuildData(e.to_string()))?;
    let train_path = designer_dir.join("train.jsonl");
    save_records(&train_path, &train).map_err(io_err(&train_path))?;
    let dev_path = designer_dir.join("dev.jsonl");
    save_records(&dev_path, &dev).map_err(io_err(&dev_path))?;
    Ok((train, dev))
}

/// Stage 4: train the feature scorer on the persisted records.
pub fn stage_train_designer(
    config: &RunConfig,
    seed: u64,
) -> Result<TrainReport, PipelineError> {
    let designer_dir = config.seed_dir(seed).join("designer");
    let train = load_records(&designer_dir.join("train.jsonl"))
        .map_err(|e| PipelineError::TrainDesigner(e.to_string()))?;
    let dev = load_records(&designer_dir.join("dev.jsonl"))
        .map_err(|e| PipelineError::TrainDesigner(e.to_string()))?;
    let params0 = config.graph.params()?;
    let features = FeatureConfig {
        potential_edges: params0.potential_edges().to_vec(),
        len_buckets: config.designer.len_buckets,
        hash_buckets: config.designer.hash_buckets,
    };
    let hyper = config.designer.hyper(mix_seed(seed, SALT_TRAIN))?;
    let (scorer, report) = train_scorer(&train, &dev, features, &hyper)
        .map_err(|e| PipelineError::TrainDesigner(e.to_string()))?;
    let path = designer_dir.join("scorer.json");
    scorer.save(&path).map_err(io_err(&path))?;
    Ok(report)
}

/// Evaluation mode for one pass over the test split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Always run the given candidate (1-based).
    Fixed(usize),
    /// Per-sample designer selection.
    Amas,
    /// Per-sample best candidate (runs all of them).
    Oracle,
    /// Per-sample uniform choice under the run seed.
    Random,
}

impl std::fmt::Display for EvalMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EvalMode::Fixed(i) => write!(f, "fixed({i})"),
            EvalMode::Amas => write!(f, "amas"),
            EvalMode::Oracle => write!(f, "oracle"),
            EvalMode::Random => write!(f, "random"),
        }
    }
}

impl EvalMode {
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        match text {
            "amas" => Ok(EvalMode::Amas),
            "oracle" => Ok(EvalMode::Oracle),
            "random" => Ok(EvalMode::Random),
            other => {
                let inner = other
                    .strip_prefix("fixed(")
                    .and_then(|r| r.strip_suffix(')'))
                    .or_else(|| other.strip_prefix("fixed:"));
                inner
                    .and_then(|i| i.parse::<usize>().ok())
                    .map(EvalMode::Fixed)
                    .ok_or_else(|| {
                        PipelineError::Config(format!(
                            "unknown mode '{other}' (use fixed(i), amas, oracle, random)"
                        ))
                    })
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub seed: u64,
    pub scorer_call_cost: f64,
    pub select_highest: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleEval {
    pub sample_id: String,
    pub score: f64,
    pub latency: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chosen: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeMetrics {
    pub mode: String,
    pub mean: f64,
    pub mean_latency: f64,
    pub samples: Vec<SampleEval>,
}

fn run_scored(
    runner: &dyn Runner,
    graph: &crate::graph::GraphStructure,
    sample: &TaskSample,
    seed: u64,
) -> (f64, f64) {
    match runner.run(graph, sample, seed) {
        Ok(outcome) => (outcome.score, outcome.latency),
        Err(err) => {
            log::warn!("evaluation: sample {} failed: {err} (scored 0)", sample.id);
            (0.0, 0.0)
        }
    }
}

/// Evaluates one mode over the test split.
///
/// Latency per sample is the executed graph's accounted time; designer mode
/// adds exactly K scorer evaluations' worth on top and oracle mode pays for
/// all K runs.
pub fn evaluate(
    mode: EvalMode,
    candidates: &CandidateSet,
    scorer: Option<&dyn Scorer>,
    task: &TaskSpec,
    test_set: &[TaskSample],
    runner: &dyn Runner,
    opts: &EvalOptions,
) -> Result<ModeMetrics, PipelineError> {
    if candidates.is_empty() {
        return Err(PipelineError::Evaluate("no candidates".into()));
    }
    let k = candidates.len();
    if let EvalMode::Fixed(i) = mode {
        if i == 0 || i > k {
            return Err(PipelineError::Evaluate(format!(
                "fixed index {i} out of range 1..={k}"
            )));
        }
    }
    if mode == EvalMode::Amas && scorer.is_none() {
        return Err(PipelineError::Evaluate("designer mode needs a scorer".into()));
    }

    let mut random_rng = ChaCha8Rng::seed_from_u64(mix_seed(opts.seed, 0xD1CE));
    let mut samples = Vec::with_capacity(test_set.len());
    for (i, sample) in test_set.iter().enumerate() {
        let run_seed = mix_seed(opts.seed, i as u64);
        let entry = match mode {
            EvalMode::Fixed(c) => {
                let (score, latency) = run_scored(runner, candidates.graph(c), sample, run_seed);
                SampleEval {
                    sample_id: sample.id.clone(),
                    score,
                    latency,
                    chosen: None,
                }
            }
            EvalMode::Amas => {
                let scorer = scorer.expect("checked above");
                let chosen =
                    select_graph(scorer, task, &sample.query, candidates, opts.select_highest)
                        .map_err(|e| PipelineError::Evaluate(e.to_string()))?;
                let (score, latency) =
                    run_scored(runner, candidates.graph(chosen), sample, run_seed);
                SampleEval {
                    sample_id: sample.id.clone(),
                    score,
                    latency: k as f64 * opts.scorer_call_cost + latency,
                    chosen: Some(chosen),
                }
            }
            EvalMode::Oracle => {
                let mut best = (0.0f64, 1usize);
                let mut total_latency = 0.0;
                for c in 1..=k {
                    let (score, latency) =
                        run_scored(runner, candidates.graph(c), sample, run_seed);
                    total_latency += latency;
                    if score > best.0 {
                        best = (score, c);
                    }
                }
                SampleEval {
                    sample_id: sample.id.clone(),
                    score: best.0,
                    latency: total_latency,
                    chosen: Some(best.1),
                }
            }
            EvalMode::Random => {
                let c = random_rng.gen_range(1..=k);
                let (score, latency) = run_scored(runner, candidates.graph(c), sample, run_seed);
                SampleEval {
                    sample_id: sample.id.clone(),
                    score,
                    latency,
                    chosen: Some(c),
                }
            }
        };
        samples.push(entry);
    }

    let n = samples.len().max(1) as f64;
    Ok(ModeMetrics {
        mode: mode.to_string(),
        mean: samples.iter().map(|s| s.score).sum::<f64>() / n,
        mean_latency: samples.iter().map(|s| s.latency).sum::<f64>() / n,
        samples,
    })
}

/// Mode means over a precomputed score matrix (fixed / oracle / random).
pub fn evaluate_matrix(
    mode: EvalMode,
    matrix: &ScoreMatrix,
    seed: u64,
) -> Result<f64, PipelineError> {
    let k = matrix.k();
    if k == 0 || matrix.values.is_empty() {
        return Err(PipelineError::Evaluate("empty matrix".into()));
    }
    let n = matrix.values.len() as f64;
    match mode {
        EvalMode::Fixed(c) => {
            if c == 0 || c > k {
                return Err(PipelineError::Evaluate(format!(
                    "fixed index {c} out of range 1..={k}"
                )));
            }
            Ok(matrix.values.iter().map(|row| row[c - 1]).sum::<f64>() / n)
        }
        EvalMode::Oracle => Ok(matrix
            .values
            .iter()
            .map(|row| row.iter().fold(f64::MIN, |a, &b| a.max(b)))
            .sum::<f64>()
            / n),
        EvalMode::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0xD1CE));
            Ok(matrix
                .values
                .iter()
                .map(|row| row[rng.gen_range(0..k)])
                .sum::<f64>()
                / n)
        }
        EvalMode::Amas => Err(PipelineError::Evaluate(
            "designer mode needs live scoring, not a precomputed matrix".into(),
        )),
    }
}

/// Stage 5: all four mode families over the test split for one seed.
pub fn stage_evaluate(
    config: &RunConfig,
    data: &TaskData,
    runner: &dyn Runner,
    seed: u64,
) -> Result<Vec<ModeMetrics>, PipelineError> {
    let seed_dir = config.seed_dir(seed);
    let candidates = CandidateSet::load(&seed_dir.join("candidates.json"))
        .map_err(|e| PipelineError::Evaluate(e.to_string()))?;
    let scorer = scorer_for(config, &seed_dir)?;
    let opts = EvalOptions {
        seed: mix_seed(seed, SALT_EVAL),
        scorer_call_cost: SCORER_CALL_COST,
        select_highest: config.designer.select_highest,
    };
    let mut modes = Vec::new();
    for c in 1..=candidates.len() {
        modes.push(EvalMode::Fixed(c));
    }
    modes.extend([EvalMode::Amas, EvalMode::Oracle, EvalMode::Random]);
    modes
        .into_iter()
        .map(|mode| {
            evaluate(
                mode,
                &candidates,
                Some(scorer.as_ref()),
                &data.spec,
                &data.test,
                runner,
                &opts,
            )
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModeReport {
    pub mode: String,
    pub per_seed_mean: Vec<f64>,
    pub median: f64,
    pub mean_latency: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SelectionEntry {
    pub sample_id: String,
    pub candidate_index: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SeedSelections {
    pub seed: u64,
    pub chosen: Vec<SelectionEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EvalReport {
    pub task: String,
    pub k: usize,
    pub seeds: Vec<u64>,
    pub modes: Vec<ModeReport>,
    pub selections: Vec<SeedSelections>,
}

/// Sorted-middle median; even-length inputs average the two middles.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    }
}

/// Runs every stage for every configured seed and writes `report.json` and
/// `report.txt` under the output directory.
pub fn run_full(config: &RunConfig) -> Result<EvalReport, PipelineError> {
    config.validate()?;
    let data = load_task_data(config)?;
    let runner = build_runner(config, &data)?;

    let mut per_seed_modes: Vec<Vec<ModeMetrics>> = Vec::with_capacity(config.seeds.len());
    let mut selections = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        stage_optimize(config, &data, runner.as_ref(), seed)?;
        stage_harvest(config, &data, runner.as_ref(), seed)?;
        stage_build_data(config, &data, runner.as_ref(), seed)?;
        stage_train_designer(config, seed)?;
        let modes = stage_evaluate(config, &data, runner.as_ref(), seed)?;
        let amas = modes
            .iter()
            .find(|m| m.mode == "amas")
            .ok_or_else(|| PipelineError::Evaluate("designer mode missing".into()))?;
        selections.push(SeedSelections {
            seed,
            chosen: amas
                .samples
                .iter()
                .map(|s| SelectionEntry {
                    sample_id: s.sample_id.clone(),
                    candidate_index: s.chosen.unwrap_or(0),
                })
                .collect(),
        });
        per_seed_modes.push(modes);
    }

    // Mode labels can differ across seeds when harvests yield fewer
    // candidates; aggregate over the labels present in every seed.
    let first = &per_seed_modes[0];
    let mut modes = Vec::new();
    for metric in first {
        let label = &metric.mode;
        let mut per_seed_mean = Vec::with_capacity(per_seed_modes.len());
        let mut latencies = Vec::with_capacity(per_seed_modes.len());
        let mut present_everywhere = true;
        for seed_modes in &per_seed_modes {
            match seed_modes.iter().find(|m| &m.mode == label) {
                Some(m) => {
                    per_seed_mean.push(m.mean);
                    latencies.push(m.mean_latency);
                }
                None => {
                    present_everywhere = false;
                    break;
                }
            }
        }
        if !present_everywhere {
            continue;
        }
        modes.push(ModeReport {
            mode: label.clone(),
            median: median(&per_seed_mean),
            mean_latency: latencies.iter().sum::<f64>() / latencies.len() as f64,
            per_seed_mean,
        });
    }

    let report = EvalReport {
        task: config.task.name.clone(),
        k: config.k,
        seeds: config.seeds.clone(),
        modes,
        selections,
    };

    std::fs::create_dir_all(&config.output_dir).map_err(io_err(&config.output_dir))?;
    let json_path = config.output_dir.join("report.json");
    let mut body = serde_json::to_string_pretty(&report).expect("report serialization");
    body.push('\n');
    std::fs::write(&json_path, body).map_err(io_err(&json_path))?;
    let txt_path = config.output_dir.join("report.txt");
    std::fs::write(&txt_path, render_report(&report)).map_err(io_err(&txt_path))?;
    Ok(report)
}

/// Aligned text rendering of the aggregate report.
pub fn render_report(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "task: {}    K = {}    seeds: {:?}\n\n",
        report.task, report.k, report.seeds
    ));
    out.push_str(&format!(
        "{:<12} {:>10} {:>12}   per-seed means\n",
        "mode", "median", "latency(s)"
    ));
    for mode in &report.modes {
        let per_seed = mode
            .per_seed_mean
            .iter()
            .map(|m| format!("{m:.4}"))
            .collect::<Vec<_>>()
            .join(" ");
        out.push_str(&format!(
            "{:<12} {:>10.4} {:>12.4}   {per_seed}\n",
            mode.mode, mode.median, mode.mean_latency
        ));
    }
    out
}
