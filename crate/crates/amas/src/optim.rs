//! Policy-gradient optimization of the edge logits.
//!
//! Each step samples a handful of structures, scores every one of them as
//! the mean task score over the current batch, subtracts the mean sampled
//! reward as a baseline, and ascends `sum_G (r_G - baseline) * grad log
//! p(G)` with AdamW. Checkpoints persist the logits and the realized
//! structure; harvesting scores each distinct realized structure on the dev
//! set and keeps the top K.

use crate::graph::{GraphError, GraphParams, GraphStructure};
use crate::hash::mix_seed;
use crate::runner::Runner;
use crate::tasks::TaskSample;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("graph error: {0}")]
    Graph(#[from] GraphError),
    #[error("checkpoint io at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint parse at {path}: {message}")]
    Parse { path: String, message: String },
    #[error("empty training set")]
    EmptyTrainSet,
}

/// Adam with decoupled weight decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamW {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    cfg: AdamConfig,
}

impl AdamW {
    pub fn new(dim: usize, cfg: AdamConfig) -> Self {
        Self {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
            cfg,
        }
    }

    /// One descent step on `params` along `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        assert_eq!(params.len(), grad.len());
        assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let b1 = self.cfg.beta1;
        let b2 = self.cfg.beta2;
        let bias1 = 1.0 - b1.powi(self.t as i32);
        let bias2 = 1.0 - b2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * grad[i];
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bias1;
            let v_hat = self.v[i] / bias2;
            params[i] -= lr * (m_hat / (v_hat.sqrt() + self.cfg.eps)
                + self.cfg.weight_decay * params[i]);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub samples_per_step: usize,
    pub checkpoint_every: usize,
    #[serde(default)]
    pub adam: AdamConfig,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 5,
            batch_size: 4,
            samples_per_step: 2,
            checkpoint_every: 10,
            adam: AdamConfig::default(),
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<(), OptimError> {
        if self.learning_rate <= 0.0
            || self.epochs == 0
            || self.batch_size == 0
            || self.samples_per_step == 0
            || self.checkpoint_every == 0
        {
            return Err(OptimError::Config(
                "all optimization settings must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Per-step diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct StepStats {
    pub rewards: Vec<f64>,
    pub baseline: f64,
    pub grad_norm: f64,
    /// Set when a runner failure aborted the step with `theta` unchanged.
    pub skipped: bool,
}

/// REINFORCE ascent gradient for already-scored sampled structures:
/// `sum_G (reward_G - baseline) * grad_theta log p(G)`, where
/// `d log p / d theta_k = included_k - p_k`.
pub fn reinforce_gradient(
    params: &GraphParams,
    scored: &[(GraphStructure, f64)],
) -> Result<Vec<f64>, GraphError> {
    let d = params.dim();
    let mut grad = vec![0.0; d];
    if scored.is_empty() || d == 0 {
        return Ok(grad);
    }
    let baseline = scored.iter().map(|(_, r)| r).sum::<f64>() / scored.len() as f64;
    let probs = params.edge_probabilities()?;
    for (structure, reward) in scored {
        let mask = params.inclusion_mask(structure)?;
        let advantage = reward - baseline;
        for k in 0..d {
            let indicator = if mask[k] { 1.0 } else { 0.0 };
            grad[k] += advantage * (indicator - probs[k]);
        }
    }
    Ok(grad)
}

/// One optimization step. Samples `samples_per_step` structures, scores each
/// as the mean task score over `batch`, and updates `theta` in place. A
/// runner failure aborts the step (logged, `theta` untouched).
pub fn reinforce_step(
    params: &mut GraphParams,
    optimizer: &mut AdamW,
    batch: &[TaskSample],
    runner: &dyn Runner,
    cfg: &OptimConfig,
    step_seed: u64,
) -> Result<StepStats, OptimError> {
    if batch.is_empty() {
        return Err(OptimError::Config("empty batch".into()));
    }
    let mut scored = Vec::with_capacity(cfg.samples_per_step);
    for s in 0..cfg.samples_per_step {
        let structure = params.sample_structure(mix_seed(step_seed, s as u64));
        let mut total = 0.0;
        for (i, sample) in batch.iter().enumerate() {
            let run_seed = mix_seed(step_seed, 0x5EED_0000 + i as u64);
            match runner.run(&structure, sample, run_seed) {
                Ok(outcome) => total += outcome.score,
                Err(err) => {
                    log::warn!("step aborted: runner failed on sample {}: {err}", sample.id);
                    return Ok(StepStats {
                        rewards: Vec::new(),
                        baseline: 0.0,
                        grad_norm: 0.0,
                        skipped: true,
                    });
                }
            }
        }
        scored.push((structure, total / batch.len() as f64));
    }

    let ascent = reinforce_gradient(params, &scored)?;
    let grad_norm = ascent.iter().map(|g| g * g).sum::<f64>().sqrt();
    let mut theta = params.theta().to_vec();
    let descent: Vec<f64> = ascent.iter().map(|g| -g).collect();
    optimizer.step(&mut theta, &descent, cfg.learning_rate);
    *params = params.with_theta(theta)?;

    Ok(StepStats {
        rewards: scored.iter().map(|(_, r)| *r).collect(),
        baseline: scored.iter().map(|(_, r)| r).sum::<f64>() / scored.len().max(1) as f64,
        grad_norm,
        skipped: false,
    })
}

/// Persisted optimizer state at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub step: usize,
    pub theta: Vec<f64>,
    pub realized: GraphStructure,
    pub dev_score: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct WireCheckpoint {
    step: usize,
    theta: Vec<f64>,
    graph: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    dev_score: Option<f64>,
}

impl Checkpoint {
    fn file_name(step: usize) -> String {
        format!("step_{step:06}.json")
    }

    pub fn save(&self, dir: &Path) -> Result<std::path::PathBuf, OptimError> {
        let wire = WireCheckpoint {
            step: self.step,
            theta: self.theta.clone(),
            graph: self.realized.serialize(),
            dev_score: self.dev_score,
        };
        let path = dir.join(Self::file_name(self.step));
        let body = serde_json::to_string(&wire).expect("checkpoint serialization");
        std::fs::write(&path, body).map_err(|source| OptimError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self, OptimError> {
        let text = std::fs::read_to_string(path).map_err(|source| OptimError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let wire: WireCheckpoint =
            serde_json::from_str(&text).map_err(|e| OptimError::Parse {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        let realized = GraphStructure::deserialize(&wire.graph).map_err(|e| OptimError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(Self {
            step: wire.step,
            theta: wire.theta,
            realized,
            dev_score: wire.dev_score,
        })
    }

    pub fn load_dir(dir: &Path) -> Result<Vec<Self>, OptimError> {
        let mut paths: Vec<std::path::PathBuf> = std::fs::read_dir(dir)
            .map_err(|source| OptimError::Io {
                path: dir.display().to_string(),
                source,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        paths.sort();
        paths.iter().map(|p| Self::load(p)).collect()
    }
}

/// Runs the full optimization loop: `epochs * ceil(|train| / batch_size)`
/// steps, persisting a checkpoint every `checkpoint_every` steps and at the
/// final step. Deterministic for a fixed seed and deterministic runner.
pub fn optimize(
    params0: &GraphParams,
    train_set: &[TaskSample],
    runner: &dyn Runner,
    cfg: &OptimConfig,
    seed: u64,
    checkpoint_dir: Option<&Path>,
) -> Result<(GraphParams, Vec<Checkpoint>), OptimError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(OptimError::EmptyTrainSet);
    }
    if let Some(dir) = checkpoint_dir {
        std::fs::create_dir_all(dir).map_err(|source| OptimError::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }

    let mut params = params0.clone();
    let mut optimizer = AdamW::new(params.dim(), cfg.adam);
    let steps_per_epoch = train_set.len().div_ceil(cfg.batch_size);
    let total_steps = steps_per_epoch * cfg.epochs;
    let mut checkpoints = Vec::new();
    let mut step = 0usize;

    for _epoch in 0..cfg.epochs {
        for batch in train_set.chunks(cfg.batch_size) {
            step += 1;
            let step_seed = mix_seed(seed, step as u64);
            reinforce_step(&mut params, &mut optimizer, batch, runner, cfg, step_seed)?;
            if step % cfg.checkpoint_every == 0 || step == total_steps {
                let checkpoint = Checkpoint {
                    step,
                    theta: params.theta().to_vec(),
                    realized: params.realize_map(),
                    dev_score: None,
                };
                if let Some(dir) = checkpoint_dir {
                    checkpoint.save(dir)?;
                }
                checkpoints.push(checkpoint);
            }
        }
    }
    Ok((params, checkpoints))
}

/// The harvested top-K candidate structures, best dev score first. No two
/// entries share a canonical serialization; score ties order by earlier
/// checkpoint step.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    graphs: Vec<GraphStructure>,
    dev_scores: Vec<f64>,
    steps: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct WireCandidates {
    graphs: Vec<String>,
    dev_scores: Vec<f64>,
    steps: Vec<usize>,
}

impl CandidateSet {
    pub fn new(
        graphs: Vec<GraphStructure>,
        dev_scores: Vec<f64>,
        steps: Vec<usize>,
    ) -> Result<Self, OptimError> {
        if graphs.len() != dev_scores.len() || graphs.len() != steps.len() {
            return Err(OptimError::Config("candidate field lengths differ".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for g in &graphs {
            if !seen.insert(g.serialize()) {
                return Err(OptimError::Config(
                    "duplicate candidate structure".into(),
                ));
            }
        }
        if dev_scores.windows(2).any(|w| w[0] < w[1]) {
            return Err(OptimError::Config(
                "candidate dev scores must be non-increasing".into(),
            ));
        }
        Ok(Self {
            graphs,
            dev_scores,
            steps,
        })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn graphs(&self) -> &[GraphStructure] {
        &self.graphs
    }

    pub fn dev_scores(&self) -> &[f64] {
        &self.dev_scores
    }

    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    /// Candidate by 1-based index.
    pub fn graph(&self, candidate_index: usize) -> &GraphStructure {
        &self.graphs[candidate_index - 1]
    }

    /// Keeps the first `k` candidates.
    pub fn truncated(&self, k: usize) -> Self {
        let k = k.min(self.len());
        Self {
            graphs: self.graphs[..k].to_vec(),
            dev_scores: self.dev_scores[..k].to_vec(),
            steps: self.steps[..k].to_vec(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), OptimError> {
        let wire = WireCandidates {
            graphs: self.graphs.iter().map(|g| g.serialize()).collect(),
            dev_scores: self.dev_scores.clone(),
            steps: self.steps.clone(),
        };
        let body = serde_json::to_string_pretty(&wire).expect("candidate serialization");
        std::fs::write(path, body).map_err(|source| OptimError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, OptimError> {
        let text = std::fs::read_to_string(path).map_err(|source| OptimError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let wire: WireCandidates =
            serde_json::from_str(&text).map_err(|e| OptimError::Parse {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        let graphs = wire
            .graphs
            .iter()
            .map(|t| GraphStructure::deserialize(t))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| OptimError::Parse {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        Self::new(graphs, wire.dev_scores, wire.steps)
    }
}

/// Scores every distinct realized structure on the dev set and keeps the top
/// `k` (ties broken toward the earlier checkpoint step). Duplicate
/// structures merge into their earliest checkpoint; every checkpoint gets
/// its `dev_score` filled in. Sample-level runner failures score 0.
pub fn harvest_candidates(
    checkpoints: &mut [Checkpoint],
    dev_set: &[TaskSample],
    runner: &dyn Runner,
    k: usize,
    eval_seed: u64,
) -> Result<CandidateSet, OptimError> {
    if k == 0 {
        return Err(OptimError::Config("k must be >= 1".into()));
    }
    if dev_set.is_empty() {
        return Err(OptimError::Config("empty dev set".into()));
    }

    // Distinct structures, keyed by canonical text, keeping earliest step.
    let mut order: Vec<String> = Vec::new();
    let mut by_text: HashMap<String, (usize, GraphStructure)> = HashMap::new();
    for checkpoint in checkpoints.iter() {
        let text = checkpoint.realized.serialize();
        by_text.entry(text.clone()).or_insert_with(|| {
            order.push(text.clone());
            (checkpoint.step, checkpoint.realized.clone())
        });
    }

    let mut scored: Vec<(String, usize, GraphStructure, f64)> = Vec::with_capacity(order.len());
    for text in order {
        let (step, structure) = by_text[&text].clone();
        let mut total = 0.0;
        for (i, sample) in dev_set.iter().enumerate() {
            let seed = mix_seed(eval_seed, i as u64);
            match runner.run(&structure, sample, seed) {
                Ok(outcome) => total += outcome.score,
                Err(err) => {
                    log::warn!("dev scoring failed on sample {}: {err} (scored 0)", sample.id);
                }
            }
        }
        scored.push((text, step, structure, total / dev_set.len() as f64));
    }

    scored.sort_by(|a, b| {
        b.3.partial_cmp(&a.3)
            .expect("finite dev scores")
            .then(a.1.cmp(&b.1))
    });

    let score_by_text: HashMap<&str, f64> =
        scored.iter().map(|(t, _, _, s)| (t.as_str(), *s)).collect();
    for checkpoint in checkpoints.iter_mut() {
        checkpoint.dev_score = score_by_text
            .get(checkpoint.realized.serialize().as_str())
            .copied();
    }

    if scored.len() < k {
        log::warn!(
            "only {} distinct structures available for top-{k} harvest",
            scored.len()
        );
    }
    scored.truncate(k);
    CandidateSet::new(
        scored.iter().map(|(_, _, g, _)| g.clone()).collect(),
        scored.iter().map(|(_, _, _, s)| *s).collect(),
        scored.iter().map(|(_, step, _, _)| *step).collect(),
    )
}
