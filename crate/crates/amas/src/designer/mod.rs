//! The per-query graph designer.
//!
//! Given K candidate graphs harvested from optimization, the designer learns
//! to predict, for each (query, graph) pair, a rank-like score in (0,1).
//! Smaller predictions mark better candidates, so inference selects the
//! argmin. Training uses a listwise ranking loss over all ordered candidate
//! pairs: a pair is *active* only when the first candidate strictly
//! outscored the second on the ground-truth metric; active pairs are weighted
//! by rank disparity and scored through a GeLU of the product of score and
//! prediction differences.

mod features;
mod scorer;
mod train;

pub use features::FeatureConfig;
pub use scorer::{select_graph, FeatureScorer, RemoteScorer, Scorer, ScorerParams};
pub use train::{train_scorer, TrainHyper, TrainReport};

use crate::hash::mix_seed;
use crate::optim::CandidateSet;
use crate::runner::Runner;
use crate::tasks::{TaskSample, TaskSpec};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DesignerError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("non-finite input")]
    NonFinite,
    #[error("no records to train on")]
    EmptyRecords,
    #[error("scorer failure: {0}")]
    Scorer(String),
}

/// Ground-truth task scores: one row per sample, one column per candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub sample_ids: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl ScoreMatrix {
    pub fn new(sample_ids: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self, DesignerError> {
        if sample_ids.len() != values.len() {
            return Err(DesignerError::LengthMismatch {
                left: sample_ids.len(),
                right: values.len(),
            });
        }
        let k = values.first().map_or(0, Vec::len);
        for row in &values {
            if row.len() != k {
                return Err(DesignerError::Validation("ragged score matrix".into()));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(DesignerError::NonFinite);
            }
        }
        Ok(Self { sample_ids, values })
    }

    /// Candidate count (columns).
    pub fn k(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn row_for(&self, sample_id: &str) -> Option<&[f64]> {
        self.sample_ids
            .iter()
            .position(|id| id == sample_id)
            .map(|i| self.values[i].as_slice())
    }

    /// Per-candidate mean over all samples.
    pub fn column_means(&self) -> Vec<f64> {
        let k = self.k();
        let n = self.values.len().max(1);
        (0..k)
            .map(|c| self.values.iter().map(|row| row[c]).sum::<f64>() / n as f64)
            .collect()
    }
}

/// Candidate ranks for one sample: a permutation of 1..=K with 1 = best.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankVector {
    pub ranks: Vec<usize>,
}

/// Ranks candidate scores: higher score earns a smaller rank number; ties
/// resolve in favor of the smaller candidate index.
pub fn rank_scores(scores: &[f64]) -> Result<RankVector, DesignerError> {
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(DesignerError::NonFinite);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("finite scores compare")
            .then(a.cmp(&b))
    });
    let mut ranks = vec![0usize; scores.len()];
    for (position, &idx) in order.iter().enumerate() {
        ranks[idx] = position + 1;
    }
    Ok(RankVector { ranks })
}

/// Which pair-weight formula the loss uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairWeightMode {
    /// `1 - (|r_i - r_j| + 1)^(-1/2)`: reproduces the reference worked
    /// values (rank gap 1 -> 0.29289, gap 3 -> 0.5).
    #[default]
    Weighted,
    /// `|r_i - r_j|^(1/2)`, kept for comparison runs.
    Printed,
    /// 1 for every active pair (the weight-ablation configuration).
    Uniform,
}

/// Pair weight `m(i, j)`. Zero whenever `s_j >= s_i` — only pairs where
/// candidate `i` strictly beat candidate `j` contribute; each unordered pair
/// therefore enters the loss at most once.
pub fn pair_weight(s_i: f64, s_j: f64, r_i: usize, r_j: usize, mode: PairWeightMode) -> f64 {
    if s_j >= s_i {
        return 0.0;
    }
    let gap = r_i.abs_diff(r_j) as f64;
    match mode {
        PairWeightMode::Weighted => 1.0 - (gap + 1.0).powf(-0.5),
        PairWeightMode::Printed => gap.sqrt(),
        PairWeightMode::Uniform => 1.0,
    }
}

/// Exact Gaussian-error linear unit `x * Phi(x)`.
pub fn gelu(x: f64) -> f64 {
    x * normal_cdf(x)
}

/// Derivative `Phi(x) + x * phi(x)`.
pub fn gelu_grad(x: f64) -> f64 {
    normal_cdf(x) + x * normal_pdf(x)
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Listwise ranking loss over all ordered candidate pairs:
/// `sum_{i != j} m(i, j) * gelu((s_j - s_i) * (yhat_j - yhat_i))`.
pub fn ranking_loss(
    scores: &[f64],
    predictions: &[f64],
    mode: PairWeightMode,
) -> Result<f64, DesignerError> {
    if scores.len() != predictions.len() {
        return Err(DesignerError::LengthMismatch {
            left: scores.len(),
            right: predictions.len(),
        });
    }
    let ranks = rank_scores(scores)?.ranks;
    let k = scores.len();
    let mut loss = 0.0;
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let m = pair_weight(scores[i], scores[j], ranks[i], ranks[j], mode);
            if m == 0.0 {
                continue;
            }
            loss += m * gelu((scores[j] - scores[i]) * (predictions[j] - predictions[i]));
        }
    }
    Ok(loss)
}

/// Gradient of [`ranking_loss`] with respect to the feature scorer's
/// parameters, by exact chain rule through the sigmoid head and the GeLU.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerGrad {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl ScorerGrad {
    fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            *w *= factor;
        }
        self.bias *= factor;
    }

    pub fn add(&mut self, other: &ScorerGrad) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        self.bias += other.bias;
    }

    pub fn norm(&self) -> f64 {
        (self.weights.iter().map(|w| w * w).sum::<f64>() + self.bias * self.bias).sqrt()
    }
}

/// Loss and exact parameter gradient for one sample's candidate group.
///
/// `features[c]` is the extracted feature vector for candidate `c`;
/// predictions are recomputed as `sigmoid(w . f_c + b)` so the gradient is
/// consistent with the loss by construction.
pub fn loss_and_gradient(
    scores: &[f64],
    features: &[Vec<f64>],
    params: &ScorerParams,
    mode: PairWeightMode,
) -> Result<(f64, ScorerGrad), DesignerError> {
    if scores.len() != features.len() {
        return Err(DesignerError::LengthMismatch {
            left: scores.len(),
            right: features.len(),
        });
    }
    let k = scores.len();
    let predictions: Vec<f64> = features.iter().map(|f| params.forward(f)).collect();
    let ranks = rank_scores(scores)?.ranks;

    let mut loss = 0.0;
    let mut dl_dy = vec![0.0; k];
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let m = pair_weight(scores[i], scores[j], ranks[i], ranks[j], mode);
            if m == 0.0 {
                continue;
            }
            let ds = scores[j] - scores[i];
            let u = ds * (predictions[j] - predictions[i]);
            loss += m * gelu(u);
            let upstream = m * gelu_grad(u) * ds;
            dl_dy[j] += upstream;
            dl_dy[i] -= upstream;
        }
    }

    let mut grad = ScorerGrad::zeros(params.weights.len());
    for c in 0..k {
        let sig = predictions[c] * (1.0 - predictions[c]);
        let dl_dz = dl_dy[c] * sig;
        for (g, f) in grad.weights.iter_mut().zip(&features[c]) {
            *g += dl_dz * f;
        }
        grad.bias += dl_dz;
    }
    Ok((loss, grad))
}

/// Query template for the designer. Slots: task name, task introduction,
/// input query, and the candidate graph's canonical text. Built from
/// per-line literals so the trailing spaces are explicit and survive
/// formatting.
const QUERY_TEMPLATE: &str = concat!(
    "Task Introduction:\n",
    "(a) You are currently acting as the graph designer for the agent system that works on the [task_name] task. \n",
    "(b) The task [task_name]'s introduction is as follows: [task_intro].\n",
    "(c) you will be given an input query, and a graph structure. Please evaluate the graph structure's quality in terms of how it will help solving the task in the input prompt. \n",
    "\n",
    "The input query is: \n",
    "[input_query].\n",
    "\n",
    "The graph structure is:\n",
    "[graph_structure]\n",
);

/// Literal anchors around the input-query section of a rendered query; the
/// feature extractor uses them to slice the query back out.
pub(crate) const QUERY_SECTION_OPEN: &str = "The input query is: \n";
pub(crate) const QUERY_SECTION_CLOSE: &str = "\n\nThe graph structure is:";

/// Fills the designer query template. Byte-deterministic; every slot must be
/// non-empty.
pub fn render_query(
    task_name: &str,
    task_intro: &str,
    input_query: &str,
    graph_text: &str,
) -> Result<String, DesignerError> {
    for (slot, value) in [
        ("task_name", task_name),
        ("task_intro", task_intro),
        ("input_query", input_query),
        ("graph_structure", graph_text),
    ] {
        if value.is_empty() {
            return Err(DesignerError::Validation(format!("empty slot: {slot}")));
        }
    }
    Ok(QUERY_TEMPLATE
        .replace("[task_name]", task_name)
        .replace("[task_intro]", task_intro)
        .replace("[input_query]", input_query)
        .replace("[graph_structure]", graph_text))
}

/// One designer training example: a rendered query for a (sample, candidate)
/// pair, the candidate's ground-truth score, and its rank within the
/// sample's K-group. Persisted as JSONL with this exact field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignerRecord {
    pub sample_id: String,
    pub candidate_index: usize,
    pub query: String,
    pub graph: String,
    pub score: f64,
    pub rank: usize,
    #[serde(skip)]
    pub failed: bool,
}

/// Runs every candidate on every training sample and emits K records per
/// sample. Runner failures score 0 and set the failure flag.
pub fn build_designer_dataset(
    samples: &[TaskSample],
    candidates: &CandidateSet,
    runner: &dyn Runner,
    task: &TaskSpec,
    base_seed: u64,
) -> Result<Vec<DesignerRecord>, DesignerError> {
    if candidates.is_empty() {
        return Err(DesignerError::Validation("no candidates".into()));
    }
    let graph_texts: Vec<String> = candidates
        .graphs()
        .iter()
        .map(|g| g.serialize())
        .collect();
    let mut records = Vec::with_capacity(samples.len() * candidates.len());
    for (si, sample) in samples.iter().enumerate() {
        let seed = mix_seed(base_seed, si as u64);
        let mut scores = Vec::with_capacity(candidates.len());
        let mut failures = Vec::with_capacity(candidates.len());
        for graph in candidates.graphs() {
            match runner.run(graph, sample, seed) {
                Ok(outcome) => {
                    scores.push(outcome.score);
                    failures.push(false);
                }
                Err(err) => {
                    log::warn!("designer dataset: sample {} failed: {err}", sample.id);
                    scores.push(0.0);
                    failures.push(true);
                }
            }
        }
        let ranks = rank_scores(&scores)?.ranks;
        for c in 0..candidates.len() {
            let query = render_query(&task.name, &task.intro, &sample.query, &graph_texts[c])?;
            records.push(DesignerRecord {
                sample_id: sample.id.clone(),
                candidate_index: c + 1,
                query,
                graph: graph_texts[c].clone(),
                score: scores[c],
                rank: ranks[c],
                failed: failures[c],
            });
        }
    }
    Ok(records)
}

/// Writes records as JSONL, one record per line, stable field order.
pub fn save_records(path: &std::path::Path, records: &[DesignerRecord]) -> std::io::Result<()> {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("record serialization"));
        out.push('\n');
    }
    std::fs::write(path, out)
}

pub fn load_records(path: &std::path::Path) -> Result<Vec<DesignerRecord>, DesignerError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| DesignerError::Validation(format!("read {}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line)
                .map_err(|e| DesignerError::Validation(format!("line {}: {e}", i + 1)))
        })
        .collect()
}
