//! Scorer implementations and per-query candidate selection.
//!
//! `score` returns a rank-like quantity in (0,1) where smaller means better,
//! so selection is the argmin (a flag flips it for comparison runs). The
//! in-process scorer is a sigmoid head over extracted features. The remote
//! scorer satisfies the same contract over HTTP, for setups where scoring is
//! served by an external model.

use super::{DesignerError, FeatureConfig};
use crate::graph::sigmoid;
use crate::optim::CandidateSet;
use crate::tasks::TaskSpec;
use serde::{Deserialize, Serialize};
use std::time::Duration;

/// Trainable parameters of the feature scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerParams {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl ScorerParams {
    pub fn new(weights: Vec<f64>, bias: f64) -> Self {
        Self { weights, bias }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }

    /// `sigmoid(w . features + bias)`.
    pub fn forward(&self, features: &[f64]) -> f64 {
        debug_assert_eq!(features.len(), self.weights.len());
        let z: f64 = self
            .weights
            .iter()
            .zip(features)
            .map(|(w, f)| w * f)
            .sum::<f64>()
            + self.bias;
        sigmoid(z)
    }
}

/// Anything that can score a (query, graph) pair. Pure and safe for
/// concurrent callers.
pub trait Scorer: Send + Sync {
    fn score(&self, query: &str, graph_text: &str) -> Result<f64, DesignerError>;
}

/// In-process scorer: feature extraction plus a sigmoid head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScorer {
    pub params: ScorerParams,
    pub features: FeatureConfig,
}

impl FeatureScorer {
    pub fn new(features: FeatureConfig) -> Self {
        let params = ScorerParams::zeros(features.dim());
        Self { params, features }
    }

    pub fn save(&self, path: &std::path::Path) -> std::io::Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self).expect("scorer json"))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, DesignerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DesignerError::Validation(format!("read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| DesignerError::Validation(e.to_string()))
    }
}

impl Scorer for FeatureScorer {
    fn score(&self, query: &str, graph_text: &str) -> Result<f64, DesignerError> {
        if !self.params.is_finite() {
            return Err(DesignerError::NonFinite);
        }
        Ok(self.params.forward(&self.features.extract(query, graph_text)))
    }
}

/// Remote scorer speaking `POST {base_url}/v1/score` with a JSON body
/// `{"query": ..., "graph": ...}` and expecting `{"score": <number>}`.
pub struct RemoteScorer {
    base_url: String,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    query: &'a str,
    graph: &'a str,
}

#[derive(Deserialize)]
struct ScoreResponse {
    score: f64,
}

impl RemoteScorer {
    pub fn new(base_url: impl Into<String>, timeout_secs: f64) -> Result<Self, DesignerError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(timeout_secs))
            .build()
            .map_err(|e| DesignerError::Scorer(e.to_string()))?;
        Ok(Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            client,
        })
    }
}

impl Scorer for RemoteScorer {
    fn score(&self, query: &str, graph_text: &str) -> Result<f64, DesignerError> {
        let response = self
            .client
            .post(format!("{}/v1/score", self.base_url))
            .json(&ScoreRequest {
                query,
                graph: graph_text,
            })
            .send()
            .map_err(|e| DesignerError::Scorer(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(DesignerError::Scorer(format!("status {status}")));
        }
        let body: ScoreResponse = response
            .json()
            .map_err(|e| DesignerError::Scorer(format!("malformed body: {e}")))?;
        if !body.score.is_finite() {
            return Err(DesignerError::NonFinite);
        }
        Ok(body.score)
    }
}

/// Picks the candidate for one query: renders the designer prompt per
/// candidate, scores it, and returns the 1-based index of the minimum
/// prediction (maximum when `select_highest` is set). Ties go to the smaller
/// index; a single candidate is returned without scoring.
pub fn select_graph(
    scorer: &dyn Scorer,
    task: &TaskSpec,
    input_query: &str,
    candidates: &CandidateSet,
    select_highest: bool,
) -> Result<usize, DesignerError> {
    if candidates.is_empty() {
        return Err(DesignerError::Validation("no candidates".into()));
    }
    if candidates.len() == 1 {
        return Ok(1);
    }
    let mut best_index = 1usize;
    let mut best_score = f64::NAN;
    for (i, graph) in candidates.graphs().iter().enumerate() {
        let graph_text = graph.serialize();
        let rendered = super::render_query(&task.name, &task.intro, input_query, &graph_text)?;
        let y = scorer.score(&rendered, &graph_text)?;
        let better = if best_score.is_nan() {
            true
        } else if select_highest {
            y > best_score
        } else {
            y < best_score
        };
        if better {
            best_score = y;
            best_index = i + 1;
        }
    }
    Ok(best_index)
}
