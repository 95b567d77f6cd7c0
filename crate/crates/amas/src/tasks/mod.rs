//! Task environments: dataset ingestion, metrics, and the synthetic
//! affinity generator used for controlled designer experiments.
//!
//! Dataset files are JSONL with one `{"id", "query", "target"}` object per
//! line. Targets are task-shaped: a number quadruple for arithmetic-to-24, a
//! 5x5 letter grid for crossword, an option letter for multiple choice, or a
//! bucket index for the synthetic task.

pub mod game24;

pub use game24::{game24_check, game24_check_verdict, game24_solve, Game24Verdict};

use crate::designer::ScoreMatrix;
use crate::hash::mix_seed;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record at line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("grid must be 5x5 uppercase letters, got {0}")]
    BadGrid(String),
    #[error("invalid metric input: {0}")]
    BadInput(String),
}

/// Task-specific gold payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Target {
    /// 5 rows of 5 letters (crossword).
    Grid(Vec<String>),
    /// Four numbers (arithmetic-to-24).
    Numbers(Vec<i64>),
    /// Affinity bucket (synthetic task).
    Bucket(u64),
    /// Free text: an option letter or answer string.
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSample {
    pub id: String,
    pub query: String,
    pub target: Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricKind {
    #[serde(rename = "exact-24")]
    Exact24,
    #[serde(rename = "char-accuracy")]
    CharAccuracy,
    #[serde(rename = "option-accuracy")]
    OptionAccuracy,
    #[serde(rename = "synthetic")]
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub intro: String,
    pub metric: MetricKind,
}

/// Cell-level crossword accuracy: the fraction of the 25 cells matching
/// gold, case-insensitive. Prediction cells may be blank (they just miss).
pub fn crossword_accuracy(predicted: &[String], gold: &[String]) -> Result<f64, TaskError> {
    let check_shape = |grid: &[String], who: &str| -> Result<(), TaskError> {
        if grid.len() != 5 || grid.iter().any(|row| row.chars().count() != 5) {
            return Err(TaskError::BadGrid(format!("{who} grid has wrong shape")));
        }
        Ok(())
    };
    check_shape(gold, "gold")?;
    check_shape(predicted, "predicted")?;
    let mut matches = 0usize;
    for (prow, grow) in predicted.iter().zip(gold) {
        for (p, g) in prow.chars().zip(grow.chars()) {
            if p.eq_ignore_ascii_case(&g) && g.is_ascii_alphabetic() {
                matches += 1;
            }
        }
    }
    Ok(matches as f64 / 25.0)
}

/// 1.0 iff the first standalone option letter extracted from `predicted`
/// equals `gold`. Extraction: the first single letter token, optionally
/// followed by ')' or '.'. No extractable letter scores 0.
pub fn mcq_score(predicted: &str, gold: char) -> f64 {
    if !gold.is_ascii_uppercase() {
        return 0.0;
    }
    match extract_option_letter(predicted) {
        Some(letter) if letter == gold => 1.0,
        _ => 0.0,
    }
}

fn extract_option_letter(text: &str) -> Option<char> {
    let re = Regex::new(r"(?:^|[^A-Za-z0-9])([A-Za-z])[).]?(?:[^A-Za-z0-9]|$)")
        .expect("static regex");
    re.captures(text)
        .and_then(|c| c.get(1))
        .and_then(|m| m.as_str().chars().next())
        .map(|c| c.to_ascii_uppercase())
}

/// Pulls a 5x5 prediction grid out of free-form answer text. Candidate rows
/// are lines made of letters and whitespace only (prose with punctuation is
/// skipped) carrying at least five letters; the first five such lines
/// contribute their first five letters, and missing rows become blanks.
pub fn extract_grid(answer: &str) -> Vec<String> {
    let mut rows: Vec<String> = answer
        .lines()
        .filter_map(|line| {
            if !line
                .chars()
                .all(|c| c.is_ascii_alphabetic() || c.is_whitespace())
            {
                return None;
            }
            let letters: String = line.chars().filter(|c| c.is_ascii_alphabetic()).collect();
            if letters.chars().count() >= 5 {
                Some(letters.chars().take(5).collect())
            } else {
                None
            }
        })
        .take(5)
        .collect();
    while rows.len() < 5 {
        rows.push(" ".repeat(5));
    }
    rows
}

/// Scores a raw answer text against a sample under the task metric. All
/// metrics return values in [0, 1]; scoring never errors on bad answers.
pub fn score_answer(spec: &TaskSpec, sample: &TaskSample, answer: &str) -> f64 {
    match (spec.metric, &sample.target) {
        (MetricKind::Exact24, Target::Numbers(numbers)) => {
            let Ok(numbers) = <[i64; 4]>::try_from(numbers.as_slice()) else {
                return 0.0;
            };
            let trimmed = answer.trim();
            if game24_check(&numbers, trimmed) == 1.0 {
                return 1.0;
            }
            answer
                .lines()
                .any(|line| game24_check(&numbers, line.trim()) == 1.0) as u8 as f64
        }
        (MetricKind::CharAccuracy, Target::Grid(gold)) => {
            crossword_accuracy(&extract_grid(answer), gold).unwrap_or(0.0)
        }
        (MetricKind::OptionAccuracy, Target::Text(gold)) => {
            let Some(gold_letter) = gold.trim().chars().next() else {
                return 0.0;
            };
            mcq_score(answer, gold_letter.to_ascii_uppercase())
        }
        // Synthetic samples are scored by the matrix-backed runner, not from
        // answer text.
        _ => 0.0,
    }
}

/// Train / dev / test splits, in that order.
pub type SplitSamples = (Vec<TaskSample>, Vec<TaskSample>, Vec<TaskSample>);

/// Reads a JSONL dataset and splits it 8:1:1 after a seeded shuffle. Sizes
/// are `floor(0.8 n)` / `floor(0.1 n)` / remainder; membership is a pure
/// function of the seed.
pub fn load_split(path: &Path, seed: u64) -> Result<SplitSamples, TaskError> {
    let text = std::fs::read_to_string(path).map_err(|source| TaskError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut samples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let sample: TaskSample =
            serde_json::from_str(line).map_err(|e| TaskError::Malformed {
                line: i + 1,
                message: e.to_string(),
            })?;
        samples.push(sample);
    }
    Ok(split_samples(samples, seed))
}

/// The 8:1:1 split itself, on already-loaded samples.
pub fn split_samples(
    mut samples: Vec<TaskSample>,
    seed: u64,
) -> (Vec<TaskSample>, Vec<TaskSample>, Vec<TaskSample>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..samples.len()).rev() {
        samples.swap(i, rng.gen_range(0..=i));
    }
    let n = samples.len();
    let train_len = n * 8 / 10;
    let dev_len = n / 10;
    let mut train = samples;
    let rest = train.split_off(train_len);
    let mut dev = rest;
    let test = dev.split_off(dev_len.min(dev.len()));
    (train, dev, test)
}

/// Width of the query-length band that encodes the affinity bucket; kept in
/// step with the feature extractor's length bucketing.
const BUCKET_LEN_WIDTH: usize = 32;

/// Generates a controlled dataset where the best candidate depends on a
/// per-sample feature bucket while per-candidate average performance stays
/// nearly flat.
///
/// Each sample carries its bucket both as a token (`bkt<b>`) and as the
/// query length (mid-band of length bucket `b`). The ground-truth matrix
/// gives the matching candidate a high score (around 0.8) and the others low
/// ones (around 0.25), with small seeded jitter so ties never occur.
pub fn synthetic_affinity_task(
    num_samples: usize,
    k: usize,
    seed: u64,
) -> (Vec<TaskSample>, ScoreMatrix) {
    assert!(k >= 2, "need at least two candidates");
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0xA11F));
    let mut samples = Vec::with_capacity(num_samples);
    let mut values = Vec::with_capacity(num_samples);
    let mut ids = Vec::with_capacity(num_samples);
    for i in 0..num_samples {
        let bucket = rng.gen_range(0..k);
        let id = format!("syn-{i:05}");
        let prefix = format!("sample {i:05} kind bkt{bucket} ");
        let want_len = BUCKET_LEN_WIDTH * (bucket % 8) + BUCKET_LEN_WIDTH / 2;
        let pad = want_len.saturating_sub(prefix.chars().count());
        let query = format!("{prefix}{}", "x".repeat(pad));

        let row: Vec<f64> = (0..k)
            .map(|c| {
                let jitter = rng.gen_range(0.0..0.05);
                if c == bucket {
                    0.78 + jitter
                } else {
                    0.22 + jitter
                }
            })
            .collect();
        values.push(row);
        samples.push(TaskSample {
            id: id.clone(),
            query,
            target: Target::Bucket(bucket as u64),
        });
        ids.push(id);
    }
    let matrix = ScoreMatrix::new(ids, values).expect("generator emits a valid matrix");
    (samples, matrix)
}
