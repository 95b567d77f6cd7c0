//! Text-generation contract and the deterministic in-process mock.
//!
//! Everything that executes graphs talks to a [`TextBackend`]. The mock
//! derives completions from a keyed hash of `(seed, prompt)`, so whole runs
//! are pure functions of their inputs and reproduce bit-for-bit on any
//! platform.

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("server error (status {status}) after {attempts} attempts")]
    Server { status: u16, attempts: u32 },
    #[error("authentication rejected")]
    Auth,
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("request timed out")]
    Timeout,
    #[error("connection failed: {0}")]
    Connection(String),
    #[error("unexpected HTTP status {0}")]
    Http(u16),
    #[error("configuration error: {0}")]
    Config(String),
}

/// Per-call generation knobs.
#[derive(Debug, Clone)]
pub struct GenParams {
    /// Seed threaded through deterministic backends; ignored by HTTP ones.
    pub seed: u64,
    pub max_tokens: u32,
    pub temperature: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            seed: 0,
            max_tokens: 256,
            temperature: 0.0,
        }
    }
}

/// Abstract completion backend. Implementations must be safe for concurrent
/// in-flight requests.
pub trait TextBackend: Send + Sync {
    fn complete(&self, prompt: &str, params: &GenParams) -> Result<String, BackendError>;

    fn healthcheck(&self) -> Result<(), BackendError>;

    /// Accounted seconds per call for simulated-time backends; `None` means
    /// callers should measure wall time instead.
    fn call_cost(&self) -> Option<f64> {
        None
    }
}

/// Marker that plants an answer inside a prompt: the mock echoes the text
/// between `<<ANSWER:` and `>>` so tests can construct solvable tasks.
pub const ANSWER_MARKER_OPEN: &str = "<<ANSWER:";
pub const ANSWER_MARKER_CLOSE: &str = ">>";

/// Accounted seconds per mock backend call.
pub const MOCK_CALL_COST: f64 = 0.05;

/// Deterministic in-process backend.
///
/// Output is a pseudo-token sequence derived from `sha256(seed || prompt)`.
/// If the prompt carries an answer marker, the planted text is echoed
/// instead.
#[derive(Debug, Clone, Default)]
pub struct MockBackend;

impl MockBackend {
    pub fn new() -> Self {
        Self
    }

    /// The pure core: completion as a function of `(prompt, seed)` only.
    pub fn complete_with_seed(prompt: &str, seed: u64, max_tokens: u32) -> String {
        if let Some(planted) = extract_planted_answer(prompt) {
            return planted.to_string();
        }
        let mut hasher = Sha256::new();
        hasher.update(seed.to_le_bytes());
        hasher.update(prompt.as_bytes());
        let digest = hasher.finalize();
        let words = (max_tokens as usize / 4).clamp(1, 12);
        let mut out = String::new();
        for (i, chunk) in digest.chunks(4).take(words).enumerate() {
            if i > 0 {
                out.push(' ');
            }
            for b in chunk {
                out.push_str(&format!("{b:02x}"));
            }
        }
        out
    }
}

fn extract_planted_answer(prompt: &str) -> Option<&str> {
    let start = prompt.find(ANSWER_MARKER_OPEN)? + ANSWER_MARKER_OPEN.len();
    let rest = &prompt[start..];
    let end = rest.find(ANSWER_MARKER_CLOSE)?;
    Some(&rest[..end])
}

impl TextBackend for MockBackend {
    fn complete(&self, prompt: &str, params: &GenParams) -> Result<String, BackendError> {
        Ok(Self::complete_with_seed(prompt, params.seed, params.max_tokens))
    }

    fn healthcheck(&self) -> Result<(), BackendError> {
        Ok(())
    }

    fn call_cost(&self) -> Option<f64> {
        Some(MOCK_CALL_COST)
    }
}
