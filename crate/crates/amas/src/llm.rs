//! OpenAI-compatible chat-completions client.
//!
//! Speaks `POST {base_url}/chat/completions` with a JSON body
//! `{"model", "messages", "temperature", "max_tokens"}` and reads the first
//! choice's message content. 429 and 5xx responses retry with exponential
//! backoff (base 1s, factor 2, equal jitter) up to `max_retries`; auth
//! failures, protocol errors, and timeouts fail immediately. The API key is
//! read from the environment variable named in the config and never logged.

use crate::backend::{BackendError, GenParams, TextBackend};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub base_url: String,
    pub model_name: String,
    pub api_key_env: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retry_base")]
    pub retry_base_secs: f64,
}

fn default_max_retries() -> u32 {
    3
}

fn default_timeout() -> f64 {
    30.0
}

fn default_retry_base() -> f64 {
    1.0
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.timeout_secs <= 0.0 {
            return Err(BackendError::Config("timeout must be positive".into()));
        }
        if self.temperature < 0.0 {
            return Err(BackendError::Config(
                "temperature must be non-negative".into(),
            ));
        }
        if self.retry_base_secs <= 0.0 {
            return Err(BackendError::Config("retry base must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [Message],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: String,
}

#[derive(Deserialize)]
struct Usage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

/// Jittered backoff delay before retry `retry_index` (0-based): uniform in
/// `[base * 2^i / 2, base * 2^i]`.
pub fn backoff_delay(base_secs: f64, retry_index: u32, rng: &mut impl Rng) -> Duration {
    let full = base_secs * 2f64.powi(retry_index as i32);
    Duration::from_secs_f64(rng.gen_range(full / 2.0..=full))
}

pub struct LlmClient {
    config: BackendConfig,
    api_key: String,
    http: reqwest::blocking::Client,
    prompt_tokens: AtomicU64,
    completion_tokens: AtomicU64,
}

impl std::fmt::Debug for LlmClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // Redacted on purpose: no key material in logs.
        f.debug_struct("LlmClient")
            .field("base_url", &self.config.base_url)
            .field("model", &self.config.model_name)
            .finish()
    }
}

impl LlmClient {
    pub fn new(config: BackendConfig) -> Result<Self, BackendError> {
        config.validate()?;
        let api_key = std::env::var(&config.api_key_env).map_err(|_| {
            BackendError::Config(format!(
                "environment variable {} is not set",
                config.api_key_env
            ))
        })?;
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(Self {
            config,
            api_key,
            http,
            prompt_tokens: AtomicU64::new(0),
            completion_tokens: AtomicU64::new(0),
        })
    }

    /// Accumulated `(prompt, completion)` token usage reported by the server.
    pub fn usage(&self) -> (u64, u64) {
        (
            self.prompt_tokens.load(Ordering::Relaxed),
            self.completion_tokens.load(Ordering::Relaxed),
        )
    }

    fn classify_send_error(err: reqwest::Error) -> BackendError {
        if err.is_timeout() {
            BackendError::Timeout
        } else {
            BackendError::Connection(err.to_string())
        }
    }

    /// Sends the chat request, retrying 429/5xx per the backoff schedule.
    /// Total attempts never exceed `1 + max_retries`.
    pub fn complete_messages(
        &self,
        messages: &[Message],
        params: &GenParams,
    ) -> Result<String, BackendError> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let body = ChatRequest {
            model: &self.config.model_name,
            messages,
            temperature: self.config.temperature,
            max_tokens: params.max_tokens,
        };
        let mut rng = rand::thread_rng();
        let mut attempts = 0u32;
        loop {
            attempts += 1;
            let response = self
                .http
                .post(&url)
                .bearer_auth(&self.api_key)
                .json(&body)
                .send();
            let retry_status = match response {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        let parsed: ChatResponse = resp
                            .json()
                            .map_err(|e| BackendError::Protocol(e.to_string()))?;
                        if let Some(usage) = &parsed.usage {
                            self.prompt_tokens
                                .fetch_add(usage.prompt_tokens, Ordering::Relaxed);
                            self.completion_tokens
                                .fetch_add(usage.completion_tokens, Ordering::Relaxed);
                        }
                        let first = parsed
                            .choices
                            .into_iter()
                            .next()
                            .ok_or_else(|| BackendError::Protocol("no choices".into()))?;
                        return Ok(first.message.content);
                    }
                    match status.as_u16() {
                        401 | 403 => return Err(BackendError::Auth),
                        429 => 429,
                        s if (500..600).contains(&s) => s,
                        s => return Err(BackendError::Http(s)),
                    }
                }
                Err(err) => return Err(Self::classify_send_error(err)),
            };
            if attempts > self.config.max_retries {
                return Err(match retry_status {
                    429 => BackendError::RateLimited { attempts },
                    s => BackendError::Server { status: s, attempts },
                });
            }
            std::thread::sleep(backoff_delay(
                self.config.retry_base_secs,
                attempts - 1,
                &mut rng,
            ));
        }
    }
}

impl TextBackend for LlmClient {
    fn complete(&self, prompt: &str, params: &GenParams) -> Result<String, BackendError> {
        self.complete_messages(&[Message::user(prompt)], params)
    }

    /// Lightweight auth + reachability probe against `GET {base_url}/models`.
    fn healthcheck(&self) -> Result<(), BackendError> {
        let url = format!("{}/models", self.config.base_url.trim_end_matches('/'));
        let response = self
            .http
            .get(&url)
            .bearer_auth(&self.api_key)
            .send()
            .map_err(Self::classify_send_error)?;
        match response.status().as_u16() {
            s if (200..300).contains(&s) => Ok(()),
            401 | 403 => Err(BackendError::Auth),
            s => Err(BackendError::Http(s)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn backoff_delays_stay_within_jitter_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for retry in 0..5u32 {
            for _ in 0..200 {
                let d = backoff_delay(1.0, retry, &mut rng).as_secs_f64();
                let full = 2f64.powi(retry as i32);
                assert!(d >= full / 2.0 && d <= full, "retry {retry}: {d}");
            }
        }
    }

    #[test]
    fn config_validation() {
        let good = BackendConfig {
            base_url: "http://localhost:1".into(),
            model_name: "m".into(),
            api_key_env: "NOPE_KEY".into(),
            temperature: 0.0,
            max_retries: 0,
            timeout_secs: 1.0,
            retry_base_secs: 1.0,
        };
        assert!(good.validate().is_ok());
        let bad = BackendConfig {
            timeout_secs: 0.0,
            ..good.clone()
        };
        assert!(bad.validate().is_err());
        // Missing key environment variable surfaces as a config error.
        assert!(matches!(
            LlmClient::new(good),
            Err(BackendError::Config(_))
        ));
    }

    #[test]
    fn debug_never_leaks_the_key() {
        std::env::set_var("AMAS_TEST_KEY_REDACT", "super-secret-token");
        let client = LlmClient::new(BackendConfig {
            base_url: "http://localhost:1".into(),
            model_name: "m".into(),
            api_key_env: "AMAS_TEST_KEY_REDACT".into(),
            temperature: 0.0,
            max_retries: 0,
            timeout_secs: 1.0,
            retry_base_secs: 0.01,
        })
        .unwrap();
        let printed = format!("{client:?}");
        assert!(!printed.contains("super-secret-token"));
    }
}
