//! OpenAI-compatible `/chat/completions` provider.

use std::thread;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::header::RETRY_AFTER;
use reqwest::StatusCode;
use serde::Serialize;
use serde_json::Value;

use super::ratelimit::RateLimiter;
use super::{ChatProvider, ChatRequest, ClientError, ConfigError, ProviderKind, RunConfig};

pub const API_KEY_ENV: &str = "SIMRAG_API_KEY";

/// Backoff for transport failures and provider throttling. Independent of
/// the format-check retries counted in `RunConfig::max_retries`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(250),
            max_delay: Duration::from_secs(8),
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 2u32.saturating_pow(retry);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct Body<'a> {
    model: &'a str,
    temperature: f64,
    seed: u64,
    messages: [Message<'a>; 2],
}

#[derive(Debug)]
pub struct HttpProvider {
    client: Client,
    url: String,
    api_key: Option<String>,
    limiter: Option<RateLimiter>,
    retry: RetryPolicy,
}

enum Failure {
    Retryable(ClientError, Option<Duration>),
    Fatal(ClientError),
}

impl HttpProvider {
    pub fn new(config: &RunConfig, api_key: Option<String>) -> Result<Self, ConfigError> {
        config.validate()?;
        let client = Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| ConfigError::Invalid(format!("cannot build HTTP client: {e}")))?;
        Ok(HttpProvider {
            client,
            url: format!("{}/chat/completions", config.endpoint.trim_end_matches('/')),
            api_key: api_key.filter(|k| !k.is_empty()),
            limiter: config.rate_limit.map(RateLimiter::per_second),
            retry: RetryPolicy::default(),
        })
    }

    /// Reads the key from `SIMRAG_API_KEY`.
    pub fn from_env(config: &RunConfig) -> Result<Self, ConfigError> {
        Self::new(config, std::env::var(API_KEY_ENV).ok())
    }

    pub fn with_retry_policy(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn post_once(&self, body: &Body<'_>) -> Result<String, Failure> {
        if let Some(limiter) = &self.limiter {
            limiter.acquire();
        }
        let mut req = self.client.post(&self.url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| Failure::Retryable(ClientError::Transport(e.to_string()), None))?;
        let status = resp.status();
        let retry_after = resp
            .headers()
            .get(RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<f64>().ok())
            .filter(|s| s.is_finite() && *s >= 0.0)
            .map(Duration::from_secs_f64);
        let text = resp
            .text()
            .map_err(|e| Failure::Retryable(ClientError::Transport(e.to_string()), None))?;
        if status == StatusCode::TOO_MANY_REQUESTS {
            return Err(Failure::Retryable(
                ClientError::RateLimited { attempts: 0 },
                retry_after,
            ));
        }
        if status.is_server_error() {
            return Err(Failure::Retryable(
                ClientError::Transport(format!("HTTP {status}: {text}")),
                retry_after,
            ));
        }
        if !status.is_success() {
            return Err(Failure::Fatal(ClientError::Provider(format!("HTTP {status}: {text}"))));
        }
        extract_content(&text).map_err(Failure::Fatal)
    }
}

/// Reads `choices[0].message.content` from a completion payload.
fn extract_content(payload: &str) -> Result<String, ClientError> {
    let value: Value = serde_json::from_str(payload)
        .map_err(|e| ClientError::Provider(format!("invalid JSON response ({e}): {payload}")))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| ClientError::Provider(format!("response has no message content: {payload}")))
}

impl ChatProvider for HttpProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Http
    }

    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, ClientError> {
        let body = Body {
            model: request.model,
            temperature: request.temperature,
            seed: request.seed,
            messages: [
                Message {
                    role: "system",
                    content: request.system,
                },
                Message {
                    role: "user",
                    content: request.user,
                },
            ],
        };
        let mut retry = 0;
        loop {
            match self.post_once(&body) {
                Ok(text) => return Ok(text),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable(e, hint)) => {
                    if retry >= self.retry.max_retries {
                        return Err(match e {
                            ClientError::RateLimited { .. } => {
                                ClientError::RateLimited { attempts: retry + 1 }
                            }
                            other => other,
                        });
                    }
                    let delay = hint
                        .map(|h| h.min(self.retry.max_delay))
                        .unwrap_or_else(|| self.retry.delay(retry));
                    log::warn!("{e}; retrying in {delay:?}");
                    thread::sleep(delay);
                    retry += 1;
                }
            }
        }
    }
}
