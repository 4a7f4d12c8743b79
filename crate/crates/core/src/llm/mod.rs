//! Chat-completion providers and the per-pair scoring loop.

mod http;
mod mock;
mod ratelimit;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::SentencePair;
use crate::parser::{parse_similarity, ParseError};
use crate::prompt::ExampleSelection;

pub use http::{HttpProvider, RetryPolicy, API_KEY_ENV};
pub use mock::{derive_seed, MockConfig, MockProvider, MALFORMED_RESPONSES, NOISE_STREAM};
pub use ratelimit::RateLimiter;

pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo";
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1";
pub const DEFAULT_MAX_RETRIES: u32 = 3;
/// Upper bound accepted for `max_retries`.
pub const MAX_RETRIES_LIMIT: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Http,
    Mock,
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProviderKind::Http => "http",
            ProviderKind::Mock => "mock",
        })
    }
}

impl FromStr for ProviderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "http" => Ok(ProviderKind::Http),
            "mock" => Ok(ProviderKind::Mock),
            other => Err(format!("unknown provider `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("temperature {0} is outside [0, 1]")]
    Temperature(f64),
    #[error("max_retries {0} exceeds the limit of {MAX_RETRIES_LIMIT}")]
    MaxRetries(u32),
    #[error("rate limit must be a positive number of requests per second, got {0}")]
    RateLimit(f64),
    #[error("invalid endpoint `{0}`")]
    Endpoint(String),
    #[error("{0}")]
    Invalid(String),
}

/// Everything that determines one evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model_name: String,
    pub temperature: f64,
    /// Forwarded to the provider as the sampling seed.
    pub seed: u64,
    pub k_examples: usize,
    pub selection: ExampleSelection,
    pub selection_seed: u64,
    pub max_retries: u32,
    pub endpoint: String,
    #[serde(with = "millis")]
    pub timeout: Duration,
    /// Requests per second shared by all in-flight calls; `None` is unlimited.
    pub rate_limit: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model_name: DEFAULT_MODEL.to_string(),
            temperature: 0.5,
            seed: 42,
            k_examples: 20,
            selection: ExampleSelection::Random,
            selection_seed: 0,
            max_retries: DEFAULT_MAX_RETRIES,
            endpoint: DEFAULT_ENDPOINT.to_string(),
            timeout: Duration::from_secs(60),
            rate_limit: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(ConfigError::Temperature(self.temperature));
        }
        if self.max_retries > MAX_RETRIES_LIMIT {
            return Err(ConfigError::MaxRetries(self.max_retries));
        }
        if let Some(r) = self.rate_limit {
            if !(r.is_finite() && r > 0.0) {
                return Err(ConfigError::RateLimit(r));
            }
        }
        reqwest::Url::parse(&self.endpoint)
            .map_err(|_| ConfigError::Endpoint(self.endpoint.clone()))?;
        if self.model_name.trim().is_empty() {
            return Err(ConfigError::Invalid("model name is empty".into()));
        }
        Ok(())
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

/// One chat-completion call.
///
/// `pair_id` and `attempt` are routing metadata for offline providers and are
/// never sent over the wire.
#[derive(Debug, Clone, Copy)]
pub struct ChatRequest<'a> {
    pub model: &'a str,
    pub temperature: f64,
    pub seed: u64,
    pub system: &'a str,
    pub user: &'a str,
    pub pair_id: Option<u64>,
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClientError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("rate limited by provider after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("provider error: {0}")]
    Provider(String),
}

pub trait ChatProvider: Send + Sync {
    fn kind(&self) -> ProviderKind;

    /// Returns the assistant message text, untrimmed.
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, ClientError>;
}

impl<P: ChatProvider + ?Sized> ChatProvider for Box<P> {
    fn kind(&self) -> ProviderKind {
        (**self).kind()
    }

    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, ClientError> {
        (**self).complete(request)
    }
}

/// Sends the two prompts with the run's model, temperature and seed.
pub fn chat_complete(
    provider: &dyn ChatProvider,
    config: &RunConfig,
    system_prompt: &str,
    user_prompt: &str,
) -> Result<String, ClientError> {
    provider.complete(&ChatRequest {
        model: &config.model_name,
        temperature: config.temperature,
        seed: config.seed,
        system: system_prompt,
        user: user_prompt,
        pair_id: None,
        attempt: 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub system_prompt: String,
    pub user_prompt: String,
    pub raw_response: String,
    pub attempts: u32,
    pub provider: ProviderKind,
}

/// A test pair with the score the model produced for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub pair: SentencePair,
    /// `None` when every attempt failed the format check.
    pub model_score: Option<f64>,
    pub raw_response: String,
    pub attempts: u32,
}

impl ScoredPair {
    pub fn excluded(&self) -> bool {
        self.model_score.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error("pair {pair_id}: no well-formed score after {attempts} attempts; last response {last_response:?}")]
    FormatExhausted {
        pair_id: u64,
        last_response: String,
        attempts: u32,
    },
    #[error("pair {pair_id}: {source}")]
    Client {
        pair_id: u64,
        #[source]
        source: ClientError,
    },
}

/// Runs the conversational exchange for `pair`, re-asking with identical
/// prompts while the response fails the format check.
///
/// An out-of-range score counts as a format failure. At most
/// `max_retries + 1` calls are made.
pub fn score_pair(
    provider: &dyn ChatProvider,
    config: &RunConfig,
    system_prompt: &str,
    pair: &SentencePair,
) -> Result<ScoredPair, ScoreError> {
    let user_prompt = crate::prompt::build_user_prompt(pair);
    let (exchange, parsed) = converse(provider, config, system_prompt, &user_prompt, pair.id)?;
    match parsed {
        Ok(score) => Ok(ScoredPair {
            pair: pair.clone(),
            model_score: Some(score),
            raw_response: exchange.raw_response,
            attempts: exchange.attempts,
        }),
        Err(_) => Err(ScoreError::FormatExhausted {
            pair_id: pair.id,
            last_response: exchange.raw_response,
            attempts: exchange.attempts,
        }),
    }
}

fn converse(
    provider: &dyn ChatProvider,
    config: &RunConfig,
    system_prompt: &str,
    user_prompt: &str,
    pair_id: u64,
) -> Result<(ChatExchange, Result<f64, ParseError>), ScoreError> {
    let mut last = String::new();
    let mut outcome = Err(ParseError::NoMatch);
    let mut attempts = 0;
    for attempt in 0..=config.max_retries {
        attempts = attempt + 1;
        let request = ChatRequest {
            model: &config.model_name,
            temperature: config.temperature,
            seed: config.seed,
            system: system_prompt,
            user: user_prompt,
            pair_id: Some(pair_id),
            attempt,
        };
        last = provider
            .complete(&request)
            .map_err(|source| ScoreError::Client { pair_id, source })?;
        outcome = parse_similarity(&last).map(|p| p.value);
        match &outcome {
            Ok(_) => break,
            Err(e) => log::debug!("pair {pair_id} attempt {attempts}: {e}"),
        }
    }
    let exchange = ChatExchange {
        system_prompt: system_prompt.to_string(),
        user_prompt: user_prompt.to_string(),
        raw_response: last,
        attempts,
        provider: provider.kind(),
    };
    Ok((exchange, outcome))
}
