//! Deterministic offline provider.
//!
//! Scores come from a lookup table keyed by pair id, optionally perturbed by
//! seeded Gaussian noise, and are formatted with the template the parser
//! expects. A configurable fraction of attempts answers without the score
//! marker.
//!
//! Randomness is derived statelessly so responses do not depend on call
//! order or thread scheduling:
//!
//! * noise for pair `id` under request seed `s`: the first `StandardNormal`
//!   draw from `ChaCha8Rng::seed_from_u64(derive_seed(s, id, NOISE_STREAM))`;
//!   the served score is `clamp(reference + sigma * z, 0, 4)` rounded to two
//!   decimals;
//! * attempt `a` is malformed when the first uniform `f64` drawn from
//!   `ChaCha8Rng::seed_from_u64(derive_seed(s, id, a))` is below the rate.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::thread;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ChatProvider, ChatRequest, ClientError, ConfigError, ProviderKind};
use crate::dataset::{Dataset, SentencePair, MAX_SCORE, MIN_SCORE};
use crate::prompt::{build_user_prompt, render_score};

/// Stream tag reserved for the noise draw.
pub const NOISE_STREAM: u64 = u64::MAX;

pub const MALFORMED_RESPONSES: [&str; 3] = [
    "I think they are similar.",
    "Both sentences discuss related findings, so the score would be moderate.",
    "Score: high",
];

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one (request seed, pair, stream) triple.
pub fn derive_seed(seed: u64, pair_id: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ pair_id) ^ stream)
}

/// Mock configuration file: `{"scores": {"<id>": score}, "malformed_rate": r, "noise_sigma": s}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockConfig {
    pub scores: BTreeMap<u64, f64>,
    #[serde(default)]
    pub malformed_rate: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    /// Simulated per-call latency.
    #[serde(default)]
    pub latency_ms: u64,
}

impl MockConfig {
    /// Echo table: every pair answers with its reference score.
    pub fn echo(dataset: &Dataset) -> Self {
        MockConfig {
            scores: dataset
                .iter()
                .map(|(_, p)| (p.id, p.reference_score))
                .collect(),
            malformed_rate: 0.0,
            noise_sigma: 0.0,
            latency_ms: 0,
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError::Invalid(format!("cannot read mock table {}: {e}", path.display())))?;
        let config: MockConfig = serde_json::from_str(&text)
            .map_err(|e| ConfigError::Invalid(format!("invalid mock table {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.malformed_rate) {
            return Err(ConfigError::Invalid(format!(
                "malformed_rate {} is outside [0, 1]",
                self.malformed_rate
            )));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(ConfigError::Invalid(format!(
                "noise_sigma {} must be a non-negative number",
                self.noise_sigma
            )));
        }
        if let Some((id, s)) = self
            .scores
            .iter()
            .find(|(_, s)| !(MIN_SCORE..=MAX_SCORE).contains(*s))
        {
            return Err(ConfigError::Invalid(format!(
                "mock score {s} for pair {id} is outside [0, 4]"
            )));
        }
        Ok(())
    }

    /// Digest of everything that influences responses; distinguishes mock
    /// tables in the run cache. Latency is excluded.
    pub fn fingerprint(&self) -> String {
        let key = serde_json::json!({
            "scores": self.scores,
            "malformed_rate": self.malformed_rate,
            "noise_sigma": self.noise_sigma,
        });
        let digest = Sha256::digest(key.to_string().as_bytes());
        format!("mock:{}", hex::encode(&digest[..8]))
    }

    /// The score served for `pair_id` under request seed `seed`.
    pub fn served_score(&self, seed: u64, pair_id: u64) -> Option<f64> {
        let reference = *self.scores.get(&pair_id)?;
        if self.noise_sigma == 0.0 {
            return Some(reference);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, pair_id, NOISE_STREAM));
        let z: f64 = rng.sample(StandardNormal);
        let noisy = (reference + self.noise_sigma * z).clamp(MIN_SCORE, MAX_SCORE);
        Some((noisy * 100.0).round() / 100.0)
    }

    fn malformed(&self, seed: u64, pair_id: u64, attempt: u32) -> Option<&'static str> {
        if self.malformed_rate == 0.0 {
            return None;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, pair_id, u64::from(attempt)));
        let u: f64 = rng.random();
        (u < self.malformed_rate)
            .then(|| MALFORMED_RESPONSES[rng.random_range(0..MALFORMED_RESPONSES.len())])
    }
}

#[derive(Debug, Clone)]
pub struct MockProvider {
    config: MockConfig,
    prompt_index: HashMap<String, u64>,
}

impl MockProvider {
    pub fn new(config: MockConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(MockProvider {
            config,
            prompt_index: HashMap::new(),
        })
    }

    /// Lets calls without pair metadata be resolved from their user prompt.
    pub fn with_prompt_index<'a>(mut self, pairs: impl IntoIterator<Item = &'a SentencePair>) -> Self {
        self.prompt_index
            .extend(pairs.into_iter().map(|p| (build_user_prompt(p), p.id)));
        self
    }

    pub fn config(&self) -> &MockConfig {
        &self.config
    }
}

impl ChatProvider for MockProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Mock
    }

    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, ClientError> {
        if self.config.latency_ms > 0 {
            thread::sleep(Duration::from_millis(self.config.latency_ms));
        }
        let pair_id = request
            .pair_id
            .or_else(|| self.prompt_index.get(request.user).copied())
            .ok_or_else(|| ClientError::Provider("mock cannot identify the sentence pair".into()))?;
        if let Some(text) = self.config.malformed(request.seed, pair_id, request.attempt) {
            return Ok(text.to_string());
        }
        let score = self
            .config
            .served_score(request.seed, pair_id)
            .ok_or_else(|| ClientError::Provider(format!("mock table has no score for pair {pair_id}")))?;
        Ok(format!("Similarity score : {}", render_score(score)))
    }
}
