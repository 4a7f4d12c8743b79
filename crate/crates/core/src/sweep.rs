//! Evaluation runs and parameter sweeps.
//!
//! A run builds one system prompt, scores every test pair against it and
//! correlates the model scores with the references. Sweeps vary temperature,
//! example count, or both, and record failed cells instead of aborting.

use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::exec::Executor;
use crate::llm::{score_pair, ChatProvider, ConfigError, ProviderKind, RunConfig, ScoreError, ScoredPair};
use crate::prompt::{build_system_prompt, ExampleSelection, PromptError};
use crate::report::{ReportError, RunStore};
use crate::stats::{pearson_slices, CorrelationResult, StatsError};

/// Temperatures 0.0, 0.1, ..., 1.0.
pub fn default_temperatures() -> Vec<f64> {
    (0..=10).map(|i| f64::from(i) / 10.0).collect()
}

/// Example counts 0, 10, ..., 60.
pub fn default_sample_sizes() -> Vec<usize> {
    (0..=6).map(|i| i * 10).collect()
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Client(ScoreError),
    #[error("test split is empty")]
    EmptyTestSplit,
    #[error("all {0} pairs were excluded after exhausting format retries")]
    AllPairsExcluded(usize),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("no temperatures or sample sizes to sweep")]
    EmptySweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: RunConfig,
    pub provider: ProviderKind,
    pub config_hash: String,
    pub system_prompt: String,
    pub example_ids: Vec<u64>,
    /// Ordered by pair id.
    pub scored: Vec<ScoredPair>,
    pub correlation: CorrelationResult,
    pub timestamp: String,
}

impl RunResult {
    pub fn excluded_ids(&self) -> Vec<u64> {
        self.scored
            .iter()
            .filter(|s| s.excluded())
            .map(|s| s.pair.id)
            .collect()
    }
}

/// Identity of a run for caching: everything that can change its scores.
#[derive(Serialize)]
struct CellKey<'a> {
    dataset: &'a str,
    provider: ProviderKind,
    provider_fingerprint: &'a str,
    model: &'a str,
    temperature: f64,
    seed: u64,
    k: usize,
    selection: ExampleSelection,
    selection_seed: u64,
    max_retries: u32,
}

/// Binds a dataset to a provider and an executor.
pub struct Harness<'a> {
    pub dataset: &'a Dataset,
    pub provider: &'a dyn ChatProvider,
    /// Distinguishes provider configurations in the run cache, e.g. a digest
    /// of the mock table or the endpoint URL.
    pub provider_fingerprint: String,
    pub executor: &'a Executor,
    pub store: Option<RunStore>,
    dataset_digest: String,
}

impl<'a> Harness<'a> {
    pub fn new(
        dataset: &'a Dataset,
        provider: &'a dyn ChatProvider,
        provider_fingerprint: impl Into<String>,
        executor: &'a Executor,
    ) -> Self {
        Harness {
            dataset,
            provider,
            provider_fingerprint: provider_fingerprint.into(),
            executor,
            store: None,
            dataset_digest: dataset.digest(),
        }
    }

    /// Persists every completed run and reuses runs already on disk.
    pub fn with_store(mut self, store: RunStore) -> Self {
        self.store = Some(store);
        self
    }

    pub fn dataset_digest(&self) -> &str {
        &self.dataset_digest
    }

    /// Content address of the run `config` would produce.
    pub fn config_hash(&self, config: &RunConfig) -> String {
        let key = CellKey {
            dataset: &self.dataset_digest,
            provider: self.provider.kind(),
            provider_fingerprint: &self.provider_fingerprint,
            model: &config.model_name,
            temperature: config.temperature,
            seed: config.seed,
            k: config.k_examples,
            selection: config.selection,
            selection_seed: config.selection_seed,
            max_retries: config.max_retries,
        };
        let json = serde_json::to_string(&key).expect("cell key serializes");
        hex::encode(&Sha256::digest(json.as_bytes())[..8])
    }

    /// One pass over the test split.
    pub fn run_once(&self, config: &RunConfig) -> Result<RunResult, SweepError> {
        config.validate()?;
        let hash = self.config_hash(config);
        if let Some(store) = &self.store {
            if let Some(cached) = store.load(&hash)? {
                log::debug!("reusing run {hash}");
                return Ok(cached);
            }
        }
        let result = self.execute(config, hash)?;
        if let Some(store) = &self.store {
            store.save(&result, &self.provider_fingerprint, &self.dataset_digest)?;
        }
        Ok(result)
    }

    fn execute(&self, config: &RunConfig, config_hash: String) -> Result<RunResult, SweepError> {
        let test = &self.dataset.test;
        if test.is_empty() {
            return Err(SweepError::EmptyTestSplit);
        }
        // Built once: only the user prompt changes from pair to pair.
        let (system_prompt, example_ids) = build_system_prompt(
            &self.dataset.train,
            config.k_examples,
            config.selection,
            config.selection_seed,
        )?;

        // A client error fails the whole run, so later pairs stop calling out.
        let abort = AtomicBool::new(false);
        let outcomes = self.executor.map(test, |pair| {
            if abort.load(Ordering::Relaxed) {
                return None;
            }
            let outcome = score_pair(self.provider, config, &system_prompt, pair);
            if matches!(outcome, Err(ScoreError::Client { .. })) {
                abort.store(true, Ordering::Relaxed);
            }
            Some(outcome)
        });
        if let Some(Err(e)) = outcomes
            .iter()
            .flatten()
            .find(|o| matches!(o, Err(ScoreError::Client { .. })))
        {
            return Err(SweepError::Client(e.clone()));
        }
        let mut scored = Vec::with_capacity(test.len());
        for (pair, outcome) in test.iter().zip(outcomes.into_iter().flatten()) {
            match outcome {
                Ok(s) => scored.push(s),
                Err(ScoreError::FormatExhausted {
                    last_response,
                    attempts,
                    ..
                }) => scored.push(ScoredPair {
                    pair: pair.clone(),
                    model_score: None,
                    raw_response: last_response,
                    attempts,
                }),
                Err(e) => return Err(SweepError::Client(e)),
            }
        }
        scored.sort_by_key(|s| s.pair.id);

        let excluded = scored.iter().filter(|s| s.excluded()).count();
        if excluded == scored.len() {
            return Err(SweepError::AllPairsExcluded(excluded));
        }
        if excluded > 0 {
            log::warn!(
                "{excluded} of {} pairs excluded from the correlation (no well-formed score after {} attempts)",
                scored.len(),
                config.max_retries + 1
            );
        }
        let (model, reference): (Vec<f64>, Vec<f64>) = scored
            .iter()
            .filter_map(|s| s.model_score.map(|m| (m, s.pair.reference_score)))
            .unzip();
        let mut correlation = pearson_slices(&model, &reference, "model", "reference")?;
        correlation.excluded = excluded;

        Ok(RunResult {
            config: config.clone(),
            provider: self.provider.kind(),
            config_hash,
            system_prompt,
            example_ids,
            scored,
            correlation,
            timestamp: chrono::Utc::now().to_rfc3339(),
        })
    }

    /// Runs every (temperature, k) combination; cells are independent.
    pub fn cross_factor_grid(
        &self,
        base: &RunConfig,
        temperatures: &[f64],
        sample_sizes: &[usize],
    ) -> Result<SweepGrid, SweepError> {
        if temperatures.is_empty() || sample_sizes.is_empty() {
            return Err(SweepError::EmptySweep);
        }
        let coords: Vec<(usize, usize)> = (0..temperatures.len())
            .flat_map(|i| (0..sample_sizes.len()).map(move |j| (i, j)))
            .collect();
        let cells = self.executor.map(&coords, |&(i, j)| {
            let config = RunConfig {
                temperature: temperatures[i],
                k_examples: sample_sizes[j],
                ..base.clone()
            };
            let run_hash = self.config_hash(&config);
            let outcome = match self.run_once(&config) {
                Ok(run) => CellOutcome::Ok {
                    correlation: run.correlation,
                },
                Err(e) => {
                    log::warn!("cell temperature={} k={} failed: {e}", config.temperature, config.k_examples);
                    CellOutcome::Failed {
                        error: e.to_string(),
                    }
                }
            };
            SweepCell {
                temperature: config.temperature,
                k: config.k_examples,
                run_hash,
                outcome,
            }
        });
        let width = sample_sizes.len();
        let mut rows = Vec::with_capacity(temperatures.len());
        let mut it = cells.into_iter();
        for _ in temperatures {
            rows.push(it.by_ref().take(width).collect());
        }
        Ok(SweepGrid {
            temperatures: temperatures.to_vec(),
            sample_sizes: sample_sizes.to_vec(),
            base: base.clone(),
            cells: rows,
        })
    }

    /// Varies temperature with everything else fixed.
    pub fn temperature_sweep(&self, base: &RunConfig, temperatures: &[f64]) -> Result<SweepGrid, SweepError> {
        if let Some(&t) = temperatures.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(ConfigError::Temperature(t).into());
        }
        self.cross_factor_grid(base, temperatures, &[base.k_examples])
    }

    /// Varies the number of examples at the base temperature.
    pub fn example_sweep(&self, base: &RunConfig, sample_sizes: &[usize]) -> Result<SweepGrid, SweepError> {
        self.cross_factor_grid(base, &[base.temperature], sample_sizes)
    }
}

/// Convenience wrapper: a single run without caching.
pub fn run_once(
    dataset: &Dataset,
    config: &RunConfig,
    provider: &dyn ChatProvider,
    executor: &Executor,
) -> Result<RunResult, SweepError> {
    Harness::new(dataset, provider, "", executor).run_once(config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CellOutcome {
    Ok { correlation: CorrelationResult },
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub temperature: f64,
    pub k: usize,
    /// Directory name of the run under `runs/`.
    pub run_hash: String,
    #[serde(flatten)]
    pub outcome: CellOutcome,
}

impl SweepCell {
    pub fn correlation(&self) -> Option<&CorrelationResult> {
        match &self.outcome {
            CellOutcome::Ok { correlation } => Some(correlation),
            CellOutcome::Failed { .. } => None,
        }
    }
}

/// Row `i` holds temperature `i`, column `j` sample size `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub temperatures: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    pub base: RunConfig,
    pub cells: Vec<Vec<SweepCell>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestCell {
    pub temperature: f64,
    pub k: usize,
    pub r: f64,
}

impl SweepGrid {
    /// Cells in (temperature index, k index) order.
    pub fn iter(&self) -> impl Iterator<Item = &SweepCell> {
        self.cells.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.cells.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn failures(&self) -> Vec<&SweepCell> {
        self.iter().filter(|c| c.correlation().is_none()).collect()
    }

    /// Highest r; ties go to the lowest temperature, then the lowest k.
    pub fn argmax(&self) -> Option<BestCell> {
        let mut best: Option<BestCell> = None;
        for cell in self.iter() {
            let Some(c) = cell.correlation() else { continue };
            let candidate = BestCell {
                temperature: cell.temperature,
                k: cell.k,
                r: c.r,
            };
            best = match best {
                None => Some(candidate),
                Some(b) => {
                    let better = candidate.r > b.r
                        || (candidate.r == b.r
                            && (candidate.temperature, candidate.k) < (b.temperature, b.k));
                    Some(if better { candidate } else { b })
                }
            };
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SentencePair;
    use crate::llm::{MockConfig, MockProvider};

    fn dataset() -> Dataset {
        let mk = |range: std::ops::Range<u64>| {
            range
                .map(|i| SentencePair {
                    id: i,
                    sentence1: format!("s1 {i}"),
                    sentence2: format!("s2 {i}"),
                    reference_score: (i % 9) as f64 / 2.0,
                })
                .collect::<Vec<_>>()
        };
        Dataset {
            train: mk(0..12),
            validation: mk(12..14),
            test: mk(14..24),
        }
    }

    fn base() -> RunConfig {
        RunConfig {
            temperature: 0.0,
            k_examples: 0,
            ..RunConfig::default()
        }
    }

    #[test]
    fn default_geometry() {
        assert_eq!(default_temperatures().len(), 11);
        assert_eq!(default_temperatures()[3], 0.3);
        assert_eq!(default_sample_sizes(), vec![0, 10, 20, 30, 40, 50, 60]);
    }

    #[test]
    fn echo_run_is_perfect() {
        let ds = dataset();
        let mock = MockProvider::new(MockConfig::echo(&ds)).unwrap();
        let exec = Executor::sequential();
        let run = run_once(&ds, &base(), &mock, &exec).unwrap();
        assert_eq!(run.correlation.r, 1.0);
        assert_eq!(run.correlation.n, 10);
        assert_eq!(run.correlation.excluded, 0);
        assert!(run.scored.windows(2).all(|w| w[0].pair.id < w[1].pair.id));
    }

    #[test]
    fn all_excluded() {
        let ds = dataset();
        let mut cfg = MockConfig::echo(&ds);
        cfg.malformed_rate = 1.0;
        let mock = MockProvider::new(cfg).unwrap();
        let err = run_once(&ds, &base(), &mock, &Executor::sequential()).unwrap_err();
        assert!(matches!(err, SweepError::AllPairsExcluded(10)));
    }

    #[test]
    fn partial_exclusion_keeps_counts() {
        let ds = dataset();
        let mut cfg = MockConfig::echo(&ds);
        cfg.malformed_rate = 0.7;
        let mock = MockProvider::new(cfg).unwrap();
        let config = RunConfig {
            max_retries: 1,
            ..base()
        };
        if let Ok(run) = run_once(&ds, &config, &mock, &Executor::sequential()) {
            assert_eq!(run.correlation.n + run.correlation.excluded, 10);
            assert_eq!(run.excluded_ids().len(), run.correlation.excluded);
        }
    }

    #[test]
    fn k_too_large_cell_fails_without_aborting() {
        let ds = dataset();
        let mock = MockProvider::new(MockConfig::echo(&ds)).unwrap();
        let exec = Executor::sequential();
        let h = Harness::new(&ds, &mock, "echo", &exec);
        let grid = h.example_sweep(&base(), &[0, 70]).unwrap();
        assert_eq!(grid.len(), 2);
        assert_eq!(grid.failures().len(), 1);
        assert_eq!(grid.failures()[0].k, 70);
    }

    #[test]
    fn argmax_tie_break() {
        let ds = dataset();
        let mock = MockProvider::new(MockConfig::echo(&ds)).unwrap();
        let exec = Executor::with_parallelism(3);
        let h = Harness::new(&ds, &mock, "echo", &exec);
        let grid = h.cross_factor_grid(&base(), &[0.7, 0.2, 0.5], &[10, 5]).unwrap();
        let best = grid.argmax().unwrap();
        assert_eq!((best.temperature, best.k, best.r), (0.2, 5, 1.0));
        assert_eq!(grid.cells[1][0].temperature, 0.2);
        assert_eq!(grid.cells[1][0].k, 10);
    }

    #[test]
    fn temperature_out_of_range() {
        let ds = dataset();
        let mock = MockProvider::new(MockConfig::echo(&ds)).unwrap();
        let exec = Executor::sequential();
        let h = Harness::new(&ds, &mock, "echo", &exec);
        assert!(matches!(
            h.temperature_sweep(&base(), &[0.5, 1.5]),
            Err(SweepError::Config(ConfigError::Temperature(_)))
        ));
    }

    #[test]
    fn hash_ignores_transport_settings() {
        let ds = dataset();
        let mock = MockProvider::new(MockConfig::echo(&ds)).unwrap();
        let exec = Executor::sequential();
        let h = Harness::new(&ds, &mock, "echo", &exec);
        let a = base();
        let b = RunConfig {
            rate_limit: Some(3.0),
            timeout: std::time::Duration::from_secs(1),
            ..base()
        };
        assert_eq!(h.config_hash(&a), h.config_hash(&b));
        let c = RunConfig { temperature: 0.1, ..base() };
        assert_ne!(h.config_hash(&a), h.config_hash(&c));
    }
}
