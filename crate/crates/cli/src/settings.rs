//! Layered configuration: command-line flags override `SIMRAG_*` environment
//! variables, which override a JSON config file, which overrides defaults.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use simrag_core::baselines::{Metric, Tokenizer, DEFAULT_Q};
use simrag_core::llm::{ProviderKind, RunConfig, API_KEY_ENV, DEFAULT_ENDPOINT, DEFAULT_MAX_RETRIES, DEFAULT_MODEL};
use simrag_core::prompt::ExampleSelection;
use simrag_core::sweep::{default_sample_sizes, default_temperatures};
use simrag_core::DatasetFormat;

pub const ENV_PREFIX: &str = "SIMRAG_";
/// Environment variable naming the JSON config file.
pub const CONFIG_ENV: &str = "SIMRAG_CONFIG";

/// Environment variable carrying `field`, e.g. `SIMRAG_NOISE_SIGMA`.
pub fn env_name(field: &str) -> String {
    format!("{ENV_PREFIX}{}", field.to_ascii_uppercase())
}

/// Parsing of a single environment-variable value.
pub trait EnvValue: Sized {
    fn parse_env(text: &str) -> Result<Self, String>;
}

macro_rules! env_from_str {
    ($($ty:ty),*) => {$(
        impl EnvValue for $ty {
            fn parse_env(text: &str) -> Result<Self, String> {
                from_str(text)
            }
        }
    )*};
}

fn from_str<T: FromStr>(text: &str) -> Result<T, String>
where
    T::Err: Display,
{
    text.trim().parse().map_err(|e: T::Err| e.to_string())
}

env_from_str!(f64, u64, u32, usize, bool, PathBuf, String, DatasetFormat, ProviderKind, ExampleSelection, Metric, Tokenizer);

impl<T: EnvValue> EnvValue for Vec<T> {
    fn parse_env(text: &str) -> Result<Self, String> {
        text.split(',').filter(|s| !s.trim().is_empty()).map(T::parse_env).collect()
    }
}

macro_rules! layer {
    ($($field:ident : $ty:ty),* $(,)?) => {
        /// One configuration source; `None` means "not set here".
        #[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
        #[serde(default, deny_unknown_fields)]
        pub struct Layer {
            $(
                #[serde(skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
        }

        impl Layer {
            pub const FIELDS: &'static [&'static str] = &[$(stringify!($field)),*];

            /// Values set in `higher` win; the rest fall through to `self`.
            pub fn overlay(self, higher: Layer) -> Layer {
                Layer { $($field: higher.$field.or(self.$field),)* }
            }

            /// Reads `SIMRAG_<FIELD>` variables through `lookup`.
            pub fn from_env(lookup: impl Fn(&str) -> Option<String>) -> anyhow::Result<Layer> {
                let mut layer = Layer::default();
                $(
                    let name = env_name(stringify!($field));
                    if let Some(text) = lookup(&name) {
                        layer.$field = Some(
                            <$ty as EnvValue>::parse_env(&text)
                                .map_err(|e| anyhow::anyhow!("{name}={text:?}: {e}"))?,
                        );
                    }
                )*
                Ok(layer)
            }
        }
    };
}

layer! {
    dataset: PathBuf,
    format: DatasetFormat,
    provider: ProviderKind,
    endpoint: String,
    model: String,
    temperature: f64,
    seed: u64,
    examples: usize,
    selection: ExampleSelection,
    selection_seed: u64,
    max_retries: u32,
    parallelism: usize,
    out: PathBuf,
    metric: Metric,
    q: usize,
    tokenizer: Tokenizer,
    mock_table: PathBuf,
    malformed_rate: f64,
    noise_sigma: f64,
    latency_ms: u64,
    rate_limit: f64,
    timeout_secs: f64,
    temperatures: Vec<f64>,
    sizes: Vec<usize>,
}

impl Layer {
    pub fn from_file(path: &Path) -> anyhow::Result<Layer> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config file {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))
    }
}

/// Fully resolved settings; every value here is echoed into `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub dataset: Option<PathBuf>,
    pub format: DatasetFormat,
    pub provider: ProviderKind,
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub seed: u64,
    pub examples: usize,
    pub selection: ExampleSelection,
    pub selection_seed: u64,
    pub max_retries: u32,
    pub parallelism: usize,
    pub out: PathBuf,
    /// `None` runs every metric.
    pub metric: Option<Metric>,
    pub q: usize,
    pub tokenizer: Tokenizer,
    pub mock_table: Option<PathBuf>,
    pub malformed_rate: Option<f64>,
    pub noise_sigma: Option<f64>,
    pub latency_ms: Option<u64>,
    pub rate_limit: Option<f64>,
    pub timeout_secs: f64,
    pub temperatures: Vec<f64>,
    pub sizes: Vec<usize>,
    /// Whether an API key was found; the key itself is never recorded.
    pub api_key_present: bool,
}

impl Settings {
    /// Applies defaults to a merged layer. Without an explicit provider the
    /// mock is used unless an API key is available.
    pub fn resolve(layer: Layer, api_key_present: bool) -> Settings {
        let defaults = RunConfig::default();
        Settings {
            dataset: layer.dataset,
            format: layer.format.unwrap_or(DatasetFormat::SingleFile),
            provider: layer.provider.unwrap_or(if api_key_present {
                ProviderKind::Http
            } else {
                ProviderKind::Mock
            }),
            endpoint: layer.endpoint.unwrap_or_else(|| DEFAULT_ENDPOINT.to_string()),
            model: layer.model.unwrap_or_else(|| DEFAULT_MODEL.to_string()),
            temperature: layer.temperature.unwrap_or(defaults.temperature),
            seed: layer.seed.unwrap_or(defaults.seed),
            examples: layer.examples.unwrap_or(defaults.k_examples),
            selection: layer.selection.unwrap_or(defaults.selection),
            selection_seed: layer.selection_seed.unwrap_or(defaults.selection_seed),
            max_retries: layer.max_retries.unwrap_or(DEFAULT_MAX_RETRIES),
            parallelism: layer.parallelism.unwrap_or(simrag_core::exec::DEFAULT_PARALLELISM),
            out: layer.out.unwrap_or_else(|| PathBuf::from("out")),
            metric: layer.metric,
            q: layer.q.unwrap_or(DEFAULT_Q),
            tokenizer: layer.tokenizer.unwrap_or_default(),
            mock_table: layer.mock_table,
            malformed_rate: layer.malformed_rate,
            noise_sigma: layer.noise_sigma,
            latency_ms: layer.latency_ms,
            rate_limit: layer.rate_limit,
            timeout_secs: layer.timeout_secs.unwrap_or(defaults.timeout.as_secs_f64()),
            temperatures: layer.temperatures.unwrap_or_else(default_temperatures),
            sizes: layer.sizes.unwrap_or_else(default_sample_sizes),
            api_key_present,
        }
    }

    /// Merges defaults < config file < environment < flags.
    pub fn load(
        flags: Layer,
        config_file: Option<&Path>,
        lookup: impl Fn(&str) -> Option<String>,
    ) -> anyhow::Result<Settings> {
        let file_path = config_file
            .map(Path::to_path_buf)
            .or_else(|| lookup(CONFIG_ENV).map(PathBuf::from));
        let file = match file_path {
            Some(path) => Layer::from_file(&path)?,
            None => Layer::default(),
        };
        let env = Layer::from_env(&lookup)?;
        let api_key_present = lookup(API_KEY_ENV).is_some_and(|k| !k.is_empty());
        Ok(Settings::resolve(file.overlay(env).overlay(flags), api_key_present))
    }

    pub fn dataset_path(&self) -> anyhow::Result<&Path> {
        match &self.dataset {
            Some(p) => Ok(p),
            None => bail!("no dataset given; pass --dataset, set {} or use a config file", env_name("dataset")),
        }
    }

    pub fn run_config(&self) -> anyhow::Result<RunConfig> {
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            bail!("timeout_secs must be positive, got {}", self.timeout_secs);
        }
        Ok(RunConfig {
            model_name: self.model.clone(),
            temperature: self.temperature,
            seed: self.seed,
            k_examples: self.examples,
            selection: self.selection,
            selection_seed: self.selection_seed,
            max_retries: self.max_retries,
            endpoint: self.endpoint.clone(),
            timeout: Duration::from_secs_f64(self.timeout_secs),
            rate_limit: self.rate_limit,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn env_names() {
        assert_eq!(env_name("noise_sigma"), "SIMRAG_NOISE_SIGMA");
        assert_eq!(env_name("endpoint"), "SIMRAG_ENDPOINT");
    }

    #[test]
    fn env_parsing() {
        let vars = HashMap::from([
            ("SIMRAG_TEMPERATURES".to_string(), "0, 0.5,1".to_string()),
            ("SIMRAG_PROVIDER".to_string(), "http".to_string()),
            ("SIMRAG_SELECTION".to_string(), "first-k".to_string()),
        ]);
        let layer = Layer::from_env(|k| vars.get(k).cloned()).unwrap();
        assert_eq!(layer.temperatures, Some(vec![0.0, 0.5, 1.0]));
        assert_eq!(layer.provider, Some(ProviderKind::Http));
        assert_eq!(layer.selection, Some(ExampleSelection::FirstK));
        let bad = HashMap::from([("SIMRAG_SEED".to_string(), "x".to_string())]);
        assert!(Layer::from_env(|k| bad.get(k).cloned()).is_err());
    }

    #[test]
    fn provider_default_depends_on_key() {
        assert_eq!(Settings::resolve(Layer::default(), false).provider, ProviderKind::Mock);
        assert_eq!(Settings::resolve(Layer::default(), true).provider, ProviderKind::Http);
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        assert!(serde_json::from_str::<Layer>(r#"{"temprature": 0.3}"#).is_err());
        let l: Layer = serde_json::from_str(r#"{"temperature": 0.3, "sizes": [0, 20]}"#).unwrap();
        assert_eq!(l.sizes, Some(vec![0, 20]));
    }
}
