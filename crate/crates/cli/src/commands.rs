//! Command implementations. Each returns a [`Failure`] carrying its exit category.

use std::path::{Path, PathBuf};

use anyhow::anyhow;
use serde_json::{json, Map, Value};
use simrag_core::baselines::{baseline_correlation, BaselineError, BaselineSpec, Metric};
use simrag_core::dataset::{validate_counts, DatasetError};
use simrag_core::llm::{
    ChatProvider, ClientError, HttpProvider, MockConfig, MockProvider, ProviderKind, RunConfig, ScoreError,
};
use simrag_core::report::{
    emit_examples_plot, emit_heatmap, emit_scatter_panels, emit_temperature_plot, read_json, write_grid_csv,
    write_json, OutputLock, ReportError, RunStore,
};
use simrag_core::sweep::{Harness, SweepError, SweepGrid};
use simrag_core::{load_dataset, reference, Dataset, Executor};

use crate::settings::Settings;
use crate::{Category, Command, Failure};

pub const META_FILE: &str = "meta.json";
pub const GRID_CSV: &str = "grid.csv";
pub const GRID_JSON: &str = "grid.json";
pub const TEMPERATURE_CSV: &str = "temperature_sweep.csv";
pub const TEMPERATURE_JSON: &str = "temperature_sweep.json";
pub const EXAMPLES_CSV: &str = "example_sweep.csv";
pub const EXAMPLES_JSON: &str = "example_sweep.json";
pub const TEMPERATURE_SVG: &str = "temperature.svg";
pub const EXAMPLES_SVG: &str = "examples.svg";
pub const EXAMPLES_SCATTER_SVG: &str = "example_scatter.svg";
pub const GRID_HEATMAP_SVG: &str = "grid_heatmap.svg";
pub const GRID_SCATTER_SVG: &str = "grid_scatter.svg";

type Outcome = Result<(), Failure>;

pub struct Context {
    pub settings: Settings,
    pub api_key: Option<String>,
}

impl Context {
    pub fn dispatch(&self, command: Command) -> Outcome {
        match command {
            Command::Validate => self.validate(),
            Command::Run => self.run(),
            Command::SweepTemp => self.sweep(Command::SweepTemp),
            Command::SweepExamples => self.sweep(Command::SweepExamples),
            Command::Grid => self.sweep(Command::Grid),
            Command::Baseline => self.baseline(),
            Command::Report => self.report(),
        }
    }

    fn validate(&self) -> Outcome {
        let path = self.settings.dataset_path().map_err(|e| Failure::new(Category::Config, e))?;
        let dataset = load_dataset(path, self.settings.format).map_err(|e| {
            let category = match e {
                // Exit 2: the file could not be found or read at all.
                DatasetError::MissingFile(_) | DatasetError::Io { .. } => Category::Config,
                DatasetError::MalformedRow { .. } | DatasetError::EmptySplit(_) => Category::Malformed,
            };
            Failure::new(category, e)
        })?;
        let report = validate_counts(&dataset);
        println!("{}", report.counts);
        if let Some(warning) = report.warning {
            eprintln!("warning: {warning}");
        }
        Ok(())
    }

    fn run(&self) -> Outcome {
        let job = Job::prepare(self)?;
        let _lock = job.lock()?;
        let harness = job.harness();
        let run = harness.run_once(&job.config).map_err(sweep_failure)?;
        let c = run.correlation;
        println!("r={} n={} excluded={} run={}", c.r, c.n, c.excluded, run.config_hash);
        let run_dir = job.store().run_dir(&run.config_hash);
        job.record(
            Command::Run,
            vec![run_dir.join("result.json"), run_dir.join("pairs.csv"), run_dir.join(META_FILE)],
            json!({
                "config_hash": run.config_hash,
                "pearson_r": c.r,
                "n": c.n,
                "excluded": c.excluded,
                "excluded_ids": run.excluded_ids(),
                "example_ids": run.example_ids,
            }),
        )
    }

    fn sweep(&self, command: Command) -> Outcome {
        let job = Job::prepare(self)?;
        let s = &self.settings;
        let (temperatures, sizes) = match command {
            Command::SweepTemp => (s.temperatures.clone(), vec![s.examples]),
            Command::SweepExamples => (vec![s.temperature], s.sizes.clone()),
            _ => (s.temperatures.clone(), s.sizes.clone()),
        };
        job.preflight(&temperatures, &sizes)?;
        let _lock = job.lock()?;
        let harness = job.harness();
        let grid = match command {
            Command::SweepTemp => harness.temperature_sweep(&job.config, &temperatures),
            Command::SweepExamples => harness.example_sweep(&job.config, &sizes),
            _ => harness.cross_factor_grid(&job.config, &temperatures, &sizes),
        }
        .map_err(sweep_failure)?;

        for cell in grid.iter() {
            match cell.correlation() {
                Some(c) => println!("temperature={} k={} r={} n={} excluded={}", cell.temperature, cell.k, c.r, c.n, c.excluded),
                None => println!("temperature={} k={} failed", cell.temperature, cell.k),
            }
        }
        let best = grid.argmax();
        if let Some(b) = best {
            println!("best: temperature={} k={} r={}", b.temperature, b.k, b.r);
        }

        let (csv, json_name) = match command {
            Command::SweepTemp => (TEMPERATURE_CSV, TEMPERATURE_JSON),
            Command::SweepExamples => (EXAMPLES_CSV, EXAMPLES_JSON),
            _ => (GRID_CSV, GRID_JSON),
        };
        let out = &s.out;
        write_grid_csv(&grid, &out.join(csv)).map_err(report_failure)?;
        write_json(&out.join(json_name), &grid).map_err(report_failure)?;
        let mut outputs = vec![out.join(csv), out.join(json_name)];
        outputs.extend(emit_sweep_plots(command, &grid, &job.store(), out)?);

        let failures: Vec<Value> = grid
            .failures()
            .iter()
            .map(|c| json!({"temperature": c.temperature, "k": c.k, "outcome": c.outcome}))
            .collect();
        let summary = json!({
            "temperatures": grid.temperatures,
            "sample_sizes": grid.sample_sizes,
            "cells": grid.len(),
            "failed_cells": failures,
            "best": best,
        });
        job.record(command, outputs, summary)?;
        if !grid.is_empty() && grid.failures().len() == grid.len() {
            return Err(Failure::new(
                Category::Data,
                anyhow!("all {} cells failed; see {}", grid.len(), out.join(csv).display()),
            ));
        }
        if !grid.failures().is_empty() {
            eprintln!("warning: {} of {} cells failed", grid.failures().len(), grid.len());
        }
        Ok(())
    }

    fn baseline(&self) -> Outcome {
        let s = &self.settings;
        let dataset = load_data(s)?;
        let executor = Executor::with_parallelism(s.parallelism);
        let metrics: Vec<Metric> = match s.metric {
            Some(m) => vec![m],
            None => Metric::ALL.to_vec(),
        };
        let _lock = lock(&s.out)?;
        let mut outputs = Vec::new();
        let mut summary = Map::new();
        for metric in metrics {
            let spec = BaselineSpec {
                metric,
                q: s.q,
                tokenizer: s.tokenizer,
            };
            let result = baseline_correlation(&dataset, &spec, &executor).map_err(|e| match e {
                BaselineError::InvalidQ => Failure::new(Category::Config, e),
                BaselineError::EmptyTestSplit => Failure::new(Category::Data, e),
                BaselineError::Stats(_) => Failure::new(Category::Degenerate, e),
            })?;
            println!("{metric} r={} n={}", result.correlation.r, result.correlation.n);
            let path = s.out.join("baselines").join(format!("{metric}.json"));
            write_json(&path, &result).map_err(report_failure)?;
            outputs.push(path);
            summary.insert(metric.to_string(), json!(result.correlation));
        }
        record(
            s,
            Command::Baseline,
            &dataset.digest(),
            None,
            outputs,
            Value::Object(summary),
        )
    }

    fn report(&self) -> Outcome {
        let s = &self.settings;
        let out = &s.out;
        let _lock = lock(out)?;
        let store = RunStore::new(out);
        let mut outputs = Vec::new();
        for (command, name) in [
            (Command::SweepTemp, TEMPERATURE_JSON),
            (Command::SweepExamples, EXAMPLES_JSON),
            (Command::Grid, GRID_JSON),
        ] {
            let path = out.join(name);
            if !path.exists() {
                continue;
            }
            let grid: SweepGrid = read_json(&path).map_err(report_failure)?;
            outputs.extend(emit_sweep_plots(command, &grid, &store, out)?);
        }
        if outputs.is_empty() {
            return Err(Failure::new(
                Category::Data,
                anyhow!("no sweep results with plottable cells under {}", out.display()),
            ));
        }
        for path in &outputs {
            println!("{}", path.display());
        }
        Ok(())
    }
}

/// Dataset, provider and harness inputs shared by the model-scoring commands.
struct Job<'a> {
    settings: &'a Settings,
    dataset: Dataset,
    config: RunConfig,
    provider: Box<dyn ChatProvider>,
    fingerprint: String,
    executor: Executor,
}

impl<'a> Job<'a> {
    fn prepare(ctx: &'a Context) -> Result<Self, Failure> {
        let s = &ctx.settings;
        let config = s.run_config().map_err(|e| Failure::new(Category::Config, e))?;
        config.validate().map_err(|e| Failure::new(Category::Config, e))?;
        let dataset = load_data(s)?;
        let (provider, fingerprint) = build_provider(s, &dataset, &config, ctx.api_key.clone())?;
        Ok(Job {
            settings: s,
            dataset,
            config,
            provider,
            fingerprint,
            executor: Executor::with_parallelism(s.parallelism),
        })
    }

    fn store(&self) -> RunStore {
        RunStore::new(&self.settings.out)
    }

    fn harness(&self) -> Harness<'_> {
        Harness::new(&self.dataset, self.provider.as_ref(), self.fingerprint.clone(), &self.executor)
            .with_store(self.store())
    }

    fn lock(&self) -> Result<OutputLock, Failure> {
        lock(&self.settings.out)
    }

    /// Rejects invalid sweep axes before any request is made.
    fn preflight(&self, temperatures: &[f64], sizes: &[usize]) -> Outcome {
        if temperatures.is_empty() || sizes.is_empty() {
            return Err(Failure::new(Category::Config, anyhow!("sweep axes must not be empty")));
        }
        for &temperature in temperatures {
            RunConfig {
                temperature,
                ..self.config.clone()
            }
            .validate()
            .map_err(|e| Failure::new(Category::Config, e))?;
        }
        let available = self.dataset.train.len();
        if let Some(k) = sizes.iter().find(|&&k| k > available) {
            return Err(Failure::new(
                Category::Config,
                anyhow!("{k} examples requested but the training split has only {available}"),
            ));
        }
        Ok(())
    }

    fn record(&self, command: Command, outputs: Vec<PathBuf>, summary: Value) -> Outcome {
        record(
            self.settings,
            command,
            &self.dataset.digest(),
            Some(&self.fingerprint),
            outputs,
            summary,
        )
    }
}

fn load_data(s: &Settings) -> Result<Dataset, Failure> {
    let path = s.dataset_path().map_err(|e| Failure::new(Category::Config, e))?;
    let dataset = load_dataset(path, s.format).map_err(|e| Failure::new(Category::Data, e))?;
    if let Some(warning) = validate_counts(&dataset).warning {
        log::warn!("{warning}");
    }
    Ok(dataset)
}

fn build_provider(
    s: &Settings,
    dataset: &Dataset,
    config: &RunConfig,
    api_key: Option<String>,
) -> Result<(Box<dyn ChatProvider>, String), Failure> {
    let config_failure = |e| Failure::new(Category::Config, e);
    match s.provider {
        ProviderKind::Mock => {
            let mut table = match &s.mock_table {
                Some(path) => MockConfig::load(path).map_err(config_failure)?,
                None => MockConfig::echo(dataset),
            };
            if let Some(rate) = s.malformed_rate {
                table.malformed_rate = rate;
            }
            if let Some(sigma) = s.noise_sigma {
                table.noise_sigma = sigma;
            }
            if let Some(latency) = s.latency_ms {
                table.latency_ms = latency;
            }
            let fingerprint = table.fingerprint();
            let provider = MockProvider::new(table).map_err(config_failure)?;
            Ok((Box::new(provider), fingerprint))
        }
        ProviderKind::Http => {
            if api_key.is_none() {
                log::warn!("no API key set; requests are sent without authorization");
            }
            let provider = HttpProvider::new(config, api_key).map_err(config_failure)?;
            let fingerprint = format!("http:{}", provider.url());
            Ok((Box::new(provider), fingerprint))
        }
    }
}

fn lock(out: &Path) -> Result<OutputLock, Failure> {
    OutputLock::acquire(out).map_err(report_failure)
}

fn emit_sweep_plots(command: Command, grid: &SweepGrid, store: &RunStore, out: &Path) -> Result<Vec<PathBuf>, Failure> {
    let mut written = Vec::new();
    let mut emit = |name: &str, result: Result<(), ReportError>| match result {
        Ok(()) => {
            written.push(out.join(name));
            Ok(())
        }
        Err(ReportError::EmptyInput) => {
            log::warn!("{name}: nothing to plot");
            Ok(())
        }
        Err(e) => Err(report_failure(e)),
    };
    match command {
        Command::SweepTemp => emit(TEMPERATURE_SVG, emit_temperature_plot(grid, &out.join(TEMPERATURE_SVG)))?,
        Command::SweepExamples => {
            emit(EXAMPLES_SVG, emit_examples_plot(grid, &out.join(EXAMPLES_SVG)))?;
            emit(
                EXAMPLES_SCATTER_SVG,
                emit_scatter_panels(grid, store, &out.join(EXAMPLES_SCATTER_SVG)),
            )?;
        }
        _ => {
            emit(GRID_HEATMAP_SVG, emit_heatmap(grid, &out.join(GRID_HEATMAP_SVG)))?;
            emit(GRID_SCATTER_SVG, emit_scatter_panels(grid, store, &out.join(GRID_SCATTER_SVG)))?;
        }
    }
    Ok(written)
}

/// Adds this command's entry to `<out>/meta.json`, keeping entries of other commands.
fn record(
    s: &Settings,
    command: Command,
    dataset_digest: &str,
    provider_fingerprint: Option<&str>,
    outputs: Vec<PathBuf>,
    summary: Value,
) -> Outcome {
    let path = s.out.join(META_FILE);
    let mut meta: Map<String, Value> = if path.exists() {
        read_json(&path).unwrap_or_else(|e| {
            log::warn!("replacing unreadable {}: {e}", path.display());
            Map::new()
        })
    } else {
        Map::new()
    };
    meta.insert("tool".into(), json!({"name": "simrag", "version": env!("CARGO_PKG_VERSION")}));
    meta.insert(
        "reference".into(),
        json!({
            "best_r": reference::BEST_R,
            "best_temperature": reference::BEST_TEMPERATURE,
            "best_examples": reference::BEST_EXAMPLES,
            "example_sweep_best_r": reference::EXAMPLE_SWEEP_BEST_R,
            "prior_best_r": reference::PRIOR_BEST_R,
            "note": "published values for a remote model snapshot; not expected to be reproduced",
        }),
    );
    let entry = json!({
        "settings": s,
        "dataset_digest": dataset_digest,
        "provider_fingerprint": provider_fingerprint,
        "outputs": outputs,
        "summary": summary,
        "timestamp": chrono::Utc::now().to_rfc3339(),
    });
    let commands = meta
        .entry("commands")
        .or_insert_with(|| Value::Object(Map::new()));
    if !commands.is_object() {
        *commands = Value::Object(Map::new());
    }
    commands[command.name()] = entry;
    write_json(&path, &meta).map_err(report_failure)
}

fn report_failure(e: ReportError) -> Failure {
    match e {
        ReportError::Locked(_) => Failure::new(Category::Config, e),
        _ => Failure::new(Category::Data, e),
    }
}

pub fn sweep_failure(e: SweepError) -> Failure {
    let category = match &e {
        SweepError::Config(_) | SweepError::Prompt(_) | SweepError::EmptySweep => Category::Config,
        SweepError::Client(ScoreError::Client { source, .. }) => match source {
            ClientError::Transport(_) | ClientError::RateLimited { .. } | ClientError::Provider(_) => {
                Category::Transport
            }
        },
        SweepError::Client(ScoreError::FormatExhausted { .. }) | SweepError::EmptyTestSplit => Category::Data,
        SweepError::AllPairsExcluded(_) | SweepError::Stats(_) => Category::Degenerate,
        SweepError::Report(ReportError::Locked(_)) => Category::Config,
        SweepError::Report(_) => Category::Data,
    };
    Failure::new(category, e)
}
