//! Run artifacts: pairs and grid tables, metadata, run cache and lock file.
//!
//! Output layout under a directory `out/`:
//!
//! ```text
//! out/runs/<config-hash>/result.json
//! out/runs/<config-hash>/pairs.csv
//! out/runs/<config-hash>/meta.json
//! out/grid.csv            (and the sweep tables, each with a meta file)
//! ```

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::sweep::{CellOutcome, RunResult, SweepGrid};

pub mod svg;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("JSON error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("output directory {0} is locked by another run; remove the lock file if that run is gone")]
    Locked(PathBuf),
    #[error("nothing to plot")]
    EmptyInput,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ReportError + '_ {
    move |source| ReportError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn ensure_parent(path: &Path) -> Result<(), ReportError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    Ok(())
}

/// Writes via a temporary sibling and renames, so readers never see a partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    ensure_parent(path)?;
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    let tmp = path.with_file_name(name);
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), ReportError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| ReportError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ReportError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| ReportError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), ReportError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).map_err(csv_err(path))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| ReportError::Io {
            path: path.to_path_buf(),
            source: e.into_error(),
        })?;
    write_atomic(path, &bytes)
}

fn read_csv_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, ReportError> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    reader
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(csv_err(path))
}

/// One row of the scored-pairs table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairsRow {
    #[serde(rename = "Sentence1")]
    pub sentence1: String,
    #[serde(rename = "Sentence2")]
    pub sentence2: String,
    pub reference_score: f64,
    pub model_score: Option<f64>,
    pub attempts: u32,
    pub excluded: bool,
}

pub fn pairs_rows(result: &RunResult) -> Vec<PairsRow> {
    result
        .scored
        .iter()
        .map(|s| PairsRow {
            sentence1: s.pair.sentence1.clone(),
            sentence2: s.pair.sentence2.clone(),
            reference_score: s.pair.reference_score,
            model_score: s.model_score,
            attempts: s.attempts,
            excluded: s.excluded(),
        })
        .collect()
}

/// RFC 4180 CSV, one row per test pair in id order.
pub fn write_pairs_csv(result: &RunResult, path: &Path) -> Result<(), ReportError> {
    write_csv_rows(path, &pairs_rows(result))
}

pub fn read_pairs_csv(path: &Path) -> Result<Vec<PairsRow>, ReportError> {
    read_csv_rows(path)
}

/// Long-form grid row: `temperature,k,pearson_r,n,excluded,status`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub temperature: f64,
    pub k: usize,
    pub pearson_r: Option<f64>,
    pub n: Option<usize>,
    pub excluded: Option<usize>,
    pub status: String,
}

pub fn grid_rows(grid: &SweepGrid) -> Vec<GridRow> {
    grid.iter()
        .map(|cell| match &cell.outcome {
            CellOutcome::Ok { correlation } => GridRow {
                temperature: cell.temperature,
                k: cell.k,
                pearson_r: Some(correlation.r),
                n: Some(correlation.n),
                excluded: Some(correlation.excluded),
                status: "ok".into(),
            },
            CellOutcome::Failed { .. } => GridRow {
                temperature: cell.temperature,
                k: cell.k,
                pearson_r: None,
                n: None,
                excluded: None,
                status: "failed".into(),
            },
        })
        .collect()
}

pub fn write_grid_csv(grid: &SweepGrid, path: &Path) -> Result<(), ReportError> {
    write_csv_rows(path, &grid_rows(grid))
}

pub fn read_grid_csv(path: &Path) -> Result<Vec<GridRow>, ReportError> {
    read_csv_rows(path)
}

/// Metadata written next to each run.
pub fn run_meta(result: &RunResult, provider_fingerprint: &str, dataset_digest: &str) -> Value {
    json!({
        "config_hash": result.config_hash,
        "config": result.config,
        "provider": result.provider,
        "provider_fingerprint": provider_fingerprint,
        "dataset_digest": dataset_digest,
        "seed": result.config.seed,
        "selection_seed": result.config.selection_seed,
        "example_ids": result.example_ids,
        "n": result.correlation.n,
        "excluded": result.correlation.excluded,
        "excluded_ids": result.excluded_ids(),
        "pearson_r": result.correlation.r,
        "timestamp": result.timestamp,
    })
}

/// Content-addressed cache of completed runs under `<root>/runs/`.
#[derive(Debug, Clone)]
pub struct RunStore {
    root: PathBuf,
}

impl RunStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn run_dir(&self, hash: &str) -> PathBuf {
        self.root.join("runs").join(hash)
    }

    pub fn load(&self, hash: &str) -> Result<Option<RunResult>, ReportError> {
        let path = self.run_dir(hash).join("result.json");
        if !path.exists() {
            return Ok(None);
        }
        read_json(&path).map(Some)
    }

    /// Writes `pairs.csv` and `meta.json` first; `result.json` last marks the run complete.
    pub fn save(
        &self,
        result: &RunResult,
        provider_fingerprint: &str,
        dataset_digest: &str,
    ) -> Result<(), ReportError> {
        let dir = self.run_dir(&result.config_hash);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        write_pairs_csv(result, &dir.join("pairs.csv"))?;
        write_json(
            &dir.join("meta.json"),
            &run_meta(result, provider_fingerprint, dataset_digest),
        )?;
        write_json(&dir.join("result.json"), result)
    }
}

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct OutputLock {
    path: PathBuf,
    _file: File,
}

impl OutputLock {
    pub const FILE_NAME: &'static str = ".simrag.lock";

    pub fn acquire(dir: &Path) -> Result<Self, ReportError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join(Self::FILE_NAME);
        let mut file = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| match e.kind() {
                io::ErrorKind::AlreadyExists => ReportError::Locked(dir.to_path_buf()),
                _ => ReportError::Io {
                    path: path.clone(),
                    source: e,
                },
            })?;
        let _ = writeln!(file, "{}", std::process::id());
        Ok(OutputLock { path, _file: file })
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Line chart of r against temperature for a one-column sweep.
pub fn emit_temperature_plot(grid: &SweepGrid, path: &Path) -> Result<(), ReportError> {
    let points: Vec<(f64, f64)> = grid
        .iter()
        .filter_map(|c| c.correlation().map(|r| (c.temperature, r.r)))
        .collect();
    if points.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    let svg = svg::line_chart("Pearson r by temperature", "temperature", "Pearson r", &points);
    write_atomic(path, svg.as_bytes())
}

/// Line chart of r against example count for a one-row sweep.
pub fn emit_examples_plot(grid: &SweepGrid, path: &Path) -> Result<(), ReportError> {
    let points: Vec<(f64, f64)> = grid
        .iter()
        .filter_map(|c| c.correlation().map(|r| (c.k as f64, r.r)))
        .collect();
    if points.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    let svg = svg::line_chart("Pearson r by example count", "examples", "Pearson r", &points);
    write_atomic(path, svg.as_bytes())
}

/// Reference-versus-model scatter, one panel per successful cell.
pub fn emit_scatter_panels(grid: &SweepGrid, store: &RunStore, path: &Path) -> Result<(), ReportError> {
    let mut panels = Vec::new();
    for cell in grid.iter() {
        let Some(corr) = cell.correlation() else { continue };
        let Some(run) = store.load(&cell.run_hash)? else { continue };
        let points: Vec<(f64, f64)> = run
            .scored
            .iter()
            .filter_map(|s| s.model_score.map(|m| (s.pair.reference_score, m)))
            .collect();
        let title = format!("k={} T={} r={:.3}", cell.k, cell.temperature, corr.r);
        panels.push((title, points));
    }
    if panels.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    write_atomic(path, svg::scatter_panels(&panels).as_bytes())
}

pub fn emit_heatmap(grid: &SweepGrid, path: &Path) -> Result<(), ReportError> {
    if grid.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    let values: Vec<Vec<Option<f64>>> = grid
        .cells
        .iter()
        .map(|row| row.iter().map(|c| c.correlation().map(|r| r.r)).collect())
        .collect();
    let rows: Vec<String> = grid.temperatures.iter().map(|t| format!("{t}")).collect();
    let cols: Vec<String> = grid.sample_sizes.iter().map(|k| k.to_string()).collect();
    let svg = svg::heatmap("Pearson r by temperature and example count", &rows, &cols, &values);
    write_atomic(path, svg.as_bytes())
}
