//! Sentence-pair dataset ingestion.
//!
//! The canonical on-disk format is UTF-8 TSV with a header row and no quoting.
//! Two layouts are accepted:
//!
//! * single file: `sentence1\tsentence2\tscore\tsplit`, with `split` one of
//!   `train`, `validation`, `test`;
//! * pre-split directory: `train.tsv`, `validation.tsv` and `test.tsv`, each
//!   with the header `sentence1\tsentence2\tscore`.
//!
//! Ids are 0-based row indices. In the pre-split layout the three files are
//! numbered as if concatenated in train, validation, test order so ids stay
//! unique across splits.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Lowest reference score a pair can carry.
pub const MIN_SCORE: f64 = 0.0;
/// Highest reference score a pair can carry.
pub const MAX_SCORE: f64 = 4.0;

/// Split sizes of the published 100-pair biomedical benchmark.
pub const CANONICAL_COUNTS: SplitCounts = SplitCounts {
    train: 64,
    validation: 16,
    test: 20,
};

const SINGLE_FILE_HEADER: [&str; 4] = ["sentence1", "sentence2", "score", "split"];
const PRE_SPLIT_HEADER: [&str; 3] = ["sentence1", "sentence2", "score"];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset file not found: {0}")]
    MissingFile(PathBuf),
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("split `{0}` has no rows")]
    EmptySplit(Split),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

/// On-disk layout selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    #[default]
    SingleFile,
    PreSplit,
}

impl FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single-file" => Ok(DatasetFormat::SingleFile),
            "pre-split" => Ok(DatasetFormat::PreSplit),
            other => Err(format!("unknown dataset format `{other}`")),
        }
    }
}

impl fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetFormat::SingleFile => "single-file",
            DatasetFormat::PreSplit => "pre-split",
        })
    }
}

/// One scored sentence pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentencePair {
    pub id: u64,
    pub sentence1: String,
    pub sentence2: String,
    pub reference_score: f64,
}

impl SentencePair {
    /// Builds a pair, enforcing the row invariants.
    pub fn new(
        id: u64,
        sentence1: impl Into<String>,
        sentence2: impl Into<String>,
        reference_score: f64,
    ) -> Result<Self, String> {
        let pair = SentencePair {
            id,
            sentence1: sentence1.into(),
            sentence2: sentence2.into(),
            reference_score,
        };
        pair.check()?;
        Ok(pair)
    }

    fn check(&self) -> Result<(), String> {
        if self.sentence1.trim().is_empty() {
            return Err("sentence1 is empty".into());
        }
        if self.sentence2.trim().is_empty() {
            return Err("sentence2 is empty".into());
        }
        if !(MIN_SCORE..=MAX_SCORE).contains(&self.reference_score) {
            return Err(format!(
                "score {} outside [{MIN_SCORE}, {MAX_SCORE}]",
                self.reference_score
            ));
        }
        Ok(())
    }
}

/// The three named splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub train: Vec<SentencePair>,
    pub validation: Vec<SentencePair>,
    pub test: Vec<SentencePair>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> &[SentencePair] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Split, &SentencePair)> {
        Split::ALL
            .into_iter()
            .flat_map(move |s| self.split(s).iter().map(move |p| (s, p)))
    }

    pub fn counts(&self) -> SplitCounts {
        SplitCounts {
            train: self.train.len(),
            validation: self.validation.len(),
            test: self.test.len(),
        }
    }

    /// Serializes to the single-file layout, rows ordered by id.
    pub fn to_single_file_tsv(&self) -> String {
        let mut rows: Vec<(Split, &SentencePair)> = self.iter().collect();
        rows.sort_by_key(|(_, p)| p.id);
        let mut out = SINGLE_FILE_HEADER.join("\t");
        out.push('\n');
        for (split, p) in rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                p.sentence1, p.sentence2, p.reference_score, split
            ));
        }
        out
    }

    /// Content digest used to key cached runs.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_single_file_tsv().as_bytes());
        hex::encode(hasher.finalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

impl fmt::Display for SplitCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "train={} validation={} test={}",
            self.train, self.validation, self.test
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountReport {
    pub counts: SplitCounts,
    pub warning: Option<String>,
}

/// Reports split sizes, warning (never failing) when they differ from 64/16/20.
pub fn validate_counts(dataset: &Dataset) -> CountReport {
    let counts = dataset.counts();
    let warning = (counts != CANONICAL_COUNTS).then(|| {
        format!("non-canonical split sizes ({counts}); expected {CANONICAL_COUNTS}")
    });
    CountReport { counts, warning }
}

/// Loads a dataset from `path`: a TSV file in single-file mode, a directory
/// holding `train.tsv`, `validation.tsv` and `test.tsv` in pre-split mode.
pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Dataset, DatasetError> {
    let dataset = match format {
        DatasetFormat::SingleFile => parse_single_file(&read(path)?)?,
        DatasetFormat::PreSplit => {
            let mut next_id = 0u64;
            let mut parts = Vec::with_capacity(3);
            for split in Split::ALL {
                let file = path.join(format!("{split}.tsv"));
                let rows = parse_pre_split(&read(&file)?, next_id)?;
                next_id += rows.len() as u64;
                parts.push(rows);
            }
            let test = parts.pop().unwrap_or_default();
            let validation = parts.pop().unwrap_or_default();
            let train = parts.pop().unwrap_or_default();
            Dataset {
                train,
                validation,
                test,
            }
        }
    };
    for split in Split::ALL {
        if dataset.split(split).is_empty() {
            return Err(DatasetError::EmptySplit(split));
        }
    }
    Ok(dataset)
}

fn read(path: &Path) -> Result<String, DatasetError> {
    fs::read_to_string(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            DatasetError::MissingFile(path.to_path_buf())
        } else {
            DatasetError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })
}

/// Parses single-file TSV text. Empty splits are not rejected here.
pub fn parse_single_file(text: &str) -> Result<Dataset, DatasetError> {
    let mut dataset = Dataset {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for (line, id, fields) in data_rows(text, &SINGLE_FILE_HEADER, 0)? {
        let split: Split = fields[3]
            .parse()
            .map_err(|reason| DatasetError::MalformedRow { line, reason })?;
        let pair = make_pair(line, id, &fields)?;
        match split {
            Split::Train => dataset.train.push(pair),
            Split::Validation => dataset.validation.push(pair),
            Split::Test => dataset.test.push(pair),
        }
    }
    Ok(dataset)
}

fn parse_pre_split(text: &str, first_id: u64) -> Result<Vec<SentencePair>, DatasetError> {
    data_rows(text, &PRE_SPLIT_HEADER, first_id)?
        .into_iter()
        .map(|(line, id, fields)| make_pair(line, id, &fields))
        .collect()
}

type Row<'a> = (usize, u64, Vec<&'a str>);

fn data_rows<'a>(
    text: &'a str,
    header: &[&str],
    first_id: u64,
) -> Result<Vec<Row<'a>>, DatasetError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, head) = lines.next().ok_or(DatasetError::MalformedRow {
        line: 1,
        reason: "missing header row".into(),
    })?;
    let found: Vec<&str> = head.split('\t').map(str::trim).collect();
    if found != header {
        return Err(DatasetError::MalformedRow {
            line: 1,
            reason: format!("expected header `{}`", header.join("\\t")),
        });
    }
    let mut rows = Vec::new();
    let mut id = first_id;
    for (line, raw) in lines {
        // A trailing blank line is tolerated; an interior one is not a row either.
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != header.len() {
            return Err(DatasetError::MalformedRow {
                line,
                reason: format!("expected {} columns, found {}", header.len(), fields.len()),
            });
        }
        rows.push((line, id, fields));
        id += 1;
    }
    Ok(rows)
}

fn make_pair(line: usize, id: u64, fields: &[&str]) -> Result<SentencePair, DatasetError> {
    let score = parse_score(fields[2]).map_err(|reason| DatasetError::MalformedRow { line, reason })?;
    SentencePair::new(id, fields[0], fields[1], score)
        .map_err(|reason| DatasetError::MalformedRow { line, reason })
}

/// Accepts `4`, `2.2`, `.5`; rejects signs, exponents and `,` separators.
fn parse_score(raw: &str) -> Result<f64, String> {
    let s = raw.trim();
    let valid = !s.is_empty()
        && s.chars().all(|c| c.is_ascii_digit() || c == '.')
        && s.chars().filter(|&c| c == '.').count() <= 1
        && s.chars().any(|c| c.is_ascii_digit());
    if !valid {
        return Err(format!("unparsable score `{raw}`"));
    }
    s.parse::<f64>()
        .map_err(|_| format!("unparsable score `{raw}`"))
}
