//! Score extraction from raw model responses.

use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use crate::dataset::{MAX_SCORE, MIN_SCORE};

// Marker, optional whitespace, colon, optional whitespace, unsigned decimal.
static SCORE_PATTERN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i:similarity score)\s*:\s*([0-9]+(?:\.[0-9]+)?)").expect("valid pattern")
});

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("response does not contain `Similarity score : <number>`")]
    NoMatch,
    #[error("score {0} is outside [0, 4]")]
    OutOfRange(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedScore {
    pub value: f64,
    /// Byte range of the whole match within the response.
    pub matched_span: Range<usize>,
}

/// Extracts the first `Similarity score : <n>` occurrence from `raw`.
///
/// The marker is matched case-insensitively; only `.` is a decimal separator
/// and signs are not part of the pattern.
pub fn parse_similarity(raw: &str) -> Result<ParsedScore, ParseError> {
    let caps = SCORE_PATTERN.captures(raw).ok_or(ParseError::NoMatch)?;
    let whole = caps.get(0).expect("group 0 always present");
    let number = caps.get(1).expect("group 1 is mandatory");
    // Digit-only text always parses; very long runs overflow to infinity.
    let value: f64 = number.as_str().parse().map_err(|_| ParseError::NoMatch)?;
    if !(MIN_SCORE..=MAX_SCORE).contains(&value) {
        return Err(ParseError::OutOfRange(value));
    }
    Ok(ParsedScore {
        value,
        matched_span: whole.range(),
    })
}
