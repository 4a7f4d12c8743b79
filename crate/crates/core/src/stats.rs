//! Pearson correlation between reference and model score series.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest rounding overshoot of |r| past 1 that is silently clamped.
pub const CLAMP_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 observations, got {0}")]
    TooFewObservations(usize),
    #[error("series `{0}` has zero variance; correlation is undefined")]
    DegenerateVariance(String),
    #[error("series `{0}` contains a non-finite value")]
    NonFinite(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSeries {
    pub values: Vec<f64>,
    pub label: String,
}

impl ScoreSeries {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Self {
        ScoreSeries {
            values,
            label: label.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    /// Paired observations that entered the statistic.
    pub n: usize,
    /// Pairs dropped because no well-formed score was obtained.
    pub excluded: usize,
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

fn mean(values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// Two-pass, mean-centered Pearson correlation with compensated sums.
pub fn pearson(x: &ScoreSeries, y: &ScoreSeries) -> Result<CorrelationResult, StatsError> {
    pearson_slices(&x.values, &y.values, &x.label, &y.label)
}

pub fn pearson_slices(
    x: &[f64],
    y: &[f64],
    x_label: &str,
    y_label: &str,
) -> Result<CorrelationResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Err(StatsError::TooFewObservations(n));
    }
    for (values, label) in [(x, x_label), (y, y_label)] {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite(label.to_string()));
        }
        // An exactly constant series can still leave rounding residue after
        // centering, so it is detected before any arithmetic.
        if values.iter().all(|&v| v == values[0]) {
            return Err(StatsError::DegenerateVariance(label.to_string()));
        }
    }

    let (mx, my) = (mean(x), mean(y));
    let dx: Vec<f64> = x.iter().map(|v| v - mx).collect();
    let dy: Vec<f64> = y.iter().map(|v| v - my).collect();
    let sxy = compensated_sum(dx.iter().zip(&dy).map(|(a, b)| a * b));
    let sxx = compensated_sum(dx.iter().map(|a| a * a));
    let syy = compensated_sum(dy.iter().map(|b| b * b));
    if sxx == 0.0 {
        return Err(StatsError::DegenerateVariance(x_label.to_string()));
    }
    if syy == 0.0 {
        return Err(StatsError::DegenerateVariance(y_label.to_string()));
    }

    // sqrt(s * s) == s exactly, so identical series give exactly 1.
    let r = sxy / (sxx * syy).sqrt();
    let r = if r.abs() > 1.0 && r.abs() <= 1.0 + CLAMP_TOLERANCE {
        r.signum()
    } else {
        r
    };
    Ok(CorrelationResult { r, n, excluded: 0 })
}
