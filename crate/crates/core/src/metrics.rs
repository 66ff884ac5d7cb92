//! Forecast accuracy measures, both reported in percent.

use crate::error::{check_len, Error, Result};

/// Symmetric mean absolute percentage error. A term whose actual and
/// forecast are both zero contributes nothing.
pub fn smape(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    check_len(actual.len(), forecast.len())?;
    if actual.is_empty() {
        return Err(Error::EmptyProblem("no values to score".into()));
    }
    let total: f64 = actual
        .iter()
        .zip(forecast)
        .map(|(y, f)| {
            let den = y.abs() + f.abs();
            if den == 0.0 {
                0.0
            } else {
                (y - f).abs() / den
            }
        })
        .sum();
    Ok(200.0 * total / actual.len() as f64)
}

/// `√(h Σ(y − ŷ)²) / Σ|y|`, in percent.
pub fn nrmse(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    check_len(actual.len(), forecast.len())?;
    if actual.is_empty() {
        return Err(Error::EmptyProblem("no values to score".into()));
    }
    let mass: f64 = actual.iter().map(|y| y.abs()).sum();
    if mass == 0.0 {
        return Err(Error::Degenerate("NRMSE is undefined for an all-zero actual".into()));
    }
    let sq: f64 = actual.iter().zip(forecast).map(|(y, f)| (y - f) * (y - f)).sum();
    Ok((actual.len() as f64 * sq).sqrt() / mass * 100.0)
}
