//! Power-law fits on log-log axes.

use serde::Serialize;

use crate::error::{LabError, Result};

pub const MIN_FIT_POINTS: usize = 4;
/// Values at or below this are treated as vanishing.
pub const VANISHING: f64 = 1e-12;

/// Least-squares fit of log(value) = exponent · log(parameter) + intercept.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingFit {
    pub parameter: String,
    pub points: Vec<(f64, f64)>,
    pub exponent: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
}

/// Fits an exponent to (parameter, value) samples. Points with a
/// vanishing value are dropped; all values vanishing is a `ZeroData` error.
pub fn fit_power_law(parameter: &str, points: &[(f64, f64)]) -> Result<ScalingFit> {
    if !points.is_empty() && points.iter().all(|(_, v)| v.abs() <= VANISHING) {
        return Err(LabError::ZeroData);
    }
    let usable: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|(p, v)| p.is_finite() && v.is_finite() && *p > 0.0 && *v > VANISHING)
        .collect();
    if usable.len() < MIN_FIT_POINTS {
        return Err(LabError::InsufficientData {
            required: MIN_FIT_POINTS,
            got: usable.len(),
        });
    }
    let (slope, intercept, residual) = least_squares(&usable.iter().map(|(p, v)| (p.ln(), v.ln())).collect::<Vec<_>>());
    Ok(ScalingFit {
        parameter: parameter.to_string(),
        points: points.to_vec(),
        exponent: slope,
        intercept,
        residual,
    })
}

/// Ordinary least squares y = slope·x + intercept; returns the RMS residual.
pub fn least_squares(xy: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let rss: f64 = xy.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum();
    (slope, intercept, (rss / n).sqrt())
}
