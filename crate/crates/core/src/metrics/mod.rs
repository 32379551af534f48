//! Loss reporting, variance maps, and the loss-vs-channel-count
//! regression used to extrapolate how far conditioning can stretch.

mod experiment;

pub use experiment::{
    paired_win_rate, run_selection_experiment, run_selection_experiment_detailed, CellReport,
    ExperimentDetail, ExperimentMethod, ExperimentParams, ExperimentRow, ExperimentTable,
};

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-channel prediction losses with their Eq-10-style per-channel
/// normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    per_channel: BTreeMap<String, f64>,
    total: f64,
    n_prediction_channels: usize,
    normalized: f64,
}

impl LossReport {
    pub fn new(per_channel: BTreeMap<String, f64>) -> Result<Self> {
        if per_channel.is_empty() {
            return Err(Error::validation("a loss report needs at least one channel"));
        }
        if per_channel.values().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::validation("channel losses must be finite and non-negative"));
        }
        let total: f64 = per_channel.values().sum();
        let n = per_channel.len();
        let normalized = normalized_loss(total, n)?;
        Ok(LossReport { per_channel, total, n_prediction_channels: n, normalized })
    }

    pub fn per_channel(&self) -> &BTreeMap<String, f64> {
        &self.per_channel
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn n_prediction_channels(&self) -> usize {
        self.n_prediction_channels
    }

    pub fn normalized(&self) -> f64 {
        self.normalized
    }

    pub fn to_json(&self) -> String {
        let doc = serde_json::json!({
            "per_channel": self.per_channel,
            "total": self.total,
            "n_prediction_channels": self.n_prediction_channels,
            "normalized": self.normalized,
        });
        serde_json::to_string_pretty(&doc).expect("loss reports always serialize")
    }
}

/// Total loss spread per prediction channel.
pub fn normalized_loss(total: f64, n_prediction_channels: usize) -> Result<f64> {
    if n_prediction_channels == 0 {
        return Err(Error::validation("cannot normalize over zero prediction channels"));
    }
    if !total.is_finite() || total < 0.0 {
        return Err(Error::validation(format!("total loss {total} must be finite and non-negative")));
    }
    Ok(total / n_prediction_channels as f64)
}

/// Squared per-pixel deviation between a real and a generated plane,
/// with its mean and maximum.
pub fn pixel_variance_map<S: Scalar>(real: &[S], generated: &[S]) -> Result<(Vec<S>, S, S)> {
    if real.is_empty() || real.len() != generated.len() {
        return Err(Error::validation(format!(
            "cannot compare {} real pixels against {} generated",
            real.len(),
            generated.len()
        )));
    }
    let map: Vec<S> = real
        .iter()
        .zip(generated)
        .map(|(&r, &g)| {
            let d = r - g;
            d * d
        })
        .collect();
    let mean = map.iter().copied().sum::<S>() / S::from_f64_lossy(map.len() as f64);
    let max = map.iter().copied().fold(S::zero(), S::max);
    Ok((map, mean, max))
}

/// Ordinary least squares line with its fit quality and the points it
/// was fitted to.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    slope: f64,
    intercept: f64,
    r_squared: f64,
    points: Vec<(f64, f64)>,
}

impl RegressionFit {
    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn r_squared(&self) -> f64 {
        self.r_squared
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }

    pub fn to_json(&self) -> String {
        let pts: Vec<[f64; 2]> = self.points.iter().map(|&(x, y)| [x, y]).collect();
        let doc = serde_json::json!({
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "points": pts,
        });
        serde_json::to_string_pretty(&doc).expect("fits always serialize")
    }
}

/// Least-squares line through `points` via centered moments. Constant
/// y data fits exactly, so its r² is reported as 1.
pub fn fit_line(points: &[(f64, f64)]) -> Result<RegressionFit> {
    if points.len() < 2 {
        return Err(Error::validation("a line needs at least two points"));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::validation("regression points must be finite"));
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    if sxx == 0.0 {
        return Err(Error::degenerate("all x values are equal; the slope is undetermined"));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean_y) * (p.1 - mean_y)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|p| {
            let r = p.1 - (intercept + slope * p.0);
            r * r
        })
        .sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(RegressionFit { slope, intercept, r_squared, points: points.to_vec() })
}

/// Largest channel count whose predicted per-channel loss stays under
/// `loss_threshold` on an upward-sloping fit.
pub fn extrapolate_max_channels(fit: &RegressionFit, loss_threshold: f64) -> Result<i64> {
    if !loss_threshold.is_finite() {
        return Err(Error::validation("loss threshold must be finite"));
    }
    if fit.slope <= 0.0 {
        return Err(Error::validation(format!(
            "slope {} gives no finite channel bound",
            fit.slope
        )));
    }
    Ok(((loss_threshold - fit.intercept) / fit.slope).floor() as i64)
}
