//! Evaluation metrics: RMSE, NASA score, proxy A-distance, PCA and
//! silhouette, plus the per-run report.

mod pad;
mod pca;
mod report;

pub use pad::{pad_from_error, proxy_a_distance, ProbeConfig, ProbeOutcome};
pub use pca::{pca_project, silhouette_score, Pca};
pub use report::{
    write_embedding_csv, write_predictions_csv, EmbeddingPoint, MetricsReport, PredictionRow, EMBEDDING_HEADER,
    PREDICTION_HEADER,
};

use crate::error::{Error, Result};

/// Over-estimation (predicted RUL too large) rate of the NASA score.
pub const NASA_ALPHA_LATE: f64 = 1.0 / 10.0;
/// Under-estimation rate of the NASA score.
pub const NASA_ALPHA_EARLY: f64 = 1.0 / 13.0;

fn check_pairs(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.is_empty() {
        return Err(Error::Empty("metric needs at least one prediction".into()));
    }
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions, {} labels",
            pred.len(),
            truth.len()
        )));
    }
    Ok(())
}

/// Root mean squared error.
pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pairs(pred, truth)?;
    let sse: f64 = pred.iter().zip(truth).map(|(p, y)| (p - y) * (p - y)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NasaScore {
    pub total: f64,
    pub mean: f64,
}

/// Per-sample term `exp(α·|ŷ − y|)` with α = 1/10 for ŷ ≥ y, else 1/13.
pub fn nasa_term(pred: f64, truth: f64) -> f64 {
    let d = pred - truth;
    let alpha = if d >= 0.0 { NASA_ALPHA_LATE } else { NASA_ALPHA_EARLY };
    (alpha * d.abs()).exp()
}

/// NASA score over errors measured in cycles. A perfect prediction scores 1
/// per sample, so `mean ≥ 1`.
pub fn nasa_score(pred: &[f64], truth: &[f64]) -> Result<NasaScore> {
    check_pairs(pred, truth)?;
    let total: f64 = pred.iter().zip(truth).map(|(&p, &y)| nasa_term(p, y)).sum();
    Ok(NasaScore {
        total,
        mean: total / pred.len() as f64,
    })
}

/// Median of a non-empty sample (mean of the two middle values for even n).
pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

/// Linear-interpolation quantile of a non-empty sample.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() || values.iter().any(|v| v.is_nan()) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}
