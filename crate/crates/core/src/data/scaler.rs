use super::series::{MultivariateSeries, NUM_CHANNELS};
use crate::error::{Error, Result};

/// Per-channel min-max parameters fitted on the source domain.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Domain the scaler was fitted on (always the source in this crate).
    pub fitted_on: String,
}

/// Fits channel-wise minima and maxima over all source series.
pub fn fit_scaler(source: &[MultivariateSeries]) -> Result<ScalerParams> {
    if source.is_empty() {
        return Err(Error::Empty("scaler needs at least one source series".into()));
    }
    let mut min = vec![f64::INFINITY; NUM_CHANNELS];
    let mut max = vec![f64::NEG_INFINITY; NUM_CHANNELS];
    for s in source {
        for c in 0..NUM_CHANNELS {
            for &v in s.channel(c) {
                min[c] = min[c].min(v);
                max[c] = max[c].max(v);
            }
        }
    }
    Ok(ScalerParams {
        min,
        max,
        fitted_on: "source".into(),
    })
}

impl ScalerParams {
    /// `2(x − min)/(max − min) − 1`; constant channels map to 0. Values
    /// outside the fitted range are not clipped.
    pub fn scale_value(&self, c: usize, x: f64) -> f64 {
        let range = self.max[c] - self.min[c];
        if range > 0.0 {
            2.0 * (x - self.min[c]) / range - 1.0
        } else {
            0.0
        }
    }

    pub fn apply(&self, series: &MultivariateSeries) -> Result<MultivariateSeries> {
        let mut out = series.clone();
        for c in 0..NUM_CHANNELS {
            for v in out.channel_mut(c) {
                *v = self.scale_value(c, *v);
            }
        }
        Ok(out)
    }
}

pub fn apply_scaler(series: &MultivariateSeries, params: &ScalerParams) -> Result<MultivariateSeries> {
    params.apply(series)
}
