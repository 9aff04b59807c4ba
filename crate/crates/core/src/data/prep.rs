//! End-to-end preprocessing from raw 1 Hz units to window sets.
//!
//! Order per unit: phase labels on the raw altitude, decimation (labels are
//! subsampled alongside), restriction to cycles at or after fault onset, RUL
//! labels. The scaler is then fitted on the prepared source units and applied
//! to both domains.

use rayon::prelude::*;

use super::decimate::{decimate, subsample, DEFAULT_FACTOR, DEFAULT_ORDER};
use super::phase::{label_phases, PhaseLabel, DEFAULT_MEDIAN_LEN, DEFAULT_THRESHOLD_FT_S};
use super::rul::{normalize_rul, post_onset_mask, RulNormalization};
use super::scaler::{fit_scaler, ScalerParams};
use super::series::MultivariateSeries;
use super::window::{Domain, LabeledSeries, WindowSet, DEFAULT_WINDOW_LEN};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepConfig {
    pub decimation_factor: usize,
    pub filter_order: usize,
    pub phase_threshold: f64,
    pub median_len: usize,
    pub window_len: usize,
    pub window_stride: usize,
    pub rul_normalization: RulNormalization,
}

impl Default for PrepConfig {
    fn default() -> Self {
        PrepConfig {
            decimation_factor: DEFAULT_FACTOR,
            filter_order: DEFAULT_ORDER,
            phase_threshold: DEFAULT_THRESHOLD_FT_S,
            median_len: DEFAULT_MEDIAN_LEN,
            window_len: DEFAULT_WINDOW_LEN,
            window_stride: 1,
            rul_normalization: RulNormalization::OnsetAnchored,
        }
    }
}

impl PrepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.decimation_factor < 2 {
            return Err(Error::config("decimation_factor", "must be >= 2"));
        }
        if self.filter_order == 0 || self.filter_order % 2 != 0 {
            return Err(Error::config("filter_order", "must be even and positive"));
        }
        if !(self.phase_threshold > 0.0) {
            return Err(Error::config("phase_threshold", "must be > 0"));
        }
        if self.median_len % 2 == 0 {
            return Err(Error::config("median_len", "must be odd"));
        }
        if self.window_len == 0 || self.window_stride == 0 {
            return Err(Error::config("window_len/window_stride", "must be positive"));
        }
        Ok(())
    }
}

/// A decimated post-onset unit with per-step phase and RUL labels, unscaled.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedUnit {
    pub series: MultivariateSeries,
    pub phases: Vec<PhaseLabel>,
    pub rul: Vec<f64>,
}

pub fn prepare_unit(raw: &MultivariateSeries, cfg: &PrepConfig) -> Result<PreparedUnit> {
    let phases = label_phases(raw, cfg.phase_threshold, cfg.median_len)?;
    let dec = decimate(raw, cfg.decimation_factor, cfg.filter_order)?;
    let phases = subsample(&phases, cfg.decimation_factor);
    let keep = post_onset_mask(&dec)?;
    let kept: Vec<PhaseLabel> = phases.iter().zip(&keep).filter(|(_, &k)| k).map(|(&p, _)| p).collect();
    if kept.is_empty() {
        return Err(Error::TooShort(format!(
            "unit {}: no samples after fault onset",
            raw.unit_id
        )));
    }
    let series = dec.filter_steps(&keep)?;
    let rul = normalize_rul(&series, cfg.rul_normalization)?;
    Ok(PreparedUnit {
        series,
        phases: kept,
        rul,
    })
}

pub fn prepare_units(raw: &[MultivariateSeries], cfg: &PrepConfig) -> Result<Vec<PreparedUnit>> {
    cfg.validate()?;
    raw.par_iter().map(|s| prepare_unit(s, cfg)).collect()
}

/// Scales prepared units and builds the window set. RUL labels are kept for
/// both domains; training strips them from the target.
pub fn to_window_set(
    units: &[PreparedUnit],
    scaler: &ScalerParams,
    domain: Domain,
    cfg: &PrepConfig,
) -> Result<WindowSet> {
    let labeled = units
        .iter()
        .map(|u| LabeledSeries::new(scaler.apply(&u.series)?, u.phases.clone(), Some(u.rul.clone()), domain))
        .collect::<Result<Vec<_>>>()?;
    WindowSet::new(labeled, cfg.window_len, cfg.window_stride)
}

/// Prepared source/target pair sharing one source-fitted scaler.
#[derive(Debug, Clone)]
pub struct PreparedSplit {
    pub source: WindowSet,
    pub target: WindowSet,
    pub scaler: ScalerParams,
}

pub fn prepare_split(
    source_raw: &[MultivariateSeries],
    target_raw: &[MultivariateSeries],
    cfg: &PrepConfig,
) -> Result<PreparedSplit> {
    let src = prepare_units(source_raw, cfg)?;
    let tgt = prepare_units(target_raw, cfg)?;
    let plain: Vec<MultivariateSeries> = src.iter().map(|u| u.series.clone()).collect();
    let scaler = fit_scaler(&plain)?;
    Ok(PreparedSplit {
        source: to_window_set(&src, &scaler, Domain::Source, cfg)?,
        target: to_window_set(&tgt, &scaler, Domain::Target, cfg)?,
        scaler,
    })
}
