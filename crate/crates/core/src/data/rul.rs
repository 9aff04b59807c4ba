use super::series::{LifeSpan, MultivariateSeries};
use crate::error::{Error, Result};

/// How cycle numbers are turned into a label in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RulNormalization {
    /// `(eol − c) / (eol − onset)`: 1 at fault onset, 0 at EOL.
    #[default]
    OnsetAnchored,
    /// `(eol − c) / eol`: remaining cycles over the unit's maximum cycle.
    MaxCycle,
}

pub fn rul_value(life: LifeSpan, cycle: u32, mode: RulNormalization) -> f64 {
    let remaining = life.eol_cycle as f64 - cycle as f64;
    match mode {
        RulNormalization::OnsetAnchored => remaining / life.span() as f64,
        RulNormalization::MaxCycle => remaining / life.eol_cycle as f64,
    }
}

/// Per-timestep normalised RUL for every step of `series`.
pub fn normalize_rul(series: &MultivariateSeries, mode: RulNormalization) -> Result<Vec<f64>> {
    let life = series
        .life
        .ok_or_else(|| Error::InvalidArgument(format!("unit {} has no fault onset / EOL", series.unit_id)))?;
    if life.eol_cycle <= life.fault_onset_cycle {
        return Err(Error::InvalidArgument(format!(
            "unit {}: EOL {} not after onset {}",
            series.unit_id, life.eol_cycle, life.fault_onset_cycle
        )));
    }
    Ok(series.cycles.iter().map(|&c| rul_value(life, c, mode)).collect())
}

/// Mask of timesteps at or after fault onset (the only ones used for RUL).
pub fn post_onset_mask(series: &MultivariateSeries) -> Result<Vec<bool>> {
    let life = series
        .life
        .ok_or_else(|| Error::InvalidArgument(format!("unit {} has no fault onset / EOL", series.unit_id)))?;
    Ok(series.cycles.iter().map(|&c| c >= life.fault_onset_cycle).collect())
}
