use super::mmd::MmdConfig;
use super::model::Method;
use crate::data::NUM_PHASES;
use crate::error::{Error, Result};
use crate::nn::RulLoss;

/// How the phase-classifier output gates the OPS-soft discriminators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SoftGating {
    /// Predicted probabilities are constants in the gating path.
    #[default]
    Detached,
    /// Discriminator losses also back-propagate through the probabilities.
    Coupled,
    /// One-hot of the hard phase label instead of the classifier output.
    Oracle,
}

/// Which windows train the OPS-soft phase classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseClassifierData {
    #[default]
    BothDomains,
    SourceOnly,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub method: Method,
    pub epochs: usize,
    pub batch_size: usize,
    /// Initial learning rate α₀.
    pub alpha0: f64,
    pub momentum: f64,
    /// Weight of the phase-classification loss (OPS-soft).
    pub lambda_z: f64,
    /// Weight of the domain losses.
    pub lambda_d: f64,
    pub seed: u64,
    /// Number of OPS discriminators; 1 collapses all phases.
    pub n_phases: usize,
    pub rul_loss: RulLoss,
    /// Fixed gradient-reversal factor instead of the schedule.
    pub rho: Option<f64>,
    pub soft_gating: SoftGating,
    pub phase_classifier_data: PhaseClassifierData,
    pub mmd: MmdConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            method: Method::SourceOnly,
            epochs: 15,
            batch_size: 256,
            alpha0: 0.01,
            momentum: 0.9,
            lambda_z: 1.0,
            lambda_d: 1.0,
            seed: 0,
            n_phases: NUM_PHASES,
            rul_loss: RulLoss::Rmse,
            rho: None,
            soft_gating: SoftGating::Detached,
            phase_classifier_data: PhaseClassifierData::BothDomains,
            mmd: MmdConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn for_method(method: Method, seed: u64) -> Self {
        TrainConfig {
            method,
            seed,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("train.epochs", "must be >= 1"));
        }
        if self.batch_size < 2 {
            return Err(Error::config("train.batch_size", "must be >= 2"));
        }
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(Error::config("train.alpha0", "must be > 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("train.momentum", "must be in [0, 1)"));
        }
        if !(self.lambda_z >= 0.0) || !(self.lambda_d >= 0.0) {
            return Err(Error::config("train.lambda_z/lambda_d", "must be >= 0"));
        }
        if self.n_phases != 1 && self.n_phases != NUM_PHASES {
            return Err(Error::config("train.n_phases", format!("must be 1 or {NUM_PHASES}")));
        }
        if self.n_phases == 1 && self.method == Method::OpsDannSoft {
            return Err(Error::config("train.n_phases", "the soft variant needs all phases"));
        }
        if let Some(r) = self.rho {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::config("train.rho", "must be >= 0"));
            }
        }
        self.mmd.validate()
    }

    /// Phase index used for gating, after collapsing when `n_phases == 1`.
    pub fn gate_index(&self, phase: usize) -> usize {
        if self.n_phases == 1 {
            0
        } else {
            phase
        }
    }
}
