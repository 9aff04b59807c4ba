//! Finite-difference checks of full method loss graphs.
//!
//! Checks run in [`GrlMode::Plain`], where the analytic gradient is the true
//! gradient of [`StepLosses::total`]. For OPS-soft this requires
//! [`SoftGating::Coupled`](super::SoftGating::Coupled) or `Oracle`; with
//! detached gating the probabilities are constants only in the backward pass.

use super::config::TrainConfig;
use super::model::ModelBundle;
use super::step::{forward_backward, GrlMode, StepBatch};
use crate::error::Result;
use crate::nn::{finite_difference_check_sampled, Differentiable, GradCheckReport, Parameterized, Tensor};

pub struct MethodObjective<'a> {
    pub model: &'a mut ModelBundle,
    pub batch: &'a StepBatch,
    pub cfg: &'a TrainConfig,
}

impl Differentiable for MethodObjective<'_> {
    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.model.params_mut()
    }

    fn loss(&mut self) -> Result<f64> {
        Ok(forward_backward(self.model, self.batch, self.cfg, GrlMode::Plain, false)?.total)
    }

    fn loss_and_grad(&mut self) -> Result<f64> {
        self.model.zero_grad();
        Ok(forward_backward(self.model, self.batch, self.cfg, GrlMode::Plain, true)?.total)
    }
}

/// Central-difference check of up to `per_tensor` entries of every parameter
/// tensor of `model` on one batch.
pub fn check_method_gradients(
    model: &mut ModelBundle,
    batch: &StepBatch,
    cfg: &TrainConfig,
    epsilon: f64,
    per_tensor: usize,
) -> Result<GradCheckReport> {
    let mut obj = MethodObjective { model, batch, cfg };
    finite_difference_check_sampled(&mut obj, epsilon, per_tensor)
}
