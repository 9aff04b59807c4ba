use crate::error::{Error, Result};

/// Reversal-factor ramp `ρ(p) = 2 / (1 + e^{−10p}) − 1`.
pub fn schedule_rho(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("progress {p} outside [0, 1]")));
    }
    Ok(2.0 / (1.0 + (-10.0 * p).exp()) - 1.0)
}

/// Annealed learning rate `α(p) = α₀ / (1 + 10p)^0.75`.
pub fn schedule_lr(p: f64, alpha0: f64) -> f64 {
    alpha0 / (1.0 + 10.0 * p).powf(0.75)
}

/// Training progress tracker. Progress is measured in optimiser steps; the
/// learning rate is refreshed once per epoch, ρ at every step.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleState {
    pub total_steps: usize,
    pub completed_steps: usize,
    pub alpha0: f64,
}

impl ScheduleState {
    pub fn new(total_steps: usize, alpha0: f64) -> Result<Self> {
        if total_steps == 0 {
            return Err(Error::InvalidArgument("schedule needs at least one step".into()));
        }
        if !(alpha0 > 0.0) {
            return Err(Error::InvalidArgument(format!("alpha0 {alpha0} must be > 0")));
        }
        Ok(ScheduleState {
            total_steps,
            completed_steps: 0,
            alpha0,
        })
    }

    pub fn progress(&self) -> f64 {
        (self.completed_steps as f64 / self.total_steps as f64).min(1.0)
    }

    pub fn rho(&self) -> f64 {
        schedule_rho(self.progress()).expect("progress is clamped")
    }

    pub fn learning_rate(&self) -> f64 {
        schedule_lr(self.progress(), self.alpha0)
    }

    pub fn advance(&mut self) {
        self.completed_steps += 1;
    }
}
