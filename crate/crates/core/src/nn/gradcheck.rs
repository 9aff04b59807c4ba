//! Central finite-difference verification of analytic gradients.

use super::Tensor;
use crate::error::{Error, Result};

/// A scalar function of a set of tensors whose analytic gradient is known.
pub trait Differentiable {
    /// Every tensor the loss depends on (parameters and inputs), in a stable
    /// order.
    fn tensors_mut(&mut self) -> Vec<&mut Tensor>;

    /// Loss at the current values, without touching gradient buffers.
    fn loss(&mut self) -> Result<f64>;

    /// Loss at the current values; writes the analytic gradient into the
    /// gradient buffer of every tensor returned by `tensors_mut`.
    fn loss_and_grad(&mut self) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(tensor index, entry index)` of the worst entry.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub entries_checked: usize,
}

/// Gradients smaller than this are compared in absolute terms.
pub const ABS_FLOOR: f64 = 1e-6;

/// Relative discrepancy `|a − n| / max(|a|, |n|, ABS_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(ABS_FLOOR)
}

/// Compares the analytic gradient of `f` with central differences
/// `(L(θ+ε) − L(θ−ε)) / 2ε` for every entry of every tensor.
pub fn finite_difference_check(f: &mut dyn Differentiable, epsilon: f64) -> Result<GradCheckReport> {
    finite_difference_check_sampled(f, epsilon, usize::MAX)
}

/// Evenly spaced entry indices of a tensor of length `len`, at most `k` of
/// them, always including the first and last entry.
pub fn sample_entries(len: usize, k: usize) -> Vec<usize> {
    if k >= len {
        return (0..len).collect();
    }
    if k <= 1 {
        return vec![0];
    }
    let mut idx: Vec<usize> = (0..k).map(|i| i * (len - 1) / (k - 1)).collect();
    idx.dedup();
    idx
}

/// As [`finite_difference_check`], but checks at most `per_tensor` entries of
/// each tensor (see [`sample_entries`]).
pub fn finite_difference_check_sampled(
    f: &mut dyn Differentiable,
    epsilon: f64,
    per_tensor: usize,
) -> Result<GradCheckReport> {
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!(
            "epsilon {epsilon} outside [1e-7, 1e-3]"
        )));
    }
    for t in f.tensors_mut() {
        t.clear_grad();
    }
    f.loss_and_grad()?;
    let analytic: Vec<Vec<f64>> = f
        .tensors_mut()
        .into_iter()
        .map(|t| t.grad().map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; t.len()]))
        .collect();

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (0, 0),
        analytic: 0.0,
        numeric: 0.0,
        entries_checked: 0,
    };
    for (ti, grads) in analytic.iter().enumerate() {
        for ei in sample_entries(grads.len(), per_tensor) {
            let a = grads[ei];
            let orig = f.tensors_mut()[ti].data()[ei];
            f.tensors_mut()[ti].data_mut()[ei] = orig + epsilon;
            let up = f.loss()?;
            f.tensors_mut()[ti].data_mut()[ei] = orig - epsilon;
            let down = f.loss()?;
            f.tensors_mut()[ti].data_mut()[ei] = orig;
            let numeric = (up - down) / (2.0 * epsilon);
            let err = relative_error(a, numeric);
            report.entries_checked += 1;
            if err > report.max_rel_error || !err.is_finite() {
                report.max_rel_error = err;
                report.worst = (ti, ei);
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
