//! Loss functions returning `(value, d value / d prediction)`.

use crate::error::{Error, Result};

/// Predictions are clamped to `[CLAMP, 1 − CLAMP]` before taking logs.
pub const CLAMP: f64 = 1e-7;

/// Regression objective on normalised RUL.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RulLoss {
    /// Square root of the batch mean squared error.
    #[default]
    Rmse,
    /// Per-sample `√((ŷ − y)²)`, i.e. mean absolute error.
    Mae,
}

pub fn rul_loss(pred: &[f64], label: &[f64], kind: RulLoss) -> Result<(f64, Vec<f64>)> {
    if pred.is_empty() {
        return Err(Error::Empty("RUL loss batch".into()));
    }
    if pred.len() != label.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} labels",
            pred.len(),
            label.len()
        )));
    }
    let n = pred.len() as f64;
    match kind {
        RulLoss::Rmse => {
            let mse = pred.iter().zip(label).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / n;
            let rmse = mse.sqrt();
            let grad = if rmse > 0.0 {
                pred.iter().zip(label).map(|(p, y)| (p - y) / (n * rmse)).collect()
            } else {
                vec![0.0; pred.len()]
            };
            Ok((rmse, grad))
        }
        RulLoss::Mae => {
            let loss = pred.iter().zip(label).map(|(p, y)| (p - y).abs()).sum::<f64>() / n;
            let grad = pred
                .iter()
                .zip(label)
                .map(|(p, y)| {
                    let d = p - y;
                    if d > 0.0 {
                        1.0 / n
                    } else if d < 0.0 {
                        -1.0 / n
                    } else {
                        0.0
                    }
                })
                .collect();
            Ok((loss, grad))
        }
    }
}

fn clamp_prob(p: f64) -> Result<(f64, bool)> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("probability {p} outside [0, 1]")));
    }
    if p < CLAMP {
        Ok((CLAMP, true))
    } else if p > 1.0 - CLAMP {
        Ok((1.0 - CLAMP, true))
    } else {
        Ok((p, false))
    }
}

fn check_weights(weights: Option<&[f64]>, n: usize) -> Result<()> {
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::Shape(format!("{} weights for {n} samples", w.len())));
        }
        if w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "sample weights must be finite and non-negative".into(),
            ));
        }
    }
    Ok(())
}

/// Binary cross entropy, `Σ wᵢ ℓᵢ / n`. Labels must be 0 or 1.
pub fn bce(pred: &[f64], label: &[f64], weights: Option<&[f64]>) -> Result<(f64, Vec<f64>)> {
    let n = pred.len();
    if n == 0 {
        return Err(Error::Empty("BCE batch".into()));
    }
    if label.len() != n {
        return Err(Error::Shape(format!("{n} predictions vs {} labels", label.len())));
    }
    check_weights(weights, n)?;
    let nf = n as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; n];
    for i in 0..n {
        let y = label[i];
        if y != 0.0 && y != 1.0 {
            return Err(Error::InvalidArgument(format!("BCE label {y} not in {{0, 1}}")));
        }
        let w = weights.map_or(1.0, |w| w[i]);
        let (p, clamped) = clamp_prob(pred[i])?;
        let l = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
        loss += w * l;
        if !clamped {
            grad[i] = w * (-y / p + (1.0 - y) / (1.0 - p)) / nf;
        }
    }
    Ok((loss / nf, grad))
}

/// Categorical cross entropy on probability rows (`n × k`, row-major),
/// `Σ wᵢ (−ln p_{i,yᵢ}) / n`.
pub fn cross_entropy(
    probs: &[f64],
    classes: usize,
    label: &[usize],
    weights: Option<&[f64]>,
) -> Result<(f64, Vec<f64>)> {
    let n = label.len();
    if n == 0 {
        return Err(Error::Empty("cross-entropy batch".into()));
    }
    if probs.len() != n * classes {
        return Err(Error::Shape(format!(
            "{} probabilities for {n} samples × {classes} classes",
            probs.len()
        )));
    }
    check_weights(weights, n)?;
    let nf = n as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; probs.len()];
    for (i, &y) in label.iter().enumerate() {
        if y >= classes {
            return Err(Error::InvalidArgument(format!("class {y} out of range 0..{classes}")));
        }
        let w = weights.map_or(1.0, |w| w[i]);
        let (p, clamped) = clamp_prob(probs[i * classes + y])?;
        loss += -w * p.ln();
        if !clamped {
            grad[i * classes + y] = -w / (p * nf);
        }
    }
    Ok((loss / nf, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_zero_on_exact_prediction() {
        let (l, g) = rul_loss(&[0.2, 0.9], &[0.2, 0.9], RulLoss::Rmse).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rmse_and_mae_values() {
        let (l, _) = rul_loss(&[1.0, 1.0], &[0.0, 0.0], RulLoss::Rmse).unwrap();
        assert_eq!(l, 1.0);
        let (l, _) = rul_loss(&[0.5, 0.0], &[0.0, 0.25], RulLoss::Mae).unwrap();
        assert!((l - 0.375).abs() < 1e-15);
        assert!(rul_loss(&[], &[], RulLoss::Rmse).is_err());
    }

    #[test]
    fn bce_at_half_is_ln2() {
        for y in [0.0, 1.0] {
            let (l, _) = bce(&[0.5], &[y], None).unwrap();
            assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        }
    }

    #[test]
    fn bce_with_closed_gate_is_zero() {
        let (l, g) = bce(&[0.3, 0.8, 0.6], &[0.0, 1.0, 1.0], Some(&[0.0; 3])).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bce_rejects_bad_inputs() {
        assert!(bce(&[1.2], &[1.0], None).is_err());
        assert!(bce(&[0.5], &[0.5], None).is_err());
        assert!(bce(&[], &[], None).is_err());
        assert!(bce(&[0.5], &[1.0], Some(&[-1.0])).is_err());
        // saturated predictions are clamped, not rejected
        let (l, _) = bce(&[0.0], &[1.0], None).unwrap();
        assert!((l - -(CLAMP.ln())).abs() < 1e-9);
    }

    #[test]
    fn cross_entropy_value_and_gradient() {
        let p = [0.2, 0.5, 0.3, 0.6, 0.3, 0.1];
        let (l, g) = cross_entropy(&p, 3, &[1, 0], None).unwrap();
        assert!((l - -(0.5f64.ln() + 0.6f64.ln()) / 2.0).abs() < 1e-15);
        assert!((g[1] - -1.0 / (0.5 * 2.0)).abs() < 1e-15);
        assert_eq!(g[0], 0.0);
        assert!(cross_entropy(&p, 3, &[3, 0], None).is_err());
    }
}
