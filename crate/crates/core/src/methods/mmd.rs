//! Multi-kernel maximum mean discrepancy between two feature batches.

use crate::error::{Error, Result};
use crate::nn::Tensor;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MmdConfig {
    /// Gaussian kernel parameters γ in `exp(−γ‖a − b‖²)`.
    pub bandwidths: Vec<f64>,
    /// Weight of the MMD term in the training loss.
    pub weight: f64,
}

impl Default for MmdConfig {
    fn default() -> Self {
        MmdConfig {
            bandwidths: vec![0.01, 0.1, 1.0, 10.0, 100.0],
            weight: 1.0,
        }
    }
}

impl MmdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bandwidths.is_empty() || self.bandwidths.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
            return Err(Error::config("mmd.bandwidths", "need at least one positive bandwidth"));
        }
        if !(self.weight >= 0.0) {
            return Err(Error::config("mmd.weight", "must be >= 0"));
        }
        Ok(())
    }
}

/// MMD value and its gradient with respect to both inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct MmdOutput {
    pub value: f64,
    pub grad_source: Tensor,
    pub grad_target: Tensor,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Biased V-statistic `mean k(S,S) + mean k(T,T) − 2 mean k(S,T)` with `k`
/// the sum of Gaussian kernels over `bandwidths`.
pub fn compute_mk_mmd(source: &Tensor, target: &Tensor, cfg: &MmdConfig) -> Result<f64> {
    Ok(mk_mmd_with_grad(source, target, cfg)?.value)
}

pub fn mk_mmd_with_grad(source: &Tensor, target: &Tensor, cfg: &MmdConfig) -> Result<MmdOutput> {
    if source.ndim() != 2 || target.ndim() != 2 || source.dim(1) != target.dim(1) {
        return Err(Error::Shape(format!(
            "MMD inputs {:?} and {:?} must be n × d with equal d",
            source.shape(),
            target.shape()
        )));
    }
    let (ns, nt, d) = (source.dim(0), target.dim(0), source.dim(1));
    let rows = |t: &Tensor, i: usize| t.row(i).to_vec();
    let all: Vec<Vec<f64>> = (0..ns)
        .map(|i| rows(source, i))
        .chain((0..nt).map(|i| rows(target, i)))
        .collect();
    let n = ns + nt;
    // coefficient of k(i, j) in the V-statistic
    let coef = |i: usize, j: usize| -> f64 {
        match (i < ns, j < ns) {
            (true, true) => 1.0 / (ns * ns) as f64,
            (false, false) => 1.0 / (nt * nt) as f64,
            _ => -1.0 / (ns * nt) as f64,
        }
    };
    let mut value = 0.0;
    let mut grad = vec![vec![0.0; d]; n];
    for i in 0..n {
        // diagonal terms: k = K, zero gradient
        value += coef(i, i) * cfg.bandwidths.len() as f64;
        for j in i + 1..n {
            let dist = sq_dist(&all[i], &all[j]);
            let mut k = 0.0;
            let mut dk = 0.0;
            for &g in &cfg.bandwidths {
                let e = (-g * dist).exp();
                k += e;
                dk += -g * e;
            }
            let c = coef(i, j);
            value += 2.0 * c * k;
            // d/da k(a, b) = dk · 2(a − b); each off-diagonal pair appears twice
            let s = 4.0 * c * dk;
            for t in 0..d {
                let diff = all[i][t] - all[j][t];
                grad[i][t] += s * diff;
                grad[j][t] -= s * diff;
            }
        }
    }
    let grad_source = Tensor::new([ns, d], grad[..ns].concat())?;
    let grad_target = Tensor::new([nt, d], grad[ns..].concat())?;
    Ok(MmdOutput {
        value,
        grad_source,
        grad_target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(g: f64) -> MmdConfig {
        MmdConfig {
            bandwidths: vec![g],
            weight: 1.0,
        }
    }

    #[test]
    fn identical_batches_give_zero() {
        let a = Tensor::from_fn([6, 4], |i| (i as f64 * 0.37).sin());
        let v = compute_mk_mmd(&a, &a, &MmdConfig::default()).unwrap();
        assert!(v.abs() < 1e-9, "{v}");
    }

    #[test]
    fn two_point_formula() {
        let a = Tensor::new([1, 3], vec![0.1, -0.4, 0.9]).unwrap();
        let b = Tensor::new([1, 3], vec![0.3, 0.2, 0.5]).unwrap();
        let d2: f64 = 0.2f64.powi(2) + 0.6f64.powi(2) + 0.4f64.powi(2);
        for g in [0.01, 1.0, 10.0] {
            let v = compute_mk_mmd(&a, &b, &single(g)).unwrap();
            assert!((v - (2.0 - 2.0 * (-g * d2).exp())).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = Tensor::zeros([2, 3]);
        let b = Tensor::zeros([2, 4]);
        assert!(compute_mk_mmd(&a, &b, &MmdConfig::default()).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let s = Tensor::from_fn([3, 2], |i| (i as f64 * 0.7).cos() * 0.5);
        let t = Tensor::from_fn([2, 2], |i| (i as f64 * 1.3).sin() * 0.5 + 0.2);
        let cfg = MmdConfig::default();
        let out = mk_mmd_with_grad(&s, &t, &cfg).unwrap();
        let eps = 1e-6;
        for (which, grad) in [(0, &out.grad_source), (1, &out.grad_target)] {
            for k in 0..grad.len() {
                let (mut sp, mut tp) = (s.clone(), t.clone());
                let (mut sm, mut tm) = (s.clone(), t.clone());
                if which == 0 {
                    sp.data_mut()[k] += eps;
                    sm.data_mut()[k] -= eps;
                } else {
                    tp.data_mut()[k] += eps;
                    tm.data_mut()[k] -= eps;
                }
                let num =
                    (compute_mk_mmd(&sp, &tp, &cfg).unwrap() - compute_mk_mmd(&sm, &tm, &cfg).unwrap()) / (2.0 * eps);
                assert!(
                    (num - grad.data()[k]).abs() < 1e-6,
                    "{which}/{k}: {num} vs {}",
                    grad.data()[k]
                );
            }
        }
    }

    proptest! {
        #[test]
        fn symmetric_and_non_negative(a in proptest::collection::vec(-2.0f64..2.0, 6..=6),
                                      b in proptest::collection::vec(-2.0f64..2.0, 4..=4)) {
            let s = Tensor::new([3, 2], a).unwrap();
            let t = Tensor::new([2, 2], b).unwrap();
            let cfg = MmdConfig::default();
            let st = compute_mk_mmd(&s, &t, &cfg).unwrap();
            let ts = compute_mk_mmd(&t, &s, &cfg).unwrap();
            prop_assert!(st >= -1e-9);
            prop_assert!((st - ts).abs() < 1e-12);
        }
    }
}
