use super::{Parameterized, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    /// Normalise with batch statistics and update the running estimates.
    Train,
    /// Normalise with the running estimates.
    Eval,
}

/// Per-channel batch normalisation over `batch × channels × T` inputs.
///
/// Statistics are taken over the batch and time axes. Batch variance is the
/// biased (population) estimate, both for normalisation and for the running
/// update `running ← (1 − m)·running + m·batch`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm1d {
    /// Scale γ, one per channel.
    pub weight: Tensor,
    /// Shift β, one per channel.
    pub bias: Tensor,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub epsilon: f64,
}

/// Values saved by the forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct BnCache {
    mode: BnMode,
    x_hat: Vec<f64>,
    inv_std: Vec<f64>,
    shape: [usize; 3],
}

impl BatchNorm1d {
    pub const DEFAULT_MOMENTUM: f64 = 0.1;
    pub const DEFAULT_EPSILON: f64 = 1e-5;

    pub fn new(channels: usize) -> Self {
        Self::with_hyper(channels, Self::DEFAULT_MOMENTUM, Self::DEFAULT_EPSILON)
    }

    pub fn with_hyper(channels: usize, momentum: f64, epsilon: f64) -> Self {
        BatchNorm1d {
            weight: Tensor::filled([channels], 1.0),
            bias: Tensor::zeros([channels]),
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            momentum,
            epsilon,
        }
    }

    pub fn channels(&self) -> usize {
        self.weight.len()
    }

    fn check_input(&self, x: &Tensor) -> Result<[usize; 3]> {
        if x.ndim() != 3 || x.dim(1) != self.channels() {
            return Err(Error::Shape(format!(
                "batchnorm1d expects batch × {} × T, got {:?}",
                self.channels(),
                x.shape()
            )));
        }
        Ok([x.dim(0), x.dim(1), x.dim(2)])
    }

    /// Per-channel population mean and variance over batch and time.
    pub fn channel_stats(x: &Tensor) -> (Vec<f64>, Vec<f64>) {
        let (batch, ch, len) = (x.dim(0), x.dim(1), x.dim(2));
        let n = (batch * len) as f64;
        let xd = x.data();
        let mut mean = vec![0.0; ch];
        let mut var = vec![0.0; ch];
        for c in 0..ch {
            let mut s = 0.0;
            for b in 0..batch {
                s += xd[(b * ch + c) * len..(b * ch + c + 1) * len].iter().sum::<f64>();
            }
            let m = s / n;
            let mut v = 0.0;
            for b in 0..batch {
                for &xv in &xd[(b * ch + c) * len..(b * ch + c + 1) * len] {
                    v += (xv - m) * (xv - m);
                }
            }
            mean[c] = m;
            var[c] = v / n;
        }
        (mean, var)
    }

    pub fn forward(&mut self, x: &Tensor, mode: BnMode) -> Result<(Tensor, BnCache)> {
        let shape = self.check_input(x)?;
        let [batch, ch, len] = shape;
        x.check_finite("batchnorm1d input")?;
        let (mean, var) = match mode {
            BnMode::Train => {
                if batch < 2 {
                    return Err(Error::InvalidArgument(
                        "batchnorm1d in train mode needs a batch of at least 2".into(),
                    ));
                }
                let (mean, var) = Self::channel_stats(x);
                let m = self.momentum;
                for c in 0..ch {
                    self.running_mean[c] = (1.0 - m) * self.running_mean[c] + m * mean[c];
                    self.running_var[c] = (1.0 - m) * self.running_var[c] + m * var[c];
                }
                (mean, var)
            }
            BnMode::Eval => (self.running_mean.clone(), self.running_var.clone()),
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.epsilon).sqrt()).collect();
        let xd = x.data();
        let mut x_hat = vec![0.0; xd.len()];
        let mut out = Tensor::zeros(shape.to_vec());
        let od = out.data_mut();
        for b in 0..batch {
            for c in 0..ch {
                let (g, beta) = (self.weight.data()[c], self.bias.data()[c]);
                let off = (b * ch + c) * len;
                for t in off..off + len {
                    let h = (xd[t] - mean[c]) * inv_std[c];
                    x_hat[t] = h;
                    od[t] = g * h + beta;
                }
            }
        }
        Ok((
            out,
            BnCache {
                mode,
                x_hat,
                inv_std,
                shape,
            },
        ))
    }

    pub fn backward(&mut self, cache: &BnCache, grad_out: &Tensor) -> Result<Tensor> {
        let [batch, ch, len] = cache.shape;
        if grad_out.shape() != cache.shape {
            return Err(Error::Shape(format!(
                "batchnorm1d grad {:?} vs {:?}",
                grad_out.shape(),
                cache.shape
            )));
        }
        let gd = grad_out.data();
        let n = (batch * len) as f64;
        let mut sum_g = vec![0.0; ch];
        let mut sum_gx = vec![0.0; ch];
        for b in 0..batch {
            for c in 0..ch {
                let off = (b * ch + c) * len;
                for (g, xh) in gd[off..off + len].iter().zip(&cache.x_hat[off..off + len]) {
                    sum_g[c] += g;
                    sum_gx[c] += g * xh;
                }
            }
        }
        {
            let gw = self.weight.grad_mut();
            for c in 0..ch {
                gw[c] += sum_gx[c];
            }
        }
        {
            let gb = self.bias.grad_mut();
            for c in 0..ch {
                gb[c] += sum_g[c];
            }
        }
        let mut gx = Tensor::zeros(cache.shape.to_vec());
        let gxd = gx.data_mut();
        for b in 0..batch {
            for c in 0..ch {
                let scale = self.weight.data()[c] * cache.inv_std[c];
                let off = (b * ch + c) * len;
                for t in off..off + len {
                    gxd[t] = match cache.mode {
                        BnMode::Eval => scale * gd[t],
                        BnMode::Train => scale * (gd[t] - sum_g[c] / n - cache.x_hat[t] * sum_gx[c] / n),
                    };
                }
            }
        }
        Ok(gx)
    }
}

impl Parameterized for BatchNorm1d {
    fn visit_params<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        f(format!("{prefix}weight"), &self.weight);
        f(format!("{prefix}bias"), &self.bias);
    }

    fn visit_params_mut<'a>(&'a mut self, f: &mut dyn FnMut(&'a mut Tensor)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}
