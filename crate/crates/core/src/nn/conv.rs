use rand::Rng;

use super::{init, Parameterized, Tensor};
use crate::error::{Error, Result};

/// 1-D convolution (cross-correlation) over the time axis with stride one and
/// "same" zero padding.
///
/// Input is `batch × in_channels × T`, output `batch × out_channels × T`.
/// For a kernel of size `k` the padding is `(k-1)/2` on the left and the rest
/// on the right, i.e. 4 left and 5 right for `k = 10`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    /// `out_channels × in_channels × kernel`.
    pub weight: Tensor,
    /// `out_channels`.
    pub bias: Tensor,
}

impl Conv1d {
    pub fn new(weight: Tensor, bias: Tensor) -> Result<Self> {
        if weight.ndim() != 3 || bias.ndim() != 1 || bias.dim(0) != weight.dim(0) {
            return Err(Error::Shape(format!(
                "conv1d weight {:?} / bias {:?}",
                weight.shape(),
                bias.shape()
            )));
        }
        Ok(Conv1d { weight, bias })
    }

    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Conv1d {
            weight: Tensor::zeros([out_channels, in_channels, kernel]),
            bias: Tensor::zeros([out_channels]),
        }
    }

    /// Xavier-normal weights, zero bias.
    pub fn xavier<R: Rng + ?Sized>(in_channels: usize, out_channels: usize, kernel: usize, rng: &mut R) -> Self {
        let mut c = Self::zeros(in_channels, out_channels, kernel);
        init::xavier_normal(&mut c.weight, in_channels * kernel, out_channels * kernel, rng);
        c
    }

    pub fn in_channels(&self) -> usize {
        self.weight.dim(1)
    }

    pub fn out_channels(&self) -> usize {
        self.weight.dim(0)
    }

    pub fn kernel(&self) -> usize {
        self.weight.dim(2)
    }

    pub fn pad_left(&self) -> usize {
        (self.kernel() - 1) / 2
    }

    fn check_input(&self, x: &Tensor) -> Result<(usize, usize)> {
        if x.ndim() != 3 || x.dim(1) != self.in_channels() {
            return Err(Error::Shape(format!(
                "conv1d expects batch × {} × T input, got {:?}",
                self.in_channels(),
                x.shape()
            )));
        }
        Ok((x.dim(0), x.dim(2)))
    }

    /// Valid output range `t` for kernel tap `k`: `0 <= t + k - pad < len`.
    #[inline]
    fn tap_range(&self, k: usize, len: usize) -> (usize, usize, isize) {
        let shift = k as isize - self.pad_left() as isize;
        let lo = (-shift).max(0) as usize;
        let hi = (len as isize - shift).min(len as isize).max(0) as usize;
        (lo, hi, shift)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (batch, len) = self.check_input(x)?;
        x.check_finite("conv1d input")?;
        let (cin, cout, kern) = (self.in_channels(), self.out_channels(), self.kernel());
        let w = self.weight.data();
        let xd = x.data();
        let mut out = Tensor::zeros([batch, cout, len]);
        let od = out.data_mut();
        for b in 0..batch {
            for o in 0..cout {
                let orow = &mut od[(b * cout + o) * len..(b * cout + o + 1) * len];
                orow.fill(self.bias.data()[o]);
                for c in 0..cin {
                    let xrow = &xd[(b * cin + c) * len..(b * cin + c + 1) * len];
                    let wrow = &w[(o * cin + c) * kern..(o * cin + c + 1) * kern];
                    for (k, &wk) in wrow.iter().enumerate() {
                        let (lo, hi, shift) = self.tap_range(k, len);
                        if lo >= hi {
                            continue;
                        }
                        let src = &xrow[(lo as isize + shift) as usize..(hi as isize + shift) as usize];
                        for (y, &xv) in orow[lo..hi].iter_mut().zip(src) {
                            *y += wk * xv;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Accumulates weight/bias gradients and returns the input gradient when
    /// `need_input_grad` is set.
    pub fn backward(&mut self, x: &Tensor, grad_out: &Tensor, need_input_grad: bool) -> Result<Option<Tensor>> {
        let (batch, len) = self.check_input(x)?;
        let (cin, cout, kern) = (self.in_channels(), self.out_channels(), self.kernel());
        if grad_out.shape() != [batch, cout, len] {
            return Err(Error::Shape(format!(
                "conv1d grad {:?} vs output {:?}",
                grad_out.shape(),
                [batch, cout, len]
            )));
        }
        let xd = x.data();
        let gd = grad_out.data();
        let pad = self.pad_left();
        let mut gx = need_input_grad.then(|| Tensor::zeros([batch, cin, len]));
        {
            let (w, gw) = self.weight.data_and_grad_mut();
            for b in 0..batch {
                for o in 0..cout {
                    let grow = &gd[(b * cout + o) * len..(b * cout + o + 1) * len];
                    for c in 0..cin {
                        let xrow = &xd[(b * cin + c) * len..(b * cin + c + 1) * len];
                        let base = (o * cin + c) * kern;
                        for k in 0..kern {
                            let shift = k as isize - pad as isize;
                            let lo = (-shift).max(0) as usize;
                            let hi = (len as isize - shift).min(len as isize).max(0) as usize;
                            if lo >= hi {
                                continue;
                            }
                            let src = &xrow[(lo as isize + shift) as usize..(hi as isize + shift) as usize];
                            let mut acc = 0.0;
                            for (&g, &xv) in grow[lo..hi].iter().zip(src) {
                                acc += g * xv;
                            }
                            gw[base + k] += acc;
                        }
                        if let Some(gx) = gx.as_mut() {
                            let gxrow = &mut gx.data_mut()[(b * cin + c) * len..(b * cin + c + 1) * len];
                            for k in 0..kern {
                                let wk = w[base + k];
                                let shift = k as isize - pad as isize;
                                let lo = (-shift).max(0) as usize;
                                let hi = (len as isize - shift).min(len as isize).max(0) as usize;
                                if lo >= hi {
                                    continue;
                                }
                                let dst = &mut gxrow[(lo as isize + shift) as usize..(hi as isize + shift) as usize];
                                for (d, &g) in dst.iter_mut().zip(&grow[lo..hi]) {
                                    *d += wk * g;
                                }
                            }
                        }
                    }
                }
            }
        }
        let gb = self.bias.grad_mut();
        for b in 0..batch {
            for (o, acc) in gb.iter_mut().enumerate() {
                *acc += gd[(b * cout + o) * len..(b * cout + o + 1) * len].iter().sum::<f64>();
            }
        }
        Ok(gx)
    }
}

impl Parameterized for Conv1d {
    fn visit_params<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        f(format!("{prefix}weight"), &self.weight);
        f(format!("{prefix}bias"), &self.bias);
    }

    fn visit_params_mut<'a>(&'a mut self, f: &mut dyn FnMut(&'a mut Tensor)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}
