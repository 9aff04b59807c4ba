use rand::Rng;

use super::{init, Parameterized, Tensor};
use crate::error::{Error, Result};

/// Fully connected layer `y = x Wᵀ + b` on `batch × in` inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `out_features × in_features`.
    pub weight: Tensor,
    /// `out_features`.
    pub bias: Tensor,
}

impl Dense {
    pub fn new(weight: Tensor, bias: Tensor) -> Result<Self> {
        if weight.ndim() != 2 || bias.ndim() != 1 || bias.dim(0) != weight.dim(0) {
            return Err(Error::Shape(format!(
                "dense weight {:?} / bias {:?}",
                weight.shape(),
                bias.shape()
            )));
        }
        Ok(Dense { weight, bias })
    }

    pub fn zeros(in_features: usize, out_features: usize) -> Self {
        Dense {
            weight: Tensor::zeros([out_features, in_features]),
            bias: Tensor::zeros([out_features]),
        }
    }

    pub fn xavier<R: Rng + ?Sized>(in_features: usize, out_features: usize, rng: &mut R) -> Self {
        let mut d = Self::zeros(in_features, out_features);
        init::xavier_normal(&mut d.weight, in_features, out_features, rng);
        d
    }

    pub fn in_features(&self) -> usize {
        self.weight.dim(1)
    }

    pub fn out_features(&self) -> usize {
        self.weight.dim(0)
    }

    fn check_input(&self, x: &Tensor) -> Result<usize> {
        if x.ndim() != 2 || x.dim(1) != self.in_features() {
            return Err(Error::Shape(format!(
                "dense expects batch × {} input, got {:?}",
                self.in_features(),
                x.shape()
            )));
        }
        Ok(x.dim(0))
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let batch = self.check_input(x)?;
        x.check_finite("dense input")?;
        let (nin, nout) = (self.in_features(), self.out_features());
        let w = self.weight.data();
        let mut out = Tensor::zeros([batch, nout]);
        let od = out.data_mut();
        for b in 0..batch {
            let xrow = x.row(b);
            for o in 0..nout {
                let wrow = &w[o * nin..(o + 1) * nin];
                let mut s = 0.0;
                for (&wv, &xv) in wrow.iter().zip(xrow) {
                    s += wv * xv;
                }
                od[b * nout + o] = s + self.bias.data()[o];
            }
        }
        Ok(out)
    }

    pub fn backward(&mut self, x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        let batch = self.check_input(x)?;
        let (nin, nout) = (self.in_features(), self.out_features());
        if grad_out.shape() != [batch, nout] {
            return Err(Error::Shape(format!(
                "dense grad {:?} vs output {:?}",
                grad_out.shape(),
                [batch, nout]
            )));
        }
        let gd = grad_out.data();
        let mut gx = Tensor::zeros([batch, nin]);
        {
            let (w, gw) = self.weight.data_and_grad_mut();
            let gxd = gx.data_mut();
            for b in 0..batch {
                let xrow = x.row(b);
                let gxrow = &mut gxd[b * nin..(b + 1) * nin];
                for o in 0..nout {
                    let g = gd[b * nout + o];
                    if g == 0.0 {
                        continue;
                    }
                    let wrow = &w[o * nin..(o + 1) * nin];
                    let gwrow = &mut gw[o * nin..(o + 1) * nin];
                    for i in 0..nin {
                        gwrow[i] += g * xrow[i];
                        gxrow[i] += g * wrow[i];
                    }
                }
            }
        }
        let gb = self.bias.grad_mut();
        for b in 0..batch {
            for (o, acc) in gb.iter_mut().enumerate() {
                *acc += gd[b * nout + o];
            }
        }
        Ok(gx)
    }
}

impl Parameterized for Dense {
    fn visit_params<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        f(format!("{prefix}weight"), &self.weight);
        f(format!("{prefix}bias"), &self.bias);
    }

    fn visit_params_mut<'a>(&'a mut self, f: &mut dyn FnMut(&'a mut Tensor)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}
