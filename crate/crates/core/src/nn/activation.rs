use super::Tensor;

/// Pointwise and row-wise activations. Softmax acts over the last axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Softmax,
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_row(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

impl Activation {
    pub fn forward(self, x: &Tensor) -> Tensor {
        let mut y = x.clone();
        y.clear_grad();
        match self {
            Activation::Relu => y.data_mut().iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::Sigmoid => y.data_mut().iter_mut().for_each(|v| *v = sigmoid(*v)),
            Activation::Softmax => {
                let w = *x.shape().last().expect("non-empty shape");
                y.data_mut().chunks_mut(w).for_each(softmax_row);
            }
        }
        y
    }

    /// Gradient w.r.t. the input given the forward input `x`, forward output
    /// `y` and the upstream gradient.
    pub fn backward(self, x: &Tensor, y: &Tensor, grad_out: &Tensor) -> Tensor {
        let mut g = grad_out.clone();
        g.clear_grad();
        match self {
            Activation::Relu => {
                for (gv, &xv) in g.data_mut().iter_mut().zip(x.data()) {
                    if xv <= 0.0 {
                        *gv = 0.0;
                    }
                }
            }
            Activation::Sigmoid => {
                for (gv, &s) in g.data_mut().iter_mut().zip(y.data()) {
                    *gv *= s * (1.0 - s);
                }
            }
            Activation::Softmax => {
                let w = *y.shape().last().expect("non-empty shape");
                for (grow, srow) in g.data_mut().chunks_mut(w).zip(y.data().chunks(w)) {
                    let dot: f64 = grow.iter().zip(srow).map(|(a, b)| a * b).sum();
                    for (gv, &s) in grow.iter_mut().zip(srow) {
                        *gv = s * (*gv - dot);
                    }
                }
            }
        }
        g
    }
}
