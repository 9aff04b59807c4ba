use super::Tensor;
use crate::error::{Error, Result};

/// Gradient reversal: identity on the way forward, `−ρ · g` on the way back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientReversal {
    rho: f64,
}

impl GradientReversal {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(Error::InvalidArgument(format!("reversal factor {rho} must be >= 0")));
        }
        Ok(GradientReversal { rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        x.clone()
    }

    pub fn backward(&self, grad_out: &Tensor) -> Tensor {
        let mut g = grad_out.clone();
        g.data_mut().iter_mut().for_each(|v| *v *= -self.rho);
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_is_bit_identical() {
        let x = Tensor::new([4], vec![1.5, -0.0, f64::MIN_POSITIVE, -3e300]).unwrap();
        let y = GradientReversal::new(0.7).unwrap().forward(&x);
        for (a, b) in x.data().iter().zip(y.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn backward_scales_by_minus_rho() {
        let g = Tensor::new([3], vec![1.0, -2.0, 0.5]).unwrap();
        assert_eq!(
            GradientReversal::new(1.0).unwrap().backward(&g).data(),
            &[-1.0, 2.0, -0.5]
        );
        assert!(GradientReversal::new(0.0)
            .unwrap()
            .backward(&g)
            .data()
            .iter()
            .all(|&v| v == 0.0));
        assert!(GradientReversal::new(-0.1).is_err());
    }
}
