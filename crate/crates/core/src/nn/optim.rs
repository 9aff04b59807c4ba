use super::Tensor;
use crate::error::{Error, Result};

/// Momentum buffers plus the current hyper-parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub velocity: Vec<Vec<f64>>,
    pub learning_rate: f64,
    pub momentum: f64,
}

/// SGD with classical momentum: `v ← m·v + g`, `θ ← θ − α·v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sgd {
    pub state: OptimizerState,
}

impl Sgd {
    pub fn new(learning_rate: f64, momentum: f64) -> Result<Self> {
        if !(learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate {learning_rate} must be > 0"
            )));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidArgument(format!("momentum {momentum} must be in [0, 1)")));
        }
        Ok(Sgd {
            state: OptimizerState {
                velocity: Vec::new(),
                learning_rate,
                momentum,
            },
        })
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.state.learning_rate = lr;
    }

    /// Applies one update to `params` using their gradient buffers. Tensors
    /// without a gradient buffer are treated as having zero gradient.
    pub fn step(&mut self, params: &mut [&mut Tensor]) -> Result<()> {
        let st = &mut self.state;
        if st.velocity.is_empty() {
            st.velocity = params.iter().map(|p| vec![0.0; p.len()]).collect();
        }
        if st.velocity.len() != params.len() || st.velocity.iter().zip(params.iter()).any(|(v, p)| v.len() != p.len()) {
            return Err(Error::Shape("optimizer state does not match parameters".into()));
        }
        for p in params.iter() {
            if let Some(g) = p.grad() {
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("gradient".into()));
                }
            }
        }
        for (p, v) in params.iter_mut().zip(st.velocity.iter_mut()) {
            let grad = p.grad().map(|g| g.to_vec());
            let data = p.data_mut();
            match grad {
                Some(g) => {
                    for i in 0..data.len() {
                        v[i] = st.momentum * v[i] + g[i];
                        data[i] -= st.learning_rate * v[i];
                    }
                }
                None => {
                    for i in 0..data.len() {
                        v[i] *= st.momentum;
                        data[i] -= st.learning_rate * v[i];
                    }
                }
            }
        }
        Ok(())
    }
}
