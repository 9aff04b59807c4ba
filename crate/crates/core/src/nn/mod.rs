//! Fixed-architecture neural network engine.
//!
//! Every layer exposes an explicit `forward` and `backward`; there is no
//! dynamic graph. Backward passes accumulate into the `grad` buffer of each
//! parameter [`Tensor`] and return the gradient with respect to the input.

pub mod activation;
pub mod batchnorm;
pub mod container;
pub mod conv;
pub mod dense;
pub mod gradcheck;
pub mod grl;
pub mod init;
pub mod loss;
pub mod optim;
pub mod schedule;
pub mod tensor;

pub use activation::Activation;
pub use batchnorm::{BatchNorm1d, BnCache, BnMode};
pub use conv::Conv1d;
pub use dense::Dense;
pub use gradcheck::{finite_difference_check, finite_difference_check_sampled, Differentiable, GradCheckReport};
pub use grl::GradientReversal;
pub use init::xavier_normal;
pub use loss::{bce, cross_entropy, rul_loss, RulLoss};
pub use optim::{OptimizerState, Sgd};
pub use schedule::{schedule_lr, schedule_rho, ScheduleState};
pub use tensor::Tensor;

/// Layer families used by the models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv1d,
    Dense,
    BatchNorm1d,
}

/// Common access to the trainable tensors of a layer or network.
pub trait Parameterized {
    /// Visits `(name, tensor)` pairs in a fixed order.
    fn visit_params<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor));

    /// Mutable counterpart of [`Parameterized::visit_params`], same order.
    fn visit_params_mut<'a>(&'a mut self, f: &mut dyn FnMut(&'a mut Tensor));

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit_params("", &mut |_, t| n += t.len());
        n
    }

    fn zero_grad(&mut self) {
        self.visit_params_mut(&mut |t| t.zero_grad());
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        self.visit_params_mut(&mut |t| out.push(t));
        out
    }

    fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        self.visit_params("", &mut |n, t| out.push((n, t)));
        out
    }
}
