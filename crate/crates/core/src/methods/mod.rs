//! Model assembly and the domain-adaptation training procedures.
//!
//! Every method shares the feature extractor and RUL regressor and differs
//! only in its extra heads and loss terms; see [`step::forward_backward`].

pub mod config;
pub mod gradcheck;
pub mod mmd;
pub mod model;
pub mod step;
pub mod train;

pub use config::{PhaseClassifierData, SoftGating, TrainConfig};
pub use mmd::{compute_mk_mmd, MmdConfig};
pub use model::{build_model, build_model_with, FeatureExtractor, Method, Mlp, ModelBundle, ParamCounts};
pub use step::{forward_backward, GrlMode, StepBatch, StepLosses};
pub use train::{
    adapt_batch_norm, denormalize, embed, predict_rul, train, train_from, train_method, train_source_only, write_trace,
    EpochTrace, TrainOutcome,
};
