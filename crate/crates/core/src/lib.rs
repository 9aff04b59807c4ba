//! Operation-profile-aware unsupervised domain adaptation for
//! remaining-useful-life (RUL) regression.
//!
//! The crate is organised bottom-up:
//!
//! - [`nn`]: a small fixed-architecture neural engine (1D convolutions, dense
//!   layers, batch norm, gradient reversal, losses, SGD and schedules) with
//!   hand-written backward rules.
//! - [`data`]: CSV ingestion, Chebyshev decimation, min-max scaling, RUL
//!   normalisation, altitude-based flight-phase labelling and windowing.
//! - [`synth`]: a synthetic fleet generator producing multiphase flights and
//!   run-to-failure sensor trajectories with ground-truth labels.
//! - [`methods`]: model assembly and the training procedures (source-only,
//!   DANN, OPS-DANN hard/soft, multi-class OPS-DANN, MK-MMD, AdaBN).
//! - [`metrics`]: RMSE, NASA score, proxy A-distance, PCA and silhouette.
//! - [`experiment`]: configuration, the end-to-end runner and comparisons.

// `!(x > 0.0)` style checks deliberately reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod experiment;
pub mod methods;
pub mod metrics;
pub mod nn;
pub mod synth;

pub use data::{Domain, LabeledSeries, MultivariateSeries, PhaseLabel, ScalerParams, Window, WindowSet};
pub use error::{Error, Result};
pub use methods::{build_model, Method, MmdConfig, ModelBundle, TrainConfig};
pub use metrics::MetricsReport;
pub use nn::Tensor;
