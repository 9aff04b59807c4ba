//! Ingestion and preprocessing of unit recordings.

pub mod csv_io;
pub mod decimate;
pub mod phase;
pub mod prep;
pub mod rul;
pub mod scaler;
pub mod series;
pub mod window;

pub use csv_io::{load_csv, write_csv, FleetMetadata};
pub use decimate::decimate;
pub use phase::{label_phases, PhaseLabel, NUM_PHASES};
pub use prep::{prepare_split, prepare_unit, PrepConfig, PreparedSplit, PreparedUnit};
pub use rul::{normalize_rul, RulNormalization};
pub use scaler::{apply_scaler, fit_scaler, ScalerParams};
pub use series::{LifeSpan, MultivariateSeries, CHANNELS, NUM_CHANNELS};
pub use window::{make_windows, Batch, Domain, LabeledSeries, Window, WindowSet};
