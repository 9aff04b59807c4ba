//! Shared fixtures for the criterion benches.

use phasealign::data::{prepare_split, PrepConfig, PreparedSplit, NUM_CHANNELS};
use phasealign::methods::StepBatch;
use phasealign::synth::{FleetSpec, FlightClass};
use phasealign::{MultivariateSeries, Tensor};

/// Window length used by every model.
pub const T: usize = 50;

/// A deterministic `n × 18 × 50` input with values in `[-1, 1]`.
pub fn input(n: usize) -> Tensor {
    Tensor::from_fn([n, NUM_CHANNELS, T], |i| (i as f64 * 0.37).sin())
}

/// `n` source and `n` target windows with cycling phase labels.
pub fn step_batch(n: usize) -> StepBatch {
    StepBatch {
        x: input(2 * n),
        n_source: n,
        rul: (0..n).map(|i| i as f64 / n as f64).collect(),
        phase: (0..2 * n).map(|i| i % 3).collect(),
    }
}

/// Generated fleet with short lifetimes so the benches stay quick.
pub fn fleet(class: FlightClass, units: u32, seed: u64) -> Vec<MultivariateSeries> {
    let mut spec = FleetSpec::new(class, units, seed);
    spec.degradation.total_cycles = (10, 12);
    spec.degradation.cycle_stride = 3;
    spec.generate().expect("valid spec").into_series()
}

pub fn small_split(stride: usize) -> PreparedSplit {
    let cfg = PrepConfig {
        window_stride: stride,
        ..PrepConfig::default()
    };
    prepare_split(&fleet(FlightClass::Short, 2, 1), &fleet(FlightClass::Long, 1, 2), &cfg).expect("prepares")
}
