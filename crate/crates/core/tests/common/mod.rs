//! Toy flight-like data shared by the integration tests.
#![allow(dead_code)]

use phasealign::data::{Domain, LabeledSeries, MultivariateSeries, PhaseLabel, WindowSet, NUM_CHANNELS};
use phasealign::methods::StepBatch;
use phasealign::nn::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Repeating climb / cruise / descent profile of `period` steps.
pub fn profile_phase(t: usize, period: usize) -> PhaseLabel {
    match (t % period) * 3 / period {
        0 => PhaseLabel::Ascending,
        1 => PhaseLabel::Steady,
        _ => PhaseLabel::Descending,
    }
}

/// One toy unit: altitude follows the profile, sensors mix a phase-dependent
/// level, the RUL trend and noise. `shift` moves every sensor channel.
pub fn toy_unit(id: u32, len: usize, domain: Domain, shift: f64, rng: &mut ChaCha8Rng) -> LabeledSeries {
    let period = 60;
    let mut values = vec![0.0; NUM_CHANNELS * len];
    let mut alt = 0.0f64;
    let mut phases = Vec::with_capacity(len);
    let mut rul = Vec::with_capacity(len);
    for t in 0..len {
        let p = profile_phase(t, period);
        alt += match p {
            PhaseLabel::Ascending => 0.05,
            PhaseLabel::Steady => 0.0,
            PhaseLabel::Descending => -0.05,
        };
        let r = 1.0 - t as f64 / (len - 1) as f64;
        phases.push(p);
        rul.push(r);
        values[t] = alt - 0.5;
        for c in 1..NUM_CHANNELS {
            let noise: f64 = rng.sample(StandardNormal);
            let level = 0.2 * (p.index() as f64 - 1.0) * ((c % 3) as f64 - 1.0);
            values[c * len + t] = level + 0.5 * (1.0 - r) * (c as f64 / 18.0) + shift + 0.02 * noise;
        }
    }
    let series = MultivariateSeries::new(id, values, vec![1; len], 1.0, None).unwrap();
    let rul = (domain == Domain::Source).then_some(rul);
    LabeledSeries::new(series, phases, rul, domain).unwrap()
}

pub fn toy_set(domain: Domain, units: u32, len: usize, window: usize, shift: f64, seed: u64) -> WindowSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let series = (1..=units).map(|u| toy_unit(u, len, domain, shift, &mut rng)).collect();
    WindowSet::new(series, window, 1).unwrap()
}

/// Two source and two target windows covering all three phases.
pub fn tiny_batch() -> StepBatch {
    let src = toy_set(Domain::Source, 1, 120, 50, 0.0, 1);
    let tgt = toy_set(Domain::Target, 1, 120, 50, 0.3, 2);
    let s = src.gather(&[0, 30]).unwrap();
    let t = tgt.gather(&[15, 60]).unwrap();
    let mut phase = s.phase.clone();
    phase.extend_from_slice(&t.phase);
    StepBatch {
        x: Tensor::concat_rows(&[&s.x, &t.x]).unwrap(),
        n_source: 2,
        rul: s.rul.unwrap(),
        phase,
    }
}
