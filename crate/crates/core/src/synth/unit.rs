//! Run-to-failure units: health trajectories and sensor synthesis.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::flight::{gen_flight_with, FlightClassSpec, FlightProfile, Range};
use crate::data::series::{LifeSpan, MultivariateSeries, NUM_CHANNELS};
use crate::data::PhaseLabel;
use crate::error::{Error, Result};

/// Number of engine sensor channels (everything after the four descriptors).
pub const NUM_SENSORS: usize = 14;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegradationSpec {
    /// End-of-life cycle.
    pub total_cycles: (u32, u32),
    /// Fault onset as a fraction of the lifetime.
    pub onset_fraction: Range,
    /// Initial health.
    pub h0: Range,
    /// Health lost per cycle before onset.
    pub linear_slope: Range,
    /// Growth rate of the post-onset exponential, per unit of normalised
    /// post-onset time.
    pub exp_rate: Range,
    /// Health at end of life.
    pub eol_health: f64,
    /// Per-sensor gain of the health deficit `1 − h`.
    pub coupling: [f64; NUM_SENSORS],
    /// Relative standard deviation of sensor noise.
    pub noise_std: f64,
    /// Keep every k-th cycle; fault onset and EOL are always kept.
    pub cycle_stride: u32,
}

impl Default for DegradationSpec {
    fn default() -> Self {
        DegradationSpec {
            total_cycles: (60, 90),
            onset_fraction: Range::new(0.55, 0.75),
            h0: Range::new(0.95, 1.0),
            linear_slope: Range::new(2e-4, 6e-4),
            exp_rate: Range::new(2.0, 3.0),
            eol_health: 0.75,
            //  T24   T30   T48   T50   P15   P2    P21   P24   Ps30   P40    P50   Nf    Nc    Wf
            coupling: [
                0.30, 0.42, 0.90, 0.72, -0.12, 0.0, -0.18, -0.24, -0.36, -0.36, 0.15, 0.15, 0.21, 0.84,
            ],
            noise_std: 0.002,
            cycle_stride: 1,
        }
    }
}

impl DegradationSpec {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.total_cycles;
        if lo < 4 || hi < lo {
            return Err(Error::config("total_cycles", "need 4 <= lo <= hi"));
        }
        let f = self.onset_fraction;
        if !(f.lo > 0.0 && f.hi < 1.0 && f.lo <= f.hi) {
            return Err(Error::config("onset_fraction", "must lie strictly inside (0, 1)"));
        }
        if !(self.h0.lo > self.eol_health && self.h0.hi <= 1.0 && self.h0.lo <= self.h0.hi) {
            return Err(Error::config("h0", "must lie in (eol_health, 1]"));
        }
        if !(self.eol_health > 0.0) {
            return Err(Error::config("eol_health", "must be > 0"));
        }
        if !(self.linear_slope.lo >= 0.0 && self.linear_slope.lo <= self.linear_slope.hi) {
            return Err(Error::config("linear_slope", "must be a non-negative range"));
        }
        // health at onset must stay above the EOL threshold
        if self.h0.lo - self.linear_slope.hi * hi as f64 <= self.eol_health {
            return Err(Error::config(
                "linear_slope",
                "pre-onset decay reaches the EOL threshold",
            ));
        }
        if !(self.exp_rate.lo > 0.0 && self.exp_rate.lo <= self.exp_rate.hi) {
            return Err(Error::config("exp_rate", "must be positive"));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::config("noise_std", "must be >= 0"));
        }
        if self.cycle_stride == 0 {
            return Err(Error::config("cycle_stride", "must be >= 1"));
        }
        Ok(())
    }
}

/// Sampled per-unit degradation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HealthModel {
    pub h0: f64,
    pub slope: f64,
    pub rate: f64,
    pub eol_health: f64,
    pub life: LifeSpan,
}

impl HealthModel {
    pub fn onset_health(&self) -> f64 {
        self.h0 - self.slope * self.life.fault_onset_cycle as f64
    }

    /// Linear before onset; after onset an accelerating exponential
    /// `h_on − A(e^{r u} − 1)` in normalised time `u`, with `A` chosen so that
    /// the EOL threshold is reached exactly at `eol_cycle`.
    pub fn health(&self, cycle: u32) -> f64 {
        let onset = self.life.fault_onset_cycle;
        if cycle <= onset {
            return self.h0 - self.slope * cycle as f64;
        }
        let h_on = self.onset_health();
        let u = (cycle - onset) as f64 / self.life.span() as f64;
        let a = (h_on - self.eol_health) / self.rate.exp_m1();
        h_on - a * (self.rate * u).exp_m1()
    }

    pub fn sample<R: Rng + ?Sized>(spec: &DegradationSpec, rng: &mut R) -> Result<Self> {
        let eol = rng.random_range(spec.total_cycles.0..=spec.total_cycles.1);
        let onset = ((spec.onset_fraction.sample(rng) * eol as f64).round() as u32).clamp(1, eol - 1);
        Ok(HealthModel {
            h0: spec.h0.sample(rng),
            slope: spec.linear_slope.sample(rng),
            rate: spec.exp_rate.sample(rng),
            eol_health: spec.eol_health,
            life: LifeSpan::new(onset, eol)?,
        })
    }
}

/// ISA static temperature (°R) and pressure (psia) at altitude `alt` (ft).
pub fn isa(alt: f64) -> (f64, f64) {
    const TROPOPAUSE: f64 = 36_089.0;
    let alt = alt.max(-1_000.0);
    if alt <= TROPOPAUSE {
        let t = 518.67 - 0.003_566 * alt;
        (t, 14.696 * (t / 518.67).powf(5.2559))
    } else {
        let t: f64 = 389.97;
        let p_trop = 14.696 * (t / 518.67).powf(5.2559);
        (t, p_trop * (-(alt - TROPOPAUSE) / 20_806.0).exp())
    }
}

/// Noise-free descriptors `(T2, P2)` and the 14 sensors for one sample.
/// The health deficit acts through throttle-dependent gains.
pub fn sensor_model(
    alt: f64,
    mach: f64,
    tra: f64,
    health: f64,
    coupling: &[f64; NUM_SENSORS],
) -> [f64; NUM_SENSORS + 1] {
    let (ts, ps) = isa(alt);
    let ram = 1.0 + 0.2 * mach * mach;
    let t2 = ts * ram;
    let p2 = ps * ram.powf(3.5);
    let theta = t2 / 518.67;
    let delta = p2 / 14.696;
    let tau = (tra / 100.0).clamp(0.05, 1.2);
    let d = 1.0 - health;
    // the fault shows most strongly at high power
    let g = |k: usize| 1.0 + coupling[k] * d * (0.4 + 1.2 * tau);
    let nf = 2_388.0 * theta.sqrt() * (0.55 + 0.45 * tau);
    let nc = 9_050.0 * theta.sqrt() * (0.7 + 0.3 * tau.powf(0.7));
    [
        t2,
        t2 * (1.0 + 0.32 * tau.powf(0.8)) * g(0),
        t2 * (1.0 + 0.95 * tau.powf(0.85)) * g(1),
        t2 * (1.9 + 1.7 * tau * tau.sqrt()) * g(2),
        t2 * (1.45 + 0.95 * tau) * g(3),
        p2 * (1.18 + 0.42 * tau) * g(4),
        p2 * g(5),
        p2 * (1.25 + 0.48 * tau) * g(6),
        p2 * (1.6 + 1.3 * tau) * g(7),
        p2 * (3.8 + 16.0 * tau.powf(1.2)) * g(8),
        p2 * (4.0 + 17.0 * tau.powf(1.2)) * g(9),
        p2 * (1.04 + 0.55 * tau) * g(10),
        nf * g(11),
        nc * g(12),
        delta * theta.sqrt() * (0.35 + 4.2 * tau.powf(1.6)) * g(13),
    ]
}

/// Fills channels for one flight at the given health, appending to `cols`.
fn synthesize_flight<R: Rng + ?Sized>(
    f: &FlightProfile,
    health: f64,
    spec: &DegradationSpec,
    cols: &mut [Vec<f64>; NUM_CHANNELS],
    rng: &mut R,
) {
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    for i in 0..f.len() {
        let s = sensor_model(f.altitude[i], f.mach[i], f.tra[i], health, &spec.coupling);
        cols[0].push(f.altitude[i]);
        cols[1].push(f.mach[i]);
        cols[2].push(f.tra[i]);
        for (k, &v) in s.iter().enumerate() {
            let jitter = if spec.noise_std > 0.0 {
                1.0 + spec.noise_std * noise.sample(rng)
            } else {
                1.0
            };
            cols[3 + k].push(v * jitter);
        }
    }
}

/// One generated unit with ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedUnit {
    pub series: MultivariateSeries,
    pub phases: Vec<PhaseLabel>,
    pub health: HealthModel,
    /// Start offset of each recorded flight within the series.
    pub flight_starts: Vec<usize>,
}

/// Recorded cycles: every `stride`-th cycle, plus fault onset and EOL.
pub fn recorded_cycles(life: LifeSpan, stride: u32) -> Vec<u32> {
    let mut c: Vec<u32> = (1..=life.eol_cycle).filter(|c| (c - 1) % stride == 0).collect();
    c.extend([life.fault_onset_cycle, life.eol_cycle]);
    c.sort_unstable();
    c.dedup();
    c
}

pub fn gen_unit_with(
    class: &FlightClassSpec,
    deg: &DegradationSpec,
    unit_id: u32,
    rng: &mut ChaCha8Rng,
) -> Result<GeneratedUnit> {
    class.validate()?;
    deg.validate()?;
    let health = HealthModel::sample(deg, rng)?;
    let mut cols: [Vec<f64>; NUM_CHANNELS] = std::array::from_fn(|_| Vec::new());
    let mut cycles = Vec::new();
    let mut phases = Vec::new();
    let mut flight_starts = Vec::new();
    for c in recorded_cycles(health.life, deg.cycle_stride) {
        let f = gen_flight_with(class, rng);
        flight_starts.push(cycles.len());
        synthesize_flight(&f, health.health(c), deg, &mut cols, rng);
        cycles.extend(std::iter::repeat_n(c, f.len()));
        phases.extend_from_slice(&f.phases);
    }
    let values = cols.concat();
    let series = MultivariateSeries::new(unit_id, values, cycles, 1.0, Some(health.life))?;
    Ok(GeneratedUnit {
        series,
        phases,
        health,
        flight_starts,
    })
}

/// Deterministic per `(seed, unit_id)`.
pub fn gen_unit(class: &FlightClassSpec, deg: &DegradationSpec, unit_id: u32, seed: u64) -> Result<GeneratedUnit> {
    let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
    rng.set_stream(unit_id as u64);
    gen_unit_with(class, deg, unit_id, &mut rng)
}
