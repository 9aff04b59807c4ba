//! Multiphase flight profiles at 1 Hz.
//!
//! A flight is a climb, a cruise made of plateaus separated by step climbs or
//! step descents, and a final descent. Altitude is piecewise linear with
//! knots on whole seconds, so the generating segment of each one-second
//! interval is the ground-truth phase.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::PhaseLabel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlightClass {
    Short,
    Medium,
    Long,
}

impl FlightClass {
    pub const ALL: [FlightClass; 3] = [FlightClass::Short, FlightClass::Medium, FlightClass::Long];

    pub fn name(self) -> &'static str {
        match self {
            FlightClass::Short => "short",
            FlightClass::Medium => "medium",
            FlightClass::Long => "long",
        }
    }

    pub fn code(self) -> char {
        match self {
            FlightClass::Short => 'S',
            FlightClass::Medium => 'M',
            FlightClass::Long => 'L',
        }
    }

    pub fn spec(self) -> FlightClassSpec {
        FlightClassSpec::for_class(self)
    }
}

impl std::str::FromStr for FlightClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s" | "short" => Ok(FlightClass::Short),
            "m" | "medium" => Ok(FlightClass::Medium),
            "l" | "long" => Ok(FlightClass::Long),
            _ => Err(Error::InvalidArgument(format!("unknown flight class `{s}`"))),
        }
    }
}

/// Closed interval `[lo, hi]` sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.hi > self.lo {
            rng.random_range(self.lo..=self.hi)
        } else {
            self.lo
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.lo..=self.hi).contains(&x)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlightClassSpec {
    pub class: FlightClass,
    pub duration_h: Range,
    /// Altitude band of the cruise, including step changes.
    pub cruise_alt_ft: Range,
    pub cruise_mach: Range,
    pub climb_rate_ft_s: Range,
    pub descent_rate_ft_s: Range,
    pub step_rate_ft_s: Range,
    pub step_size_ft: Range,
    pub max_steps: usize,
    /// Standard deviation of altitude measurement noise.
    pub alt_noise_ft: f64,
}

impl FlightClassSpec {
    pub fn for_class(class: FlightClass) -> Self {
        let (duration, alt, mach, max_steps) = match class {
            FlightClass::Short => (
                Range::new(1.0, 3.0),
                Range::new(18_000.0, 26_000.0),
                Range::new(0.55, 0.68),
                1,
            ),
            FlightClass::Medium => (
                Range::new(3.0, 5.0),
                Range::new(26_000.0, 33_000.0),
                Range::new(0.68, 0.78),
                3,
            ),
            FlightClass::Long => (
                Range::new(5.0, 7.0),
                Range::new(33_000.0, 40_000.0),
                Range::new(0.78, 0.85),
                4,
            ),
        };
        FlightClassSpec {
            class,
            duration_h: duration,
            cruise_alt_ft: alt,
            cruise_mach: mach,
            climb_rate_ft_s: Range::new(25.0, 45.0),
            descent_rate_ft_s: Range::new(20.0, 35.0),
            step_rate_ft_s: Range::new(8.0, 20.0),
            step_size_ft: Range::new(1_500.0, 3_000.0),
            max_steps,
            alt_noise_ft: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("duration_h", self.duration_h),
            ("cruise_alt_ft", self.cruise_alt_ft),
            ("cruise_mach", self.cruise_mach),
            ("climb_rate_ft_s", self.climb_rate_ft_s),
            ("descent_rate_ft_s", self.descent_rate_ft_s),
            ("step_rate_ft_s", self.step_rate_ft_s),
            ("step_size_ft", self.step_size_ft),
        ];
        for (name, r) in ranges {
            if !(r.lo > 0.0 && r.hi >= r.lo) {
                return Err(Error::config(
                    name,
                    format!("range [{}, {}] must be positive and ordered", r.lo, r.hi),
                ));
            }
        }
        for (name, r) in [
            ("climb_rate_ft_s", self.climb_rate_ft_s),
            ("descent_rate_ft_s", self.descent_rate_ft_s),
            ("step_rate_ft_s", self.step_rate_ft_s),
        ] {
            // rates must clear the phase threshold by a wide margin
            if r.lo < 2.0 {
                return Err(Error::config(name, "rates below 2 ft/s are not recoverable as phases"));
            }
        }
        if !(self.alt_noise_ft >= 0.0) {
            return Err(Error::config("alt_noise_ft", "must be >= 0"));
        }
        Ok(())
    }
}

/// One flight at 1 Hz with its ground-truth phase per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FlightProfile {
    pub altitude: Vec<f64>,
    pub mach: Vec<f64>,
    /// Throttle resolver angle in degrees.
    pub tra: Vec<f64>,
    pub phases: Vec<PhaseLabel>,
}

impl FlightProfile {
    pub fn len(&self) -> usize {
        self.altitude.len()
    }

    pub fn is_empty(&self) -> bool {
        self.altitude.is_empty()
    }

    /// Fraction of samples whose ground-truth phase is `p`.
    pub fn phase_fraction(&self, p: PhaseLabel) -> f64 {
        self.phases.iter().filter(|&&q| q == p).count() as f64 / self.len() as f64
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    phase: PhaseLabel,
    secs: usize,
    /// Altitude at the end of the segment.
    to_alt: f64,
    tra: f64,
}

const GROUND_ALT_FT: f64 = 0.0;
const GROUND_MACH: f64 = 0.2;
const MIN_PLATEAU_S: usize = 300;
/// First-order lag of the throttle and Mach responses.
const LAG_S: f64 = 15.0;

fn ramp_secs(delta_ft: f64, rate: f64) -> usize {
    ((delta_ft.abs() / rate).round() as usize).max(1)
}

fn plan<R: Rng + ?Sized>(spec: &FlightClassSpec, rng: &mut R) -> Vec<Segment> {
    let total = (spec.duration_h.sample(rng) * 3600.0).round() as usize;
    let band = spec.cruise_alt_ft;
    // start in the lower part of the band to leave room for step climbs
    let start_alt = band.lo + (band.hi - band.lo) * rng.random_range(0.0..0.6);
    let climb = ramp_secs(start_alt - GROUND_ALT_FT, spec.climb_rate_ft_s.sample(rng));
    let climb_tra = rng.random_range(84.0..92.0);
    let descent_tra = rng.random_range(28.0..36.0);
    let cruise_tra = |alt: f64, rng: &mut R| 58.0 + 12.0 * alt / 40_000.0 + rng.random_range(-2.0..2.0);

    let mut segs = vec![Segment {
        phase: PhaseLabel::Ascending,
        secs: climb,
        to_alt: start_alt,
        tra: climb_tra,
    }];
    let mut alt = start_alt;
    let descent_rate = spec.descent_rate_ft_s.sample(rng);

    // Lay out steps first, then share the remaining cruise time among plateaus.
    let n_steps = rng.random_range(0..=spec.max_steps);
    let mut steps = Vec::with_capacity(n_steps);
    for _ in 0..n_steps {
        let size = spec.step_size_ft.sample(rng);
        let up_room = band.hi - alt >= size;
        let down_room = alt - band.lo >= size;
        let up = match (up_room, down_room) {
            (true, true) => rng.random_bool(0.7),
            (true, false) => true,
            (false, true) => false,
            (false, false) => continue,
        };
        let to = if up { alt + size } else { alt - size };
        let secs = ramp_secs(size, spec.step_rate_ft_s.sample(rng));
        steps.push((up, to, secs));
        alt = to;
    }
    let descent = ramp_secs(alt - GROUND_ALT_FT, descent_rate);
    let ramps: usize = climb + descent + steps.iter().map(|s| s.2).sum::<usize>();
    let plateaus = steps.len() + 1;
    let cruise_budget = total.saturating_sub(ramps).max(plateaus * MIN_PLATEAU_S);
    // random split with a floor per plateau
    let free = cruise_budget - plateaus * MIN_PLATEAU_S;
    let weights: Vec<f64> = (0..plateaus).map(|_| rng.random_range(0.5..1.5)).collect();
    let wsum: f64 = weights.iter().sum();
    let mut plateau_secs: Vec<usize> = weights
        .iter()
        .map(|w| MIN_PLATEAU_S + (free as f64 * w / wsum).floor() as usize)
        .collect();
    let assigned: usize = plateau_secs.iter().sum();
    plateau_secs[0] += cruise_budget - assigned;

    let mut alt = start_alt;
    for (k, secs) in plateau_secs.into_iter().enumerate() {
        segs.push(Segment {
            phase: PhaseLabel::Steady,
            secs,
            to_alt: alt,
            tra: cruise_tra(alt, rng),
        });
        if let Some(&(up, to, ssecs)) = steps.get(k) {
            segs.push(Segment {
                phase: if up {
                    PhaseLabel::Ascending
                } else {
                    PhaseLabel::Descending
                },
                secs: ssecs,
                to_alt: to,
                tra: if up {
                    cruise_tra(to, rng) + 10.0
                } else {
                    cruise_tra(to, rng) - 18.0
                },
            });
            alt = to;
        }
    }
    segs.push(Segment {
        phase: PhaseLabel::Descending,
        secs: descent,
        to_alt: GROUND_ALT_FT,
        tra: descent_tra,
    });
    segs
}

/// Generates one flight from `rng`.
pub fn gen_flight_with<R: Rng + ?Sized>(spec: &FlightClassSpec, rng: &mut R) -> FlightProfile {
    let segs = plan(spec, rng);
    let cruise_mach = spec.cruise_mach.sample(rng);
    let n: usize = segs.iter().map(|s| s.secs).sum::<usize>() + 1;
    let mut altitude = Vec::with_capacity(n);
    let mut phases = Vec::with_capacity(n);
    let mut tra_cmd = Vec::with_capacity(n);
    let mut alt = GROUND_ALT_FT;
    for s in &segs {
        let rate = (s.to_alt - alt) / s.secs as f64;
        for i in 0..s.secs {
            altitude.push(alt + rate * i as f64);
            phases.push(s.phase);
            tra_cmd.push(s.tra);
        }
        alt = s.to_alt;
    }
    altitude.push(alt);
    phases.push(*phases.last().expect("flight has segments"));
    tra_cmd.push(*tra_cmd.last().expect("flight has segments"));

    let top = altitude.iter().cloned().fold(f64::MIN, f64::max).max(1.0);
    let lag = 1.0 / LAG_S;
    let mut tra = Vec::with_capacity(n);
    let mut mach = Vec::with_capacity(n);
    let (mut t, mut m) = (tra_cmd[0], GROUND_MACH);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    for i in 0..n {
        t += lag * (tra_cmd[i] - t);
        let m_cmd = GROUND_MACH + (cruise_mach - GROUND_MACH) * (altitude[i] / top).clamp(0.0, 1.0);
        m += lag * (m_cmd - m);
        tra.push(t + 0.3 * noise.sample(rng));
        mach.push(m + 0.002 * noise.sample(rng));
    }
    if spec.alt_noise_ft > 0.0 {
        for a in &mut altitude {
            *a += spec.alt_noise_ft * noise.sample(rng);
        }
    }
    FlightProfile {
        altitude,
        mach,
        tra,
        phases,
    }
}

/// Generates one flight; identical seeds give identical profiles.
pub fn gen_flight(spec: &FlightClassSpec, seed: u64) -> FlightProfile {
    let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
    gen_flight_with(spec, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_ascending_ends_descending() {
        for class in FlightClass::ALL {
            for seed in 0..10 {
                let f = gen_flight(&class.spec(), seed);
                assert_eq!(f.phases[0], PhaseLabel::Ascending);
                assert_eq!(*f.phases.last().unwrap(), PhaseLabel::Descending);
            }
        }
    }

    #[test]
    fn durations_within_class_range() {
        for class in FlightClass::ALL {
            let spec = class.spec();
            for seed in 0..20 {
                let secs = gen_flight(&spec, seed).len() as f64 - 1.0;
                assert!(
                    secs >= spec.duration_h.lo * 3600.0 - 1.0 && secs <= spec.duration_h.hi * 3600.0 + 1.0,
                    "{class:?} seed {seed}: {secs} s"
                );
            }
        }
    }

    #[test]
    fn same_seed_same_profile() {
        let spec = FlightClass::Medium.spec();
        assert_eq!(gen_flight(&spec, 7), gen_flight(&spec, 7));
        assert_ne!(gen_flight(&spec, 7), gen_flight(&spec, 8));
    }

    #[test]
    fn cruise_stays_in_band() {
        let spec = FlightClass::Long.spec();
        for seed in 0..10 {
            let f = gen_flight(&spec, seed);
            for (a, p) in f.altitude.iter().zip(&f.phases) {
                if *p == PhaseLabel::Steady {
                    assert!(*a > spec.cruise_alt_ft.lo - 5.0 && *a < spec.cruise_alt_ft.hi + 5.0);
                }
            }
        }
    }

    #[test]
    fn long_flights_cruise_longer() {
        let mean = |c: FlightClass| -> f64 {
            (0..20)
                .map(|s| gen_flight(&c.spec(), s).phase_fraction(PhaseLabel::Steady))
                .sum::<f64>()
                / 20.0
        };
        assert!(mean(FlightClass::Long) > mean(FlightClass::Short));
    }
}
