//! Flight-phase segmentation from the altitude derivative.

use super::series::MultivariateSeries;
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD_FT_S: f64 = 0.5;
pub const DEFAULT_MEDIAN_LEN: usize = 51;
pub const NUM_PHASES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum PhaseLabel {
    Ascending = 0,
    Steady = 1,
    Descending = 2,
}

impl PhaseLabel {
    pub const ALL: [PhaseLabel; NUM_PHASES] = [PhaseLabel::Ascending, PhaseLabel::Steady, PhaseLabel::Descending];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("phase index {i} out of range")))
    }

    pub fn name(self) -> &'static str {
        match self {
            PhaseLabel::Ascending => "ascending",
            PhaseLabel::Steady => "steady",
            PhaseLabel::Descending => "descending",
        }
    }
}

/// Threshold classification of `(alt[i+1] − alt[i]) / Δt` before smoothing.
/// The final sample repeats its predecessor's label.
pub fn raw_phase_labels(altitude: &[f64], dt: f64, threshold: f64) -> Vec<PhaseLabel> {
    let n = altitude.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n.saturating_sub(1) {
        let rate = (altitude[i + 1] - altitude[i]) / dt;
        out.push(if rate >= threshold {
            PhaseLabel::Ascending
        } else if rate <= -threshold {
            PhaseLabel::Descending
        } else {
            PhaseLabel::Steady
        });
    }
    if n > 0 {
        out.push(out.last().copied().unwrap_or(PhaseLabel::Steady));
    }
    out
}

/// Running median of odd length `len` with edge replication.
pub fn median_filter(labels: &[PhaseLabel], len: usize) -> Result<Vec<PhaseLabel>> {
    if len % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "median filter length {len} must be odd"
        )));
    }
    let n = labels.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let half = len / 2;
    let at = |i: isize| labels[i.clamp(0, n as isize - 1) as usize].index();
    let mut counts = [0usize; NUM_PHASES];
    for k in -(half as isize)..=half as isize {
        counts[at(k)] += 1;
    }
    let median = |c: &[usize; NUM_PHASES]| {
        let mut acc = 0;
        for (p, &k) in c.iter().enumerate() {
            acc += k;
            if acc > half {
                return PhaseLabel::ALL[p];
            }
        }
        unreachable!("window of {len} labels")
    };
    let mut out = Vec::with_capacity(n);
    out.push(median(&counts));
    for i in 1..n as isize {
        counts[at(i - 1 - half as isize)] -= 1;
        counts[at(i + half as isize)] += 1;
        out.push(median(&counts));
    }
    Ok(out)
}

/// Labels every timestep of `series` as ascending, steady or descending.
pub fn label_phases(series: &MultivariateSeries, threshold: f64, median_len: usize) -> Result<Vec<PhaseLabel>> {
    if median_len % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "median filter length {median_len} must be odd"
        )));
    }
    let raw = raw_phase_labels(series.altitude(), 1.0 / series.sample_rate_hz, threshold);
    median_filter(&raw, median_len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn with_altitude(alt: Vec<f64>, rate: f64) -> MultivariateSeries {
        let n = alt.len();
        let mut values = alt;
        values.extend(std::iter::repeat_n(0.0, 17 * n));
        MultivariateSeries::new(1, values, vec![1; n], rate, None).unwrap()
    }

    fn ramp(slope: f64, n: usize) -> MultivariateSeries {
        with_altitude((0..n).map(|t| 1000.0 + slope * t as f64).collect(), 1.0)
    }

    #[test]
    fn constant_altitude_is_steady() {
        let l = label_phases(&ramp(0.0, 300), 0.5, 51).unwrap();
        assert!(l.iter().all(|&p| p == PhaseLabel::Steady));
    }

    #[test]
    fn ramps_follow_inclusive_threshold() {
        let cases = [
            (1.0, PhaseLabel::Ascending),
            (-1.0, PhaseLabel::Descending),
            (0.4, PhaseLabel::Steady),
            (-0.4, PhaseLabel::Steady),
            (0.5, PhaseLabel::Ascending),
            (-0.5, PhaseLabel::Descending),
        ];
        for (slope, want) in cases {
            let l = label_phases(&ramp(slope, 200), 0.5, 51).unwrap();
            assert!(l.iter().all(|&p| p == want), "slope {slope}");
        }
    }

    #[test]
    fn derivative_uses_sample_interval() {
        // 2 ft per sample at 0.5 Hz is 1 ft/s
        let s = with_altitude((0..100).map(|t| 2.0 * t as f64).collect(), 0.5);
        assert!(label_phases(&s, 0.5, 5)
            .unwrap()
            .iter()
            .all(|&p| p == PhaseLabel::Ascending));
        let s = with_altitude((0..100).map(|t| 0.8 * t as f64).collect(), 0.5);
        assert!(label_phases(&s, 0.5, 5)
            .unwrap()
            .iter()
            .all(|&p| p == PhaseLabel::Steady));
    }

    #[test]
    fn even_median_rejected() {
        assert!(label_phases(&ramp(1.0, 10), 0.5, 50).is_err());
    }

    #[test]
    fn median_removes_isolated_spikes() {
        let mut raw = vec![PhaseLabel::Steady; 101];
        raw[50] = PhaseLabel::Ascending;
        raw[51] = PhaseLabel::Descending;
        let f = median_filter(&raw, 5).unwrap();
        assert!(f.iter().all(|&p| p == PhaseLabel::Steady));
    }

    fn brute_median(labels: &[PhaseLabel], len: usize) -> Vec<PhaseLabel> {
        let n = labels.len() as isize;
        let h = (len / 2) as isize;
        (0..n)
            .map(|i| {
                let mut w: Vec<PhaseLabel> = (i - h..=i + h).map(|j| labels[j.clamp(0, n - 1) as usize]).collect();
                w.sort();
                w[len / 2]
            })
            .collect()
    }

    proptest! {
        #[test]
        fn running_median_matches_sorting(raw in proptest::collection::vec(0usize..3, 1..120), half in 0usize..8) {
            let labels: Vec<PhaseLabel> = raw.iter().map(|&i| PhaseLabel::ALL[i]).collect();
            let len = 2 * half + 1;
            prop_assert_eq!(median_filter(&labels, len).unwrap(), brute_median(&labels, len));
        }

        #[test]
        fn labelling_is_deterministic(alt in proptest::collection::vec(0.0f64..40_000.0, 2..200)) {
            let s = with_altitude(alt, 1.0);
            prop_assert_eq!(label_phases(&s, 0.5, 51).unwrap(), label_phases(&s, 0.5, 51).unwrap());
        }
    }
}
