//! Anti-aliased downsampling with a zero-phase Chebyshev type-I low-pass.
//!
//! The filter is designed as second-order sections (analog prototype →
//! frequency scaling → bilinear transform) and applied forward and backward
//! with odd-symmetric edge extension and steady-state initial conditions.
//! Every section is normalised to unit DC gain so constant signals survive
//! decimation unchanged.

use nalgebra::Complex;

use super::series::{MultivariateSeries, NUM_CHANNELS};
use crate::error::{Error, Result};

pub const DEFAULT_FACTOR: usize = 10;
pub const DEFAULT_ORDER: usize = 8;
pub const DEFAULT_RIPPLE_DB: f64 = 0.05;

/// Biquad `b0 + b1 z⁻¹ + b2 z⁻²` over `1 + a1 z⁻¹ + a2 z⁻²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    pub fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Transposed direct-form-II state reached after a long unit step.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        let z2 = self.b[2] - self.a[1] * g;
        let z1 = g - self.b[0];
        [z1, z2]
    }

    /// Complex frequency response at normalised angular frequency `w` (rad/sample).
    pub fn response(&self, w: f64) -> Complex<f64> {
        let z1 = Complex::from_polar(1.0, -w);
        let z2 = z1 * z1;
        (self.b[0] + z1 * self.b[1] + z2 * self.b[2]) / (1.0 + z1 * self.a[0] + z2 * self.a[1])
    }
}

/// Chebyshev type-I low-pass with ripple band edge `cutoff` (fraction of
/// Nyquist, in `(0, 1)`) and even `order`.
pub fn cheby1_lowpass(order: usize, ripple_db: f64, cutoff: f64) -> Result<Vec<Biquad>> {
    if order == 0 || order % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "filter order {order} must be even and positive"
        )));
    }
    if !(cutoff > 0.0 && cutoff < 1.0) {
        return Err(Error::InvalidArgument(format!("cutoff {cutoff} must lie in (0, 1)")));
    }
    let eps = (10f64.powf(ripple_db / 10.0) - 1.0).sqrt();
    let mu = (1.0 / eps).asinh() / order as f64;
    // Pre-warped analog edge for a sampling rate of 2 (so Nyquist = 1).
    let fs2 = 4.0;
    let warped = fs2 * (std::f64::consts::PI * cutoff / 2.0).tan();
    let mut sections = Vec::with_capacity(order / 2);
    for k in 1..=order / 2 {
        let theta = std::f64::consts::PI * (2 * k - 1) as f64 / (2 * order) as f64;
        let p = Complex::new(-mu.sinh() * theta.sin(), mu.cosh() * theta.cos()) * warped;
        let zp = (fs2 + p) / (fs2 - p);
        let a1 = -2.0 * zp.re;
        let a2 = zp.norm_sqr();
        // Both zeros at z = -1; scale the numerator for unit DC gain.
        let g = (1.0 + a1 + a2) / 4.0;
        sections.push(Biquad {
            b: [g, 2.0 * g, g],
            a: [a1, a2],
        });
    }
    Ok(sections)
}

/// Magnitude response of a cascade at normalised frequency `f` (fraction of
/// Nyquist).
pub fn cascade_gain(sections: &[Biquad], f: f64) -> f64 {
    let w = std::f64::consts::PI * f;
    sections.iter().map(|s| s.response(w).norm()).product()
}

fn sosfilt(sections: &[Biquad], x: &mut [f64], init: &[[f64; 2]]) {
    for (s, z0) in sections.iter().zip(init) {
        let [mut z1, mut z2] = *z0;
        for v in x.iter_mut() {
            let xin = *v;
            let y = s.b[0] * xin + z1;
            z1 = s.b[1] * xin - s.a[0] * y + z2;
            z2 = s.b[2] * xin - s.a[1] * y;
            *v = y;
        }
    }
}

fn scaled_state(sections: &[Biquad], x0: f64) -> Vec<[f64; 2]> {
    let mut scale = x0;
    sections
        .iter()
        .map(|s| {
            let [a, b] = s.step_state();
            let st = [a * scale, b * scale];
            scale *= s.dc_gain();
            st
        })
        .collect()
}

/// Edge extension length used by [`filtfilt`].
pub fn pad_len(sections: &[Biquad]) -> usize {
    3 * (2 * sections.len() + 1)
}

/// Zero-phase forward-backward filtering.
pub fn filtfilt(sections: &[Biquad], x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    let pad = pad_len(sections);
    if n <= pad {
        return Err(Error::TooShort(format!("{n} samples, filtfilt needs more than {pad}")));
    }
    let mut ext = Vec::with_capacity(n + 2 * pad);
    for i in (1..=pad).rev() {
        ext.push(2.0 * x[0] - x[i]);
    }
    ext.extend_from_slice(x);
    for i in 1..=pad {
        ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
    }
    let init = scaled_state(sections, ext[0]);
    sosfilt(sections, &mut ext, &init);
    ext.reverse();
    let init = scaled_state(sections, ext[0]);
    sosfilt(sections, &mut ext, &init);
    ext.reverse();
    Ok(ext[pad..pad + n].to_vec())
}

/// Low-pass filters every channel and keeps every `factor`-th sample.
///
/// The filter is a Chebyshev type-I of the given `order` with 0.05 dB ripple
/// and its band edge at 0.8 × the post-decimation Nyquist frequency.
pub fn decimate(series: &MultivariateSeries, factor: usize, order: usize) -> Result<MultivariateSeries> {
    if factor < 2 {
        return Err(Error::InvalidArgument(format!(
            "decimation factor {factor} must be >= 2"
        )));
    }
    let n = series.len();
    if n <= order * factor {
        return Err(Error::TooShort(format!(
            "unit {}: {n} samples, decimation by {factor} with order {order} needs more than {}",
            series.unit_id,
            order * factor
        )));
    }
    let sections = cheby1_lowpass(order, DEFAULT_RIPPLE_DB, 0.8 / factor as f64)?;
    let keep: Vec<usize> = (0..n).step_by(factor).collect();
    let m = keep.len();
    let mut values = vec![0.0; NUM_CHANNELS * m];
    for c in 0..NUM_CHANNELS {
        let y = filtfilt(&sections, series.channel(c))?;
        for (j, &i) in keep.iter().enumerate() {
            values[c * m + j] = y[i];
        }
    }
    let cycles = keep.iter().map(|&i| series.cycles[i]).collect();
    MultivariateSeries::new(
        series.unit_id,
        values,
        cycles,
        series.sample_rate_hz / factor as f64,
        series.life,
    )
}

/// Subsamples a per-timestep sequence the way [`decimate`] does.
pub fn subsample<T: Clone>(x: &[T], factor: usize) -> Vec<T> {
    x.iter().step_by(factor).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Chebyshev polynomial of the first kind.
    fn cheb_t(n: usize, x: f64) -> f64 {
        if x.abs() <= 1.0 {
            (n as f64 * x.acos()).cos()
        } else {
            (n as f64 * x.abs().acosh()).cosh() * if x < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 }
        }
    }

    #[test]
    fn sections_match_closed_form_magnitude() {
        // |H|² = (1 + ε²) / (1 + ε² T_n²(Ω/Ω_c)) after DC normalisation (even n),
        // with Ω the bilinear-warped frequency.
        let (order, rp, wc) = (8, 0.05, 0.08);
        let sos = cheby1_lowpass(order, rp, wc).unwrap();
        let eps2 = 10f64.powf(rp / 10.0) - 1.0;
        for i in 1..200 {
            let f = i as f64 / 200.0;
            let omega = (std::f64::consts::PI * f / 2.0).tan() / (std::f64::consts::PI * wc / 2.0).tan();
            let t = cheb_t(order, omega);
            let expected = ((1.0 + eps2) / (1.0 + eps2 * t * t)).sqrt();
            let got = cascade_gain(&sos, f);
            assert!(
                (got - expected).abs() <= 1e-9 * expected.max(1e-12) + 1e-14,
                "f={f}: {got} vs {expected}"
            );
        }
        assert!((cascade_gain(&sos, 0.0) - 1.0).abs() < 1e-14);
    }

    fn series_from_channel(ch: &[f64]) -> MultivariateSeries {
        let n = ch.len();
        let mut values = Vec::with_capacity(18 * n);
        for _ in 0..18 {
            values.extend_from_slice(ch);
        }
        MultivariateSeries::new(1, values, vec![1; n], 1.0, None).unwrap()
    }

    #[test]
    fn constant_channel_survives() {
        let s = series_from_channel(&vec![3.7; 2000]);
        let d = decimate(&s, 10, 8).unwrap();
        assert_eq!(d.len(), 200);
        assert_eq!(d.sample_rate_hz, 0.1);
        for &v in d.channel(0) {
            assert!((v - 3.7).abs() < 1e-6);
        }
    }

    fn sine(freq: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|t| (2.0 * std::f64::consts::PI * freq * t as f64).sin())
            .collect()
    }

    #[test]
    fn slow_sine_keeps_amplitude() {
        let n = 20_000;
        let d = decimate(&series_from_channel(&sine(0.005, n)), 10, 8).unwrap();
        // compare against the analytic sine at the retained instants, away from the edges
        let m = d.len();
        let mut peak: f64 = 0.0;
        for j in m / 10..m - m / 10 {
            peak = peak.max(d.channel(0)[j].abs());
        }
        assert!((peak - 1.0).abs() < 0.02, "peak {peak}");
    }

    #[test]
    fn fast_sine_is_suppressed() {
        let n = 20_000;
        let d = decimate(&series_from_channel(&sine(0.45, n)), 10, 8).unwrap();
        let m = d.len();
        let peak = d.channel(0)[m / 10..m - m / 10]
            .iter()
            .fold(0.0f64, |a, &v| a.max(v.abs()));
        assert!(20.0 * peak.log10() <= -20.0, "peak {peak}");
    }

    #[test]
    fn short_series_rejected() {
        let s = series_from_channel(&vec![1.0; 80]);
        assert!(matches!(decimate(&s, 10, 8), Err(Error::TooShort(_))));
        assert!(decimate(&series_from_channel(&vec![1.0; 81]), 10, 8).is_ok());
    }
}
