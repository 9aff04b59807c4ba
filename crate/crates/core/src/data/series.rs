use crate::error::{Error, Result};

/// Channel names in storage order. `alt` is always channel 0; the first four
/// entries are scenario descriptors, the remaining fourteen engine sensors.
pub const CHANNELS: [&str; 18] = [
    "alt", "Mach", "TRA", "T2", "T24", "T30", "T48", "T50", "P15", "P2", "P21", "P24", "Ps30", "P40", "P50", "Nf",
    "Nc", "Wf",
];

pub const NUM_CHANNELS: usize = CHANNELS.len();
pub const ALTITUDE_CHANNEL: usize = 0;

/// Fault onset and end-of-life cycles of one unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LifeSpan {
    pub fault_onset_cycle: u32,
    pub eol_cycle: u32,
}

impl LifeSpan {
    pub fn new(fault_onset_cycle: u32, eol_cycle: u32) -> Result<Self> {
        if fault_onset_cycle >= eol_cycle {
            return Err(Error::InvalidArgument(format!(
                "fault onset {fault_onset_cycle} must precede EOL {eol_cycle}"
            )));
        }
        Ok(LifeSpan {
            fault_onset_cycle,
            eol_cycle,
        })
    }

    /// Cycles between fault onset and EOL.
    pub fn span(&self) -> u32 {
        self.eol_cycle - self.fault_onset_cycle
    }
}

/// One unit's recording: an 18 × N matrix stored channel-major, plus the
/// per-timestep flight-cycle index.
#[derive(Debug, Clone, PartialEq)]
pub struct MultivariateSeries {
    pub unit_id: u32,
    values: Vec<f64>,
    len: usize,
    pub sample_rate_hz: f64,
    pub cycles: Vec<u32>,
    pub life: Option<LifeSpan>,
}

impl MultivariateSeries {
    /// `values` is channel-major: channel `c` occupies `values[c*N..(c+1)*N]`.
    pub fn new(
        unit_id: u32,
        values: Vec<f64>,
        cycles: Vec<u32>,
        sample_rate_hz: f64,
        life: Option<LifeSpan>,
    ) -> Result<Self> {
        let len = cycles.len();
        if len == 0 {
            return Err(Error::Empty(format!("unit {unit_id} has no samples")));
        }
        if values.len() != NUM_CHANNELS * len {
            return Err(Error::Shape(format!(
                "unit {unit_id}: {} values for {NUM_CHANNELS} channels × {len} steps",
                values.len()
            )));
        }
        if !(sample_rate_hz > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sample rate {sample_rate_hz} must be > 0"
            )));
        }
        if cycles.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument(format!("unit {unit_id}: cycle index decreases")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("unit {unit_id} values")));
        }
        Ok(MultivariateSeries {
            unit_id,
            values,
            len,
            sample_rate_hz,
            cycles,
            life,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn num_channels(&self) -> usize {
        NUM_CHANNELS
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.values[c * self.len..(c + 1) * self.len]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.values[c * self.len..(c + 1) * self.len]
    }

    pub fn altitude(&self) -> &[f64] {
        self.channel(ALTITUDE_CHANNEL)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Keeps only the timesteps for which `keep` is true.
    pub fn filter_steps(&self, keep: &[bool]) -> Result<Self> {
        let idx: Vec<usize> = (0..self.len).filter(|&i| keep[i]).collect();
        self.select_steps(&idx)
    }

    pub fn select_steps(&self, idx: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(NUM_CHANNELS * idx.len());
        for c in 0..NUM_CHANNELS {
            let ch = self.channel(c);
            values.extend(idx.iter().map(|&i| ch[i]));
        }
        let cycles = idx.iter().map(|&i| self.cycles[i]).collect();
        MultivariateSeries::new(self.unit_id, values, cycles, self.sample_rate_hz, self.life)
    }
}
