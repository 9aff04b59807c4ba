//! Fixed-length training windows.
//!
//! A [`WindowSet`] keeps the preprocessed series and an index of window end
//! positions; window tensors are gathered on demand so overlapping windows
//! are never stored twice.

use std::path::Path;
use std::sync::Arc;

use super::phase::PhaseLabel;
use super::series::{LifeSpan, MultivariateSeries, NUM_CHANNELS};
use crate::error::{Error, Result};
use crate::nn::{container, Tensor};

pub const DEFAULT_WINDOW_LEN: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Source,
    Target,
}

impl Domain {
    /// Discriminator label: source 0, target 1.
    pub fn label(self) -> f64 {
        match self {
            Domain::Source => 0.0,
            Domain::Target => 1.0,
        }
    }
}

/// One materialised `18 × T` window.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub data: Tensor,
    pub domain: Domain,
    pub phase: PhaseLabel,
    pub rul_norm: Option<f64>,
    pub unit_id: u32,
    pub cycle: u32,
}

/// A preprocessed unit with per-timestep phase and (optionally) RUL labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSeries {
    pub series: MultivariateSeries,
    pub phases: Vec<PhaseLabel>,
    pub rul: Option<Vec<f64>>,
    pub domain: Domain,
}

impl LabeledSeries {
    pub fn new(
        series: MultivariateSeries,
        phases: Vec<PhaseLabel>,
        rul: Option<Vec<f64>>,
        domain: Domain,
    ) -> Result<Self> {
        let n = series.len();
        if phases.len() != n || rul.as_ref().is_some_and(|r| r.len() != n) {
            return Err(Error::Shape(format!(
                "unit {}: {n} steps, {} phase labels, {:?} RUL labels",
                series.unit_id,
                phases.len(),
                rul.as_ref().map(Vec::len)
            )));
        }
        Ok(LabeledSeries {
            series,
            phases,
            rul,
            domain,
        })
    }

    pub fn without_rul(&self) -> Self {
        LabeledSeries {
            rul: None,
            ..self.clone()
        }
    }
}

/// Number of windows of length `t` with the given stride.
pub fn window_count(n: usize, t: usize, stride: usize) -> usize {
    if n < t || stride == 0 {
        0
    } else {
        (n - t) / stride + 1
    }
}

fn check_window_args(n: usize, t: usize, stride: usize) -> Result<()> {
    if t == 0 || stride == 0 {
        return Err(Error::InvalidArgument(format!(
            "window length {t} and stride {stride} must be positive"
        )));
    }
    if n < t {
        return Err(Error::TooShort(format!("{n} steps, window length {t}")));
    }
    Ok(())
}

/// Materialises every window of `series`. Labels come from the last timestep.
pub fn make_windows(series: &LabeledSeries, t: usize, stride: usize) -> Result<Vec<Window>> {
    let set = WindowSet::new(vec![series.clone()], t, stride)?;
    (0..set.len()).map(|i| set.window(i)).collect()
}

/// Windows gathered into one `B × 18 × T` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub x: Tensor,
    pub phase: Vec<usize>,
    pub rul: Option<Vec<f64>>,
    pub domain: Domain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Slot {
    series: u32,
    end: u32,
}

/// Windows over a set of series from a single domain.
#[derive(Debug, Clone)]
pub struct WindowSet {
    series: Arc<[LabeledSeries]>,
    index: Vec<Slot>,
    window_len: usize,
    domain: Domain,
}

impl WindowSet {
    pub fn new(series: Vec<LabeledSeries>, window_len: usize, stride: usize) -> Result<Self> {
        let domain = series
            .first()
            .ok_or_else(|| Error::Empty("window set needs at least one series".into()))?
            .domain;
        let mut index = Vec::new();
        for (k, s) in series.iter().enumerate() {
            if s.domain != domain {
                return Err(Error::InvalidArgument(
                    "series from both domains in one window set".into(),
                ));
            }
            let n = s.series.len();
            check_window_args(n, window_len, stride)?;
            for w in 0..window_count(n, window_len, stride) {
                index.push(Slot {
                    series: k as u32,
                    end: (w * stride + window_len - 1) as u32,
                });
            }
        }
        Ok(WindowSet {
            series: series.into(),
            index,
            window_len,
            domain,
        })
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn series(&self) -> &[LabeledSeries] {
        &self.series
    }

    pub fn has_rul(&self) -> bool {
        self.series.iter().any(|s| s.rul.is_some())
    }

    /// Errors unless every series is free of RUL labels.
    pub fn ensure_unlabeled(&self) -> Result<()> {
        if self.has_rul() {
            Err(Error::TargetLabelsPresent)
        } else {
            Ok(())
        }
    }

    /// Copy with RUL labels removed.
    pub fn without_rul(&self) -> Self {
        WindowSet {
            series: self.series.iter().map(LabeledSeries::without_rul).collect(),
            ..self.clone()
        }
    }

    /// Windows `idx` of this set, sharing the underlying series.
    pub fn subset(&self, idx: &[usize]) -> Self {
        WindowSet {
            series: Arc::clone(&self.series),
            index: idx.iter().map(|&i| self.index[i]).collect(),
            window_len: self.window_len,
            domain: self.domain,
        }
    }

    /// Windows whose unit id satisfies `keep`.
    pub fn filter_units(&self, keep: impl Fn(u32) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(self.unit_id(i))).collect();
        self.subset(&idx)
    }

    fn slot(&self, i: usize) -> (&LabeledSeries, usize) {
        let s = self.index[i];
        (&self.series[s.series as usize], s.end as usize)
    }

    pub fn unit_id(&self, i: usize) -> u32 {
        self.slot(i).0.series.unit_id
    }

    pub fn phase(&self, i: usize) -> PhaseLabel {
        let (s, end) = self.slot(i);
        s.phases[end]
    }

    pub fn cycle(&self, i: usize) -> u32 {
        let (s, end) = self.slot(i);
        s.series.cycles[end]
    }

    pub fn rul(&self, i: usize) -> Option<f64> {
        let (s, end) = self.slot(i);
        s.rul.as_ref().map(|r| r[end])
    }

    pub fn phases(&self) -> Vec<PhaseLabel> {
        (0..self.len()).map(|i| self.phase(i)).collect()
    }

    /// RUL label of every window; `None` if any series is unlabeled.
    pub fn rul_labels(&self) -> Option<Vec<f64>> {
        (0..self.len()).map(|i| self.rul(i)).collect()
    }

    pub fn unit_ids(&self) -> Vec<u32> {
        (0..self.len()).map(|i| self.unit_id(i)).collect()
    }

    /// Copies window `i` into `out` (channel-major, `18 × T`).
    fn copy_window(&self, i: usize, out: &mut [f64]) {
        let (s, end) = self.slot(i);
        let t = self.window_len;
        let start = end + 1 - t;
        for c in 0..NUM_CHANNELS {
            out[c * t..(c + 1) * t].copy_from_slice(&s.series.channel(c)[start..=end]);
        }
    }

    pub fn window(&self, i: usize) -> Result<Window> {
        if i >= self.len() {
            return Err(Error::InvalidArgument(format!("window {i} of {}", self.len())));
        }
        let t = self.window_len;
        let mut data = vec![0.0; NUM_CHANNELS * t];
        self.copy_window(i, &mut data);
        Ok(Window {
            data: Tensor::new([NUM_CHANNELS, t], data)?,
            domain: self.domain,
            phase: self.phase(i),
            rul_norm: self.rul(i),
            unit_id: self.unit_id(i),
            cycle: self.cycle(i),
        })
    }

    pub fn gather(&self, idx: &[usize]) -> Result<Batch> {
        if idx.is_empty() {
            return Err(Error::Empty("batch".into()));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.len()) {
            return Err(Error::InvalidArgument(format!("window {bad} of {}", self.len())));
        }
        let stride = NUM_CHANNELS * self.window_len;
        let mut data = vec![0.0; idx.len() * stride];
        for (b, &i) in idx.iter().enumerate() {
            self.copy_window(i, &mut data[b * stride..(b + 1) * stride]);
        }
        let rul = if self.has_rul() {
            idx.iter().map(|&i| self.rul(i)).collect::<Option<Vec<_>>>()
        } else {
            None
        };
        Ok(Batch {
            x: Tensor::new([idx.len(), NUM_CHANNELS, self.window_len], data)?,
            phase: idx.iter().map(|&i| self.phase(i).index()).collect(),
            rul,
            domain: self.domain,
        })
    }

    /// Every window, in index order, in chunks of at most `batch` windows.
    pub fn chunks(&self, batch: usize) -> impl Iterator<Item = Result<Batch>> + '_ {
        let batch = batch.max(1);
        (0..self.len()).step_by(batch).map(move |lo| {
            let idx: Vec<usize> = (lo..(lo + batch).min(self.len())).collect();
            self.gather(&idx)
        })
    }

    /// Serialises the set (series, labels and window index) as named tensors.
    pub fn to_entries(&self) -> Result<Vec<(String, Tensor)>> {
        let mut e = Vec::new();
        e.push((
            "window_len".to_string(),
            Tensor::new([2], vec![self.window_len as f64, self.domain.label()])?,
        ));
        if !self.index.is_empty() {
            let idx: Vec<f64> = self
                .index
                .iter()
                .flat_map(|s| [s.series as f64, s.end as f64])
                .collect();
            e.push(("index".into(), Tensor::new([self.index.len(), 2], idx)?));
        }
        for (k, s) in self.series.iter().enumerate() {
            let n = s.series.len();
            let life = s.series.life;
            let meta = vec![
                s.series.unit_id as f64,
                s.series.sample_rate_hz,
                life.map_or(-1.0, |l| l.fault_onset_cycle as f64),
                life.map_or(-1.0, |l| l.eol_cycle as f64),
            ];
            e.push((format!("series/{k}/meta"), Tensor::new([4], meta)?));
            e.push((
                format!("series/{k}/values"),
                Tensor::new([NUM_CHANNELS, n], s.series.values().to_vec())?,
            ));
            e.push((
                format!("series/{k}/cycles"),
                Tensor::new([n], s.series.cycles.iter().map(|&c| c as f64).collect())?,
            ));
            e.push((
                format!("series/{k}/phase"),
                Tensor::new([n], s.phases.iter().map(|p| p.index() as f64).collect())?,
            ));
            if let Some(r) = &s.rul {
                e.push((format!("series/{k}/rul"), Tensor::new([n], r.clone())?));
            }
        }
        Ok(e)
    }

    pub fn from_entries(entries: &[(String, Tensor)]) -> Result<Self> {
        let bad = |m: &str| Error::Container(m.to_string());
        let head = container::find(entries, "window_len")?.data();
        if head.len() != 2 {
            return Err(bad("window_len entry must hold 2 values"));
        }
        let window_len = head[0] as usize;
        let domain = if head[1] == 0.0 { Domain::Source } else { Domain::Target };
        let mut series = Vec::new();
        for k in 0.. {
            let Ok(meta) = container::find(entries, &format!("series/{k}/meta")) else {
                break;
            };
            let m = meta.data();
            let values = container::find(entries, &format!("series/{k}/values"))?;
            let cycles: Vec<u32> = container::find(entries, &format!("series/{k}/cycles"))?
                .data()
                .iter()
                .map(|&c| c as u32)
                .collect();
            let phases = container::find(entries, &format!("series/{k}/phase"))?
                .data()
                .iter()
                .map(|&p| PhaseLabel::from_index(p as usize))
                .collect::<Result<Vec<_>>>()?;
            let rul = container::find(entries, &format!("series/{k}/rul"))
                .ok()
                .map(|t| t.data().to_vec());
            let life = if m[2] >= 0.0 {
                Some(LifeSpan::new(m[2] as u32, m[3] as u32)?)
            } else {
                None
            };
            let s = MultivariateSeries::new(m[0] as u32, values.data().to_vec(), cycles, m[1], life)?;
            series.push(LabeledSeries::new(s, phases, rul, domain)?);
        }
        let index = match container::find(entries, "index") {
            Ok(t) => t
                .data()
                .chunks_exact(2)
                .map(|p| Slot {
                    series: p[0] as u32,
                    end: p[1] as u32,
                })
                .collect(),
            Err(_) => Vec::new(),
        };
        for s in &index {
            let ok = series
                .get(s.series as usize)
                .is_some_and(|ls| (s.end as usize) < ls.series.len() && s.end as usize + 1 >= window_len);
            if !ok {
                return Err(bad("window index out of range"));
            }
        }
        Ok(WindowSet {
            series: series.into(),
            index,
            window_len,
            domain,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        container::save(path, &self.to_entries()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_entries(&container::load(path)?)
    }
}
