//! Training loop shared by all methods, AdaBN adaptation and inference.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use super::model::{build_model_with, Method, ModelBundle};
use super::step::{forward_backward, GrlMode, StepBatch, StepLosses};
use crate::data::WindowSet;
use crate::error::{Error, Result};
use crate::nn::{BatchNorm1d, BnMode, Parameterized, ScheduleState, Sgd, Tensor};

/// RNG streams derived from the run seed.
const SOURCE_STREAM: u64 = 1;
const TARGET_STREAM: u64 = 2;

/// Per-epoch means of the step losses.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochTrace {
    pub epoch: usize,
    pub steps: usize,
    pub learning_rate: f64,
    /// ρ used by the epoch's last step.
    pub rho: f64,
    pub rul: f64,
    pub domain: f64,
    pub phase: f64,
    pub mmd: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ModelBundle,
    pub trace: Vec<EpochTrace>,
    /// Losses of every step, in order.
    pub steps: Vec<StepLosses>,
}

/// Windows of one domain drawn in shuffled order; reshuffles when exhausted.
struct Sampler {
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl Sampler {
    fn new(n: usize, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Sampler {
            order: (0..n).collect(),
            pos: n,
            rng,
        }
    }

    fn reshuffle(&mut self) {
        self.order.shuffle(&mut self.rng);
        self.pos = 0;
    }

    fn take(&mut self, k: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            if self.pos == self.order.len() {
                self.reshuffle();
            }
            let m = (k - out.len()).min(self.order.len() - self.pos);
            out.extend_from_slice(&self.order[self.pos..self.pos + m]);
            self.pos += m;
        }
        out
    }
}

/// Source batches per epoch; a trailing batch of one window is dropped.
pub fn steps_per_epoch(n_source: usize, batch_size: usize) -> usize {
    let full = n_source / batch_size;
    if n_source % batch_size >= 2 {
        full + 1
    } else {
        full.max(1)
    }
}

fn check_inputs(source: &WindowSet, target: Option<&WindowSet>, cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    if source.is_empty() {
        return Err(Error::Empty("source windows".into()));
    }
    if source.rul_labels().is_none() {
        return Err(Error::InvalidArgument("source windows need RUL labels".into()));
    }
    if source.len() < 2 {
        return Err(Error::Empty("need at least two source windows".into()));
    }
    if let Some(t) = target {
        t.ensure_unlabeled()?;
    }
    if cfg.method.uses_target() && target.is_none_or(WindowSet::is_empty) {
        return Err(Error::Empty(format!("{} needs target windows", cfg.method)));
    }
    Ok(())
}

/// Trains `cfg.method` from a fresh model. Target windows must carry no RUL
/// labels.
pub fn train(source: &WindowSet, target: Option<&WindowSet>, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let model = build_model_with(cfg.method, cfg.n_phases, cfg.seed);
    train_from(model, source, target, cfg)
}

/// Trains an existing model (its method must match `cfg.method`).
pub fn train_from(
    mut model: ModelBundle,
    source: &WindowSet,
    target: Option<&WindowSet>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    check_inputs(source, target, cfg)?;
    if model.method != cfg.method {
        return Err(Error::InvalidArgument(format!(
            "model built for {}, config says {}",
            model.method, cfg.method
        )));
    }
    let spe = steps_per_epoch(source.len(), cfg.batch_size);
    let mut sched = ScheduleState::new(spe * cfg.epochs, cfg.alpha0)?;
    let mut opt = Sgd::new(cfg.alpha0, cfg.momentum)?;
    let mut src = Sampler::new(source.len(), cfg.seed, SOURCE_STREAM);
    let mut tgt = target.map(|t| Sampler::new(t.len(), cfg.seed, TARGET_STREAM));
    let target = target.filter(|_| cfg.method.uses_target());
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut all_steps = Vec::with_capacity(spe * cfg.epochs);

    for epoch in 0..cfg.epochs {
        let lr = sched.learning_rate();
        opt.set_learning_rate(lr);
        src.reshuffle();
        let mut acc = EpochTrace {
            epoch,
            steps: 0,
            learning_rate: lr,
            rho: 0.0,
            rul: 0.0,
            domain: 0.0,
            phase: 0.0,
            mmd: 0.0,
            total: 0.0,
        };
        for step in 0..spe {
            let remaining = source.len() - src.pos;
            let k = cfg.batch_size.min(remaining);
            let sidx = src.take(k);
            let sb = source.gather(&sidx)?;
            let rho = cfg.rho.unwrap_or_else(|| sched.rho());
            let batch = match (target, tgt.as_mut()) {
                (Some(t), Some(ts)) => {
                    let tidx = ts.take(k);
                    let tb = t.gather(&tidx)?;
                    let mut phase = sb.phase.clone();
                    phase.extend_from_slice(&tb.phase);
                    StepBatch {
                        x: Tensor::concat_rows(&[&sb.x, &tb.x])?,
                        n_source: k,
                        rul: sb.rul.expect("source labels checked"),
                        phase,
                    }
                }
                _ => StepBatch {
                    x: sb.x,
                    n_source: k,
                    rul: sb.rul.expect("source labels checked"),
                    phase: sb.phase,
                },
            };
            model.zero_grad();
            let losses = forward_backward(&mut model, &batch, cfg, GrlMode::Reversed { rho }, true)?;
            if !losses.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    step,
                    message: format!("loss {:?}", losses),
                });
            }
            opt.step(&mut model.params_mut()).map_err(|e| Error::Diverged {
                epoch,
                step,
                message: e.to_string(),
            })?;
            sched.advance();
            acc.steps += 1;
            acc.rho = rho;
            acc.rul += losses.rul;
            acc.domain += losses.domain_sum();
            acc.phase += losses.phase.unwrap_or(0.0);
            acc.mmd += losses.mmd.unwrap_or(0.0);
            acc.total += losses.total;
            all_steps.push(losses);
        }
        let s = acc.steps as f64;
        for v in [
            &mut acc.rul,
            &mut acc.domain,
            &mut acc.phase,
            &mut acc.mmd,
            &mut acc.total,
        ] {
            *v /= s;
        }
        trace.push(acc);
    }
    model.check_finite().map_err(|e| Error::Diverged {
        epoch: cfg.epochs,
        step: 0,
        message: e.to_string(),
    })?;
    Ok(TrainOutcome {
        model,
        trace,
        steps: all_steps,
    })
}

/// Full training for a method, including AdaBN's target-statistics pass.
pub fn train_method(source: &WindowSet, target: &WindowSet, cfg: &TrainConfig) -> Result<TrainOutcome> {
    target.ensure_unlabeled()?;
    let mut out = train(source, Some(target), cfg)?;
    if cfg.method == Method::Adabn {
        adapt_batch_norm(&mut out.model, target, cfg.batch_size)?;
    }
    Ok(out)
}

pub fn train_source_only(source: &WindowSet, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let cfg = TrainConfig {
        method: Method::SourceOnly,
        ..cfg.clone()
    };
    train(source, None, &cfg)
}

/// Running `(count, mean, M2)` per channel, merged chunk by chunk.
#[derive(Debug, Clone)]
struct Moments {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(ch: usize) -> Self {
        Moments {
            n: 0.0,
            mean: vec![0.0; ch],
            m2: vec![0.0; ch],
        }
    }

    fn merge_chunk(&mut self, x: &Tensor) {
        let (b, ch, len) = (x.dim(0), x.dim(1), x.dim(2));
        let (mean, var) = BatchNorm1d::channel_stats(x);
        let nb = (b * len) as f64;
        let n = self.n + nb;
        for c in 0..ch {
            let delta = mean[c] - self.mean[c];
            self.mean[c] += delta * nb / n;
            self.m2[c] += var[c] * nb + delta * delta * self.n * nb / n;
        }
        self.n = n;
    }

    fn variance(&self) -> Vec<f64> {
        self.m2.iter().map(|m| m / self.n).collect()
    }
}

/// Replaces every batch-norm layer's running statistics with the exact
/// population mean and variance of its input over all `target` windows,
/// layer by layer. No weight changes.
pub fn adapt_batch_norm(model: &mut ModelBundle, target: &WindowSet, chunk: usize) -> Result<()> {
    if model.feature_extractor.bns.is_none() {
        return Err(Error::InvalidArgument(format!(
            "{} has no batch-norm layers",
            model.method
        )));
    }
    if target.is_empty() {
        return Err(Error::Empty("target windows".into()));
    }
    for layer in 0..3 {
        let mut m = Moments::new(model.feature_extractor.convs[layer].out_channels());
        for b in target.chunks(chunk) {
            let mut h = b?.x;
            for i in 0..=layer {
                let z = model.feature_extractor.convs[i].forward(&h)?;
                if i == layer {
                    m.merge_chunk(&z);
                    break;
                }
                let bn = &mut model.feature_extractor.bns.as_mut().expect("checked")[i];
                let (y, _) = bn.forward(&z, BnMode::Eval)?;
                h = crate::nn::Activation::Relu.forward(&y);
            }
        }
        let bn = &mut model.feature_extractor.bns.as_mut().expect("checked")[layer];
        bn.running_mean = m.mean.clone();
        bn.running_var = m.variance();
    }
    Ok(())
}

/// Normalised RUL predictions in `(0, 1)` for every window.
pub fn predict_rul(model: &mut ModelBundle, windows: &WindowSet, chunk: usize) -> Result<Vec<f64>> {
    model.check_finite()?;
    let mut out = Vec::with_capacity(windows.len());
    for b in windows.chunks(chunk) {
        out.extend(model.predict(&b?.x)?);
    }
    Ok(out)
}

/// Predictions converted to cycles with each unit's onset-to-EOL span.
pub fn denormalize(pred: &[f64], windows: &WindowSet) -> Vec<Option<f64>> {
    let spans: Vec<Option<f64>> = windows
        .series()
        .iter()
        .map(|s| s.series.life.map(|l| l.span() as f64))
        .collect();
    let units = windows.unit_ids();
    pred.iter()
        .zip(units)
        .map(|(&p, u)| {
            let k = windows.series().iter().position(|s| s.series.unit_id == u)?;
            spans[k].map(|s| p * s)
        })
        .collect()
}

/// Feature-extractor outputs (`n × 50`) for every window.
pub fn embed(model: &mut ModelBundle, windows: &WindowSet, chunk: usize) -> Result<Tensor> {
    model.check_finite()?;
    let parts = windows
        .chunks(chunk)
        .map(|b| model.feature_extractor.embed(&b?.x))
        .collect::<Result<Vec<_>>>()?;
    Tensor::concat_rows(&parts.iter().collect::<Vec<_>>())
}

pub const TRACE_HEADER: &str = "epoch,steps,learning_rate,rho,loss_rul,loss_domain,loss_phase,loss_mmd,loss_total";

/// Writes the per-epoch trace as CSV.
pub fn write_trace(path: &Path, trace: &[EpochTrace]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    let io = |e| Error::io(path, e);
    writeln!(f, "{TRACE_HEADER}").map_err(io)?;
    for t in trace {
        writeln!(
            f,
            "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            t.epoch, t.steps, t.learning_rate, t.rho, t.rul, t.domain, t.phase, t.mmd, t.total
        )
        .map_err(io)?;
    }
    f.flush().map_err(io)
}
