//! One forward/backward pass of every method's loss graph.
//!
//! Source and target windows go through the feature extractor as a single
//! batch (source rows first). Gradients from each head are collected into one
//! feature gradient and pushed through the extractor once.

use super::config::{PhaseClassifierData, SoftGating, TrainConfig};
use super::mmd::mk_mmd_with_grad;
use super::model::{Method, ModelBundle, DOMAIN_PHASE_CLASSES};
use crate::data::NUM_PHASES;
use crate::error::{Error, Result};
use crate::nn::loss::CLAMP;
use crate::nn::{bce, cross_entropy, rul_loss, BnMode, GradientReversal, Tensor};

/// Treatment of gradients flowing from the domain heads into the extractor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GrlMode {
    /// Training: multiplied by `−ρ`.
    Reversed { rho: f64 },
    /// Plain gradient of the summed loss, used for gradient checks.
    Plain,
}

/// One training step's inputs. `x` holds the source rows followed by the
/// target rows.
#[derive(Debug, Clone)]
pub struct StepBatch {
    pub x: Tensor,
    pub n_source: usize,
    pub rul: Vec<f64>,
    /// Phase index per row (source then target).
    pub phase: Vec<usize>,
}

impl StepBatch {
    pub fn n_target(&self) -> usize {
        self.x.dim(0) - self.n_source
    }

    fn domain_labels(&self) -> Vec<f64> {
        (0..self.x.dim(0))
            .map(|i| if i < self.n_source { 0.0 } else { 1.0 })
            .collect()
    }
}

/// Loss values of one step. `total` is the objective the parameters descend
/// (before gradient reversal).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepLosses {
    pub rul: f64,
    /// Per discriminator head; a single entry for DANN and the 6-class head.
    pub domain: Vec<f64>,
    pub phase: Option<f64>,
    pub mmd: Option<f64>,
    pub total: f64,
}

impl StepLosses {
    pub fn domain_sum(&self) -> f64 {
        self.domain.iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.total.is_finite() && self.rul.is_finite()
    }
}

fn add_rows(dst: &mut Tensor, offset: usize, src: &Tensor, scale: f64) {
    let w = src.dim(1);
    let d = &mut dst.data_mut()[offset * w..(offset + src.dim(0)) * w];
    for (a, &b) in d.iter_mut().zip(src.data()) {
        *a += scale * b;
    }
}

/// Gated BCE of one head: `Σ gᵢℓᵢ / Σ gᵢ`, zero when no gate is open.
/// Returns the loss, the gradient w.r.t. the head output and the per-sample
/// unweighted losses.
fn gated_bce(pred: &[f64], labels: &[f64], gate: &[f64]) -> Result<Option<(f64, Vec<f64>, f64)>> {
    let open: f64 = gate.iter().sum();
    if open <= 0.0 {
        return Ok(None);
    }
    let n = pred.len() as f64;
    let w: Vec<f64> = gate.iter().map(|g| g * n / open).collect();
    let (loss, grad) = bce(pred, labels, Some(&w))?;
    Ok(Some((loss, grad, open)))
}

fn per_sample_bce(pred: &[f64], labels: &[f64]) -> Vec<f64> {
    pred.iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(CLAMP, 1.0 - CLAMP);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .collect()
}

/// Runs the forward pass, and when `backward` is set accumulates parameter
/// gradients into `model`. Gradient buffers are not cleared here.
pub fn forward_backward(
    model: &mut ModelBundle,
    batch: &StepBatch,
    cfg: &TrainConfig,
    grl: GrlMode,
    backward: bool,
) -> Result<StepLosses> {
    let method = model.method;
    let n = batch.x.dim(0);
    let ns = batch.n_source;
    if ns == 0 || batch.rul.len() != ns || batch.phase.len() != n {
        return Err(Error::Shape(format!(
            "step batch: {n} rows, {ns} source, {} RUL labels, {} phase labels",
            batch.rul.len(),
            batch.phase.len()
        )));
    }
    if method.uses_target() && batch.n_target() == 0 {
        return Err(Error::Empty(format!("{method} needs a non-empty target batch")));
    }
    let (features, fe_cache) = model.feature_extractor.forward(&batch.x, BnMode::Train)?;
    let mut grad_f = Tensor::zeros([n, features.dim(1)]);
    let mut losses = StepLosses::default();

    // RUL regression on source rows.
    let src_idx: Vec<usize> = (0..ns).collect();
    let fs = if ns == n {
        features.clone()
    } else {
        features.select_rows(&src_idx)?
    };
    let reg = model.regressor.forward(&fs)?;
    let (l_rul, g_rul) = rul_loss(reg.output.data(), &batch.rul, cfg.rul_loss)?;
    losses.rul = l_rul;
    losses.total = l_rul;
    if backward {
        let g = Tensor::new([ns, 1], g_rul)?;
        let gin = model.regressor.backward(&reg, &g)?;
        add_rows(&mut grad_f, 0, &gin, 1.0);
    }

    let reverse = match grl {
        GrlMode::Reversed { rho } => Some(GradientReversal::new(rho)?),
        GrlMode::Plain => None,
    };
    let through_grl = |g: &Tensor| match &reverse {
        Some(r) => r.backward(g),
        None => g.clone(),
    };
    let gates = cfg.n_phases;
    let lambda_d = cfg.lambda_d;

    match method {
        Method::SourceOnly | Method::Adabn => {}
        Method::Dann => {
            let d = batch.domain_labels();
            let head = &mut model.discriminators[0];
            let cache = head.forward(&features)?;
            let (l, g) = bce(cache.output.data(), &d, None)?;
            losses.domain.push(l);
            losses.total += lambda_d * l;
            if backward {
                let g = Tensor::new([n, 1], g.iter().map(|v| lambda_d * v).collect())?;
                let gin = head.backward(&cache, &g)?;
                add_rows(&mut grad_f, 0, &through_grl(&gin), 1.0);
            }
        }
        Method::OpsDannHard | Method::OpsDannSoft => {
            let d = batch.domain_labels();
            // gate weights per head, n × gates row-major
            let mut gate = vec![0.0; n * gates];
            let mut cls = None;
            if method == Method::OpsDannSoft {
                let clf = model
                    .phase_classifier
                    .as_mut()
                    .ok_or_else(|| Error::Shape("missing phase classifier".into()))?;
                let cache = clf.forward(&features)?;
                let weights = match cfg.phase_classifier_data {
                    PhaseClassifierData::BothDomains => None,
                    PhaseClassifierData::SourceOnly => Some(
                        (0..n)
                            .map(|i| if i < ns { n as f64 / ns as f64 } else { 0.0 })
                            .collect::<Vec<_>>(),
                    ),
                };
                let (lz, gz) = cross_entropy(cache.output.data(), NUM_PHASES, &batch.phase, weights.as_deref())?;
                losses.phase = Some(lz);
                losses.total += cfg.lambda_z * lz;
                match cfg.soft_gating {
                    SoftGating::Oracle => {
                        for (i, &z) in batch.phase.iter().enumerate() {
                            gate[i * gates + z] = 1.0;
                        }
                    }
                    SoftGating::Detached | SoftGating::Coupled => gate.copy_from_slice(cache.output.data()),
                }
                let gz: Vec<f64> = gz.iter().map(|v| cfg.lambda_z * v).collect();
                cls = Some((cache, gz));
            } else {
                for (i, &z) in batch.phase.iter().enumerate() {
                    gate[i * gates + cfg.gate_index(z)] = 1.0;
                }
            }
            for h in 0..gates {
                let gh: Vec<f64> = (0..n).map(|i| gate[i * gates + h]).collect();
                let head = &mut model.discriminators[h];
                let cache = head.forward(&features)?;
                let Some((l, g, open)) = gated_bce(cache.output.data(), &d, &gh)? else {
                    losses.domain.push(0.0);
                    continue;
                };
                losses.domain.push(l);
                losses.total += lambda_d * l;
                if !backward {
                    continue;
                }
                let g = Tensor::new([n, 1], g.iter().map(|v| lambda_d * v).collect())?;
                let gin = head.backward(&cache, &g)?;
                add_rows(&mut grad_f, 0, &through_grl(&gin), 1.0);
                if cfg.soft_gating == SoftGating::Coupled {
                    if let Some((_, gz)) = cls.as_mut() {
                        // ∂(Σgℓ/Σg)/∂gᵢ = (ℓᵢ − L)/Σg
                        let per = per_sample_bce(cache.output.data(), &d);
                        for i in 0..n {
                            gz[i * gates + h] += lambda_d * (per[i] - l) / open;
                        }
                    }
                }
            }
            if backward {
                if let Some((cache, gz)) = cls {
                    let clf = model.phase_classifier.as_mut().expect("checked above");
                    let g = Tensor::new([n, NUM_PHASES], gz)?;
                    let gin = clf.backward(&cache, &g)?;
                    add_rows(&mut grad_f, 0, &gin, 1.0);
                }
            }
        }
        Method::MultiClassOpsDann => {
            let classes: Vec<usize> = (0..n).map(|i| domain_phase_class(i >= ns, batch.phase[i])).collect();
            let head = &mut model.discriminators[0];
            let cache = head.forward(&features)?;
            let (l, g) = cross_entropy(cache.output.data(), DOMAIN_PHASE_CLASSES, &classes, None)?;
            losses.domain.push(l);
            losses.total += lambda_d * l;
            if backward {
                let g = Tensor::new([n, DOMAIN_PHASE_CLASSES], g.iter().map(|v| lambda_d * v).collect())?;
                let gin = head.backward(&cache, &g)?;
                add_rows(&mut grad_f, 0, &through_grl(&gin), 1.0);
            }
        }
        Method::MkMmd => {
            let tgt_idx: Vec<usize> = (ns..n).collect();
            let ft = features.select_rows(&tgt_idx)?;
            let w = lambda_d * cfg.mmd.weight;
            let out = mk_mmd_with_grad(&fs, &ft, &cfg.mmd)?;
            losses.mmd = Some(out.value);
            losses.total += w * out.value;
            if backward {
                add_rows(&mut grad_f, 0, &out.grad_source, w);
                add_rows(&mut grad_f, ns, &out.grad_target, w);
            }
        }
    }

    if backward {
        model.feature_extractor.backward(&fe_cache, &grad_f)?;
    }
    Ok(losses)
}

/// Class index of a (domain, phase) pair for the 6-class head.
pub fn domain_phase_class(target: bool, phase: usize) -> usize {
    if target {
        NUM_PHASES + phase
    } else {
        phase
    }
}
