//! Proxy A-distance from a held-out probe classifier.
//!
//! The probe is a fresh dense 50→30→1 sigmoid network trained on a balanced,
//! standardised 80/20 split of the pooled embeddings. The reported value is
//! the median over several probe seeds.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::median;
use crate::error::{Error, Result};
use crate::methods::Mlp;
use crate::nn::{bce, Activation, Parameterized, Sgd, Tensor};

/// Fewer samples per domain than this is an error.
pub const MIN_PER_DOMAIN: usize = 10;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub train_fraction: f64,
    /// Probe repetitions; the median PAD is reported.
    pub seeds: usize,
    /// Each domain is subsampled to at most this many embeddings.
    pub max_per_domain: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            hidden: 30,
            epochs: 200,
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 128,
            train_fraction: 0.8,
            seeds: 5,
            max_per_domain: 1000,
            seed: 0,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.epochs == 0 || self.seeds == 0 || self.batch_size == 0 {
            return Err(Error::config(
                "pad",
                "hidden, epochs, seeds and batch_size must be >= 1",
            ));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::config("pad.train_fraction", "must lie in (0, 1)"));
        }
        if self.max_per_domain < MIN_PER_DOMAIN {
            return Err(Error::config(
                "pad.max_per_domain",
                format!("must be >= {MIN_PER_DOMAIN}"),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeOutcome {
    /// Median over probe seeds.
    pub pad: f64,
    /// Held-out error of each probe.
    pub errors: Vec<f64>,
    pub pads: Vec<f64>,
}

/// `clamp(2(1 − 2ε), 0, 2)`.
pub fn pad_from_error(error: f64) -> f64 {
    (2.0 * (1.0 - 2.0 * error)).clamp(0.0, 2.0)
}

fn rows(x: &Tensor, idx: &[usize]) -> Vec<Vec<f64>> {
    let d = x.dim(1);
    idx.iter().map(|&i| x.data()[i * d..(i + 1) * d].to_vec()).collect()
}

/// One probe run: returns the held-out error rate.
fn probe_error(source: &[Vec<f64>], target: &[Vec<f64>], cfg: &ProbeConfig, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = source.len().min(target.len()).min(cfg.max_per_domain);
    let pick = |pool: &[Vec<f64>], rng: &mut ChaCha8Rng| {
        let mut idx: Vec<usize> = (0..pool.len()).collect();
        idx.shuffle(rng);
        idx.truncate(n);
        idx
    };
    let s_idx = pick(source, &mut rng);
    let t_idx = pick(target, &mut rng);
    // Stratified split: the same fraction of each domain goes to training.
    let n_train = ((n as f64 * cfg.train_fraction).round() as usize).clamp(1, n - 1);
    let mut train: Vec<(&[f64], f64)> = Vec::with_capacity(2 * n_train);
    let mut test: Vec<(&[f64], f64)> = Vec::with_capacity(2 * (n - n_train));
    for (k, &i) in s_idx.iter().enumerate() {
        let dst = if k < n_train { &mut train } else { &mut test };
        dst.push((&source[i], 0.0));
    }
    for (k, &i) in t_idx.iter().enumerate() {
        let dst = if k < n_train { &mut train } else { &mut test };
        dst.push((&target[i], 1.0));
    }

    let d = source[0].len();
    let mut mean = vec![0.0; d];
    let mut var = vec![0.0; d];
    for (row, _) in &train {
        for j in 0..d {
            mean[j] += row[j];
        }
    }
    mean.iter_mut().for_each(|m| *m /= train.len() as f64);
    for (row, _) in &train {
        for j in 0..d {
            var[j] += (row[j] - mean[j]).powi(2);
        }
    }
    let scale: Vec<f64> = var
        .iter()
        .map(|v| {
            let sd = (v / train.len() as f64).sqrt();
            if sd > 1e-12 {
                1.0 / sd
            } else {
                0.0
            }
        })
        .collect();
    let to_tensor = |set: &[(&[f64], f64)], idx: &[usize]| -> Result<(Tensor, Vec<f64>)> {
        let mut data = Vec::with_capacity(idx.len() * d);
        let mut y = Vec::with_capacity(idx.len());
        for &i in idx {
            let (row, label) = set[i];
            data.extend((0..d).map(|j| (row[j] - mean[j]) * scale[j]));
            y.push(label);
        }
        Ok((Tensor::new([idx.len(), d], data)?, y))
    };

    let mut probe = Mlp::xavier(&[d, cfg.hidden, 1], Activation::Sigmoid, &mut rng);
    let mut opt = Sgd::new(cfg.learning_rate, cfg.momentum)?;
    let mut order: Vec<usize> = (0..train.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let (x, y) = to_tensor(&train, chunk)?;
            probe.zero_grad();
            let cache = probe.forward(&x)?;
            let (_, g) = bce(cache.output.data(), &y, None)?;
            probe.backward(&cache, &Tensor::new([chunk.len(), 1], g)?)?;
            opt.step(&mut probe.params_mut())?;
        }
    }
    let all: Vec<usize> = (0..test.len()).collect();
    let (x, y) = to_tensor(&test, &all)?;
    let p = probe.predict(&x)?;
    let wrong = p
        .data()
        .iter()
        .zip(&y)
        .filter(|(&p, &y)| (p >= 0.5) != (y >= 0.5))
        .count();
    Ok(wrong as f64 / test.len() as f64)
}

/// Proxy A-distance between two embedding sets (`n × d` each).
pub fn proxy_a_distance(source: &Tensor, target: &Tensor, cfg: &ProbeConfig) -> Result<ProbeOutcome> {
    cfg.validate()?;
    if source.ndim() != 2 || target.ndim() != 2 || source.dim(1) != target.dim(1) {
        return Err(Error::Shape(format!(
            "embeddings {:?} and {:?} must be n × d with equal d",
            source.shape(),
            target.shape()
        )));
    }
    if source.dim(0) < MIN_PER_DOMAIN || target.dim(0) < MIN_PER_DOMAIN {
        return Err(Error::Empty(format!(
            "PAD needs at least {MIN_PER_DOMAIN} embeddings per domain, got {} and {}",
            source.dim(0),
            target.dim(0)
        )));
    }
    if source.data().iter().chain(target.data()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("embeddings".into()));
    }
    let s = rows(source, &(0..source.dim(0)).collect::<Vec<_>>());
    let t = rows(target, &(0..target.dim(0)).collect::<Vec<_>>());
    let mut errors = Vec::with_capacity(cfg.seeds);
    for k in 0..cfg.seeds {
        errors.push(probe_error(&s, &t, cfg, cfg.seed.wrapping_add(k as u64))?);
    }
    let pads: Vec<f64> = errors.iter().map(|&e| pad_from_error(e)).collect();
    Ok(ProbeOutcome {
        pad: median(&pads).expect("at least one probe"),
        errors,
        pads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn blob(n: usize, offset: f64, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_fn([n, 50], |_| offset + rng.sample::<f64, _>(StandardNormal))
    }

    #[test]
    fn formula_endpoints() {
        assert_eq!(pad_from_error(0.5), 0.0);
        assert_eq!(pad_from_error(0.0), 2.0);
        assert_eq!(pad_from_error(0.25), 1.0);
        assert_eq!(pad_from_error(0.7), 0.0);
    }

    #[test]
    fn separated_blobs_give_large_pad() {
        let cfg = ProbeConfig {
            max_per_domain: 300,
            ..ProbeConfig::default()
        };
        let out = proxy_a_distance(&blob(300, 0.0, 1), &blob(300, 3.0, 2), &cfg).unwrap();
        assert!(out.pad > 1.8, "{out:?}");
    }

    #[test]
    fn identical_distributions_give_small_pad() {
        let cfg = ProbeConfig {
            max_per_domain: 300,
            ..ProbeConfig::default()
        };
        let out = proxy_a_distance(&blob(300, 0.0, 1), &blob(300, 0.0, 2), &cfg).unwrap();
        assert!(out.pad < 0.2, "{out:?}");
        assert!(out.pads.iter().all(|p| (0.0..=2.0).contains(p)));
    }

    #[test]
    fn too_few_samples_rejected() {
        let err = proxy_a_distance(&blob(9, 0.0, 1), &blob(50, 0.0, 2), &ProbeConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Empty(_)));
    }
}
