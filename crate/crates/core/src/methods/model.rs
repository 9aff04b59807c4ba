//! Network assembly for every method.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{NUM_CHANNELS, NUM_PHASES};
use crate::error::{Error, Result};
use crate::nn::{container, Activation, BatchNorm1d, BnCache, BnMode, Conv1d, Dense, Parameterized, Tensor};

pub const KERNEL: usize = 10;
pub const CONV_CHANNELS: [usize; 4] = [NUM_CHANNELS, 10, 10, 1];
pub const FEATURE_DIM: usize = 50;
pub const DOMAIN_PHASE_CLASSES: usize = 2 * NUM_PHASES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    SourceOnly,
    Dann,
    OpsDannHard,
    OpsDannSoft,
    MultiClassOpsDann,
    MkMmd,
    Adabn,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::SourceOnly,
        Method::Dann,
        Method::OpsDannHard,
        Method::OpsDannSoft,
        Method::MultiClassOpsDann,
        Method::MkMmd,
        Method::Adabn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::SourceOnly => "source-only",
            Method::Dann => "dann",
            Method::OpsDannHard => "ops-dann-hard",
            Method::OpsDannSoft => "ops-dann-soft",
            Method::MultiClassOpsDann => "multi-class-ops-dann",
            Method::MkMmd => "mk-mmd",
            Method::Adabn => "adabn",
        }
    }

    /// Whether training consumes target windows.
    pub fn uses_target(self) -> bool {
        !matches!(self, Method::SourceOnly | Method::Adabn)
    }

    pub fn is_adversarial(self) -> bool {
        matches!(
            self,
            Method::Dann | Method::OpsDannHard | Method::OpsDannSoft | Method::MultiClassOpsDann
        )
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let k = s.to_ascii_lowercase().replace('_', "-");
        let m = match k.as_str() {
            "source-only" | "baseline" => Method::SourceOnly,
            "dann" => Method::Dann,
            "ops-dann-hard" | "ops-hard" => Method::OpsDannHard,
            "ops-dann-soft" | "ops-soft" => Method::OpsDannSoft,
            "multi-class-ops-dann" | "multi-class" | "multiclass" => Method::MultiClassOpsDann,
            "mk-mmd" | "mkmmd" | "mmd" => Method::MkMmd,
            "adabn" => Method::Adabn,
            _ => return Err(Error::InvalidArgument(format!("unknown method `{s}`"))),
        };
        Ok(m)
    }
}

/// Forward-pass intermediates of the feature extractor.
#[derive(Debug, Clone)]
pub struct FeCache {
    /// Input of each conv layer.
    inputs: Vec<Tensor>,
    /// Pre-activation of each layer (after batch norm when present).
    pre: Vec<Tensor>,
    bn: Vec<BnCache>,
}

/// Three same-padded conv layers with ReLU, optionally batch-normalised
/// before each ReLU. Maps `B × 18 × 50` windows to `B × 50` features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureExtractor {
    pub convs: Vec<Conv1d>,
    pub bns: Option<Vec<BatchNorm1d>>,
}

impl FeatureExtractor {
    pub fn xavier(batch_norm: bool, rng: &mut ChaCha8Rng) -> Self {
        let convs = (0..3)
            .map(|i| Conv1d::xavier(CONV_CHANNELS[i], CONV_CHANNELS[i + 1], KERNEL, rng))
            .collect();
        let bns = batch_norm.then(|| (1..4).map(|i| BatchNorm1d::new(CONV_CHANNELS[i])).collect());
        FeatureExtractor { convs, bns }
    }

    pub fn forward(&mut self, x: &Tensor, mode: BnMode) -> Result<(Tensor, FeCache)> {
        let batch = x.dim(0);
        let mut cache = FeCache {
            inputs: Vec::with_capacity(3),
            pre: Vec::with_capacity(3),
            bn: Vec::new(),
        };
        let mut h = x.clone();
        for i in 0..3 {
            let mut z = self.convs[i].forward(&h)?;
            if let Some(bns) = self.bns.as_mut() {
                let (y, c) = bns[i].forward(&z, mode)?;
                z = y;
                cache.bn.push(c);
            }
            let a = Activation::Relu.forward(&z);
            cache.inputs.push(h);
            cache.pre.push(z);
            h = a;
        }
        let len = h.dim(2);
        Ok((h.reshape([batch, len])?, cache))
    }

    /// Inference without caches.
    pub fn embed(&mut self, x: &Tensor) -> Result<Tensor> {
        Ok(self.forward(x, BnMode::Eval)?.0)
    }

    pub fn backward(&mut self, cache: &FeCache, grad: &Tensor) -> Result<()> {
        let batch = grad.dim(0);
        let mut g = grad.clone().reshape([batch, 1, grad.dim(1)])?;
        for i in (0..3).rev() {
            let z = &cache.pre[i];
            g = Activation::Relu.backward(z, z, &g);
            if let Some(bns) = self.bns.as_mut() {
                g = bns[i].backward(&cache.bn[i], &g)?;
            }
            match self.convs[i].backward(&cache.inputs[i], &g, i > 0)? {
                Some(gx) => g = gx,
                None => break,
            }
        }
        Ok(())
    }
}

impl Parameterized for FeatureExtractor {
    fn visit_params<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        for (i, c) in self.convs.iter().enumerate() {
            c.visit_params(&format!("{prefix}conv{i}."), f);
            if let Some(bns) = &self.bns {
                bns[i].visit_params(&format!("{prefix}bn{i}."), f);
            }
        }
    }

    fn visit_params_mut<'a>(&'a mut self, f: &mut dyn FnMut(&'a mut Tensor)) {
        let bns = self.bns.as_mut().map(|b| b.iter_mut());
        let mut bns = bns.into_iter().flatten();
        for c in self.convs.iter_mut() {
            c.visit_params_mut(f);
            if let Some(bn) = bns.next() {
                bn.visit_params_mut(f);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct MlpCache {
    inputs: Vec<Tensor>,
    pre: Vec<Tensor>,
    pub output: Tensor,
}

/// Dense layers with ReLU between them and a final sigmoid or softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub output: Activation,
}

impl Mlp {
    pub fn xavier(sizes: &[usize], output: Activation, rng: &mut ChaCha8Rng) -> Self {
        let layers = sizes.windows(2).map(|w| Dense::xavier(w[0], w[1], rng)).collect();
        Mlp { layers, output }
    }

    pub fn out_features(&self) -> usize {
        self.layers.last().map_or(0, Dense::out_features)
    }

    pub fn forward(&self, x: &Tensor) -> Result<MlpCache> {
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n);
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&h)?;
            let act = if i + 1 == n { self.output } else { Activation::Relu };
            let a = act.forward(&z);
            inputs.push(h);
            pre.push(z);
            h = a;
        }
        Ok(MlpCache { inputs, pre, output: h })
    }

    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.forward(x)?.output)
    }

    /// Backward from the gradient w.r.t. the activated output; returns the
    /// gradient w.r.t. the input.
    pub fn backward(&mut self, cache: &MlpCache, grad_out: &Tensor) -> Result<Tensor> {
        let n = self.layers.len();
        let mut g = grad_out.clone();
        for i in (0..n).rev() {
            let act = if i + 1 == n { self.output } else { Activation::Relu };
            let y = if i + 1 == n {
                &cache.output
            } else {
                &cache.inputs[i + 1]
            };
            g = act.backward(&cache.pre[i], y, &g);
            g = self.layers[i].backward(&cache.inputs[i], &g)?;
        }
        Ok(g)
    }
}

impl Parameterized for Mlp {
    fn visit_params<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        for (i, l) in self.layers.iter().enumerate() {
            l.visit_params(&format!("{prefix}dense{i}."), f);
        }
    }

    fn visit_params_mut<'a>(&'a mut self, f: &mut dyn FnMut(&'a mut Tensor)) {
        for l in self.layers.iter_mut() {
            l.visit_params_mut(f);
        }
    }
}

pub fn regressor(rng: &mut ChaCha8Rng) -> Mlp {
    Mlp::xavier(&[FEATURE_DIM, 50, 1], Activation::Sigmoid, rng)
}

pub fn binary_discriminator(rng: &mut ChaCha8Rng) -> Mlp {
    Mlp::xavier(&[FEATURE_DIM, 50, 30, 1], Activation::Sigmoid, rng)
}

pub fn multiclass_discriminator(rng: &mut ChaCha8Rng) -> Mlp {
    Mlp::xavier(&[FEATURE_DIM, 50, 30, DOMAIN_PHASE_CLASSES], Activation::Softmax, rng)
}

pub fn phase_classifier(rng: &mut ChaCha8Rng) -> Mlp {
    Mlp::xavier(&[FEATURE_DIM, 50, 30, NUM_PHASES], Activation::Softmax, rng)
}

/// Feature extractor, regressor and the method-specific heads.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub method: Method,
    pub feature_extractor: FeatureExtractor,
    pub regressor: Mlp,
    pub discriminators: Vec<Mlp>,
    pub phase_classifier: Option<Mlp>,
}

/// Builds the bundle for `method` with the default three phases.
pub fn build_model(method: Method, seed: u64) -> ModelBundle {
    build_model_with(method, NUM_PHASES, seed)
}

/// Builds with `n_phases` OPS discriminators (ignored by other methods).
/// Initialisation order is feature extractor, regressor, discriminators,
/// phase classifier, so shared components start identical across methods.
pub fn build_model_with(method: Method, n_phases: usize, seed: u64) -> ModelBundle {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let feature_extractor = FeatureExtractor::xavier(method == Method::Adabn, &mut rng);
    let regressor = regressor(&mut rng);
    let discriminators = match method {
        Method::Dann => vec![binary_discriminator(&mut rng)],
        Method::OpsDannHard | Method::OpsDannSoft => (0..n_phases).map(|_| binary_discriminator(&mut rng)).collect(),
        Method::MultiClassOpsDann => vec![multiclass_discriminator(&mut rng)],
        _ => Vec::new(),
    };
    let phase_classifier = (method == Method::OpsDannSoft).then(|| phase_classifier(&mut rng));
    ModelBundle {
        method,
        feature_extractor,
        regressor,
        discriminators,
        phase_classifier,
    }
}

impl Parameterized for ModelBundle {
    fn visit_params<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        self.feature_extractor.visit_params(&format!("{prefix}fe."), f);
        self.regressor.visit_params(&format!("{prefix}regressor."), f);
        for (i, d) in self.discriminators.iter().enumerate() {
            d.visit_params(&format!("{prefix}disc{i}."), f);
        }
        if let Some(c) = &self.phase_classifier {
            c.visit_params(&format!("{prefix}phase."), f);
        }
    }

    fn visit_params_mut<'a>(&'a mut self, f: &mut dyn FnMut(&'a mut Tensor)) {
        self.feature_extractor.visit_params_mut(f);
        self.regressor.visit_params_mut(f);
        for d in self.discriminators.iter_mut() {
            d.visit_params_mut(f);
        }
        if let Some(c) = self.phase_classifier.as_mut() {
            c.visit_params_mut(f);
        }
    }
}

/// Parameter counts of the component networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamCounts {
    pub feature_extractor: usize,
    pub regressor: usize,
    pub discriminators: usize,
    pub phase_classifier: usize,
}

impl ParamCounts {
    pub fn total(&self) -> usize {
        self.feature_extractor + self.regressor + self.discriminators + self.phase_classifier
    }
}

impl ModelBundle {
    pub fn param_counts(&self) -> ParamCounts {
        ParamCounts {
            feature_extractor: self.feature_extractor.num_params(),
            regressor: self.regressor.num_params(),
            discriminators: self.discriminators.iter().map(Parameterized::num_params).sum(),
            phase_classifier: self.phase_classifier.as_ref().map_or(0, Parameterized::num_params),
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        for (name, t) in self.named_params() {
            t.check_finite(&name)?;
        }
        Ok(())
    }

    /// Normalised RUL predictions for a `B × 18 × T` batch.
    pub fn predict(&mut self, x: &Tensor) -> Result<Vec<f64>> {
        let f = self.feature_extractor.embed(x)?;
        Ok(self.regressor.predict(&f)?.into_data())
    }

    /// Named tensors for the checkpoint: parameters, then batch-norm running
    /// statistics.
    pub fn to_entries(&self) -> Result<Vec<(String, Tensor)>> {
        let mut out: Vec<(String, Tensor)> = self
            .named_params()
            .into_iter()
            .map(|(n, t)| {
                let mut t = t.clone();
                t.clear_grad();
                (n, t)
            })
            .collect();
        if let Some(bns) = &self.feature_extractor.bns {
            for (i, bn) in bns.iter().enumerate() {
                out.push((
                    format!("fe.bn{i}.running_mean"),
                    Tensor::new([bn.channels()], bn.running_mean.clone())?,
                ));
                out.push((
                    format!("fe.bn{i}.running_var"),
                    Tensor::new([bn.channels()], bn.running_var.clone())?,
                ));
            }
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        container::save(path, &self.to_entries()?)
    }

    /// Restores a checkpoint written by [`ModelBundle::save`] for `method`.
    pub fn load(method: Method, n_phases: usize, path: &Path) -> Result<Self> {
        let entries = container::load(path)?;
        let mut m = build_model_with(method, n_phases, 0);
        let names: Vec<String> = m.named_params().into_iter().map(|(n, _)| n).collect();
        let mut params = m.params_mut();
        for (name, p) in names.iter().zip(params.iter_mut()) {
            let t = container::find(&entries, name)?;
            if t.shape() != p.shape() {
                return Err(Error::Container(format!(
                    "{name}: shape {:?}, expected {:?}",
                    t.shape(),
                    p.shape()
                )));
            }
            p.data_mut().copy_from_slice(t.data());
        }
        if let Some(bns) = m.feature_extractor.bns.as_mut() {
            for (i, bn) in bns.iter_mut().enumerate() {
                bn.running_mean = container::find(&entries, &format!("fe.bn{i}.running_mean"))?
                    .data()
                    .to_vec();
                bn.running_var = container::find(&entries, &format!("fe.bn{i}.running_var"))?
                    .data()
                    .to_vec();
            }
        }
        Ok(m)
    }
}
