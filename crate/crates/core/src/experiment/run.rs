use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::compare::{aggregate, write_comparison_csv};
use super::config::{fleet_seed, DataConfig, ExperimentConfig};
use crate::data::{load_csv, prepare_split, Domain, MultivariateSeries, PhaseLabel, PreparedSplit, WindowSet};
use crate::error::{Error, Result};
use crate::methods::train::{denormalize, embed, predict_rul, train_method, write_trace, EpochTrace};
use crate::methods::{Method, ModelBundle};
use crate::metrics::{
    nasa_score, pca_project, proxy_a_distance, rmse, silhouette_score, write_embedding_csv, write_predictions_csv,
    EmbeddingPoint, MetricsReport, PredictionRow,
};
use crate::nn::container;
use crate::nn::gradcheck::sample_entries;
use crate::nn::Tensor;
use crate::synth::FleetSpec;

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

/// Both domains after preprocessing, shared by every method and seed.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub source: WindowSet,
    /// Target windows the methods may see, with RUL labels stripped.
    pub target_train: WindowSet,
    /// Labelled target windows used for evaluation only.
    pub target_eval: WindowSet,
    /// SHA-256 of the prepared source and labelled target windows.
    pub data_sha256: String,
}

/// Generates or loads the raw source and target units.
pub fn load_raw(cfg: &ExperimentConfig) -> Result<(Vec<MultivariateSeries>, Vec<MultivariateSeries>)> {
    match &cfg.data {
        DataConfig::Synthetic {
            units_per_class,
            seed,
            degradation,
        } => {
            let (s, t) = cfg
                .task
                .classes()
                .ok_or_else(|| Error::config("task", "synthetic data needs S2M, S2L or M2L"))?;
            let fleet = |class| -> Result<Vec<MultivariateSeries>> {
                let mut spec = FleetSpec::new(class, *units_per_class, fleet_seed(*seed, class));
                spec.degradation = degradation.clone();
                Ok(spec.generate()?.into_series())
            };
            Ok((fleet(s)?, fleet(t)?))
        }
        DataConfig::Csv { source, target } => Ok((load_csv(source)?, load_csv(target)?)),
        DataConfig::Windows { .. } => Err(Error::config("data.kind", "cached windows have no raw units")),
    }
}

fn hash_entries(h: &mut Sha256, entries: &[(String, Tensor)]) {
    for (name, t) in entries {
        h.update((name.len() as u64).to_le_bytes());
        h.update(name.as_bytes());
        for &d in t.shape() {
            h.update((d as u64).to_le_bytes());
        }
        for v in t.data() {
            h.update(v.to_le_bytes());
        }
    }
}

/// SHA-256 over a sequence of window sets.
pub fn hash_window_sets(sets: &[&WindowSet]) -> Result<String> {
    let mut h = Sha256::new();
    for s in sets {
        hash_entries(&mut h, &s.to_entries()?);
    }
    Ok(hex::encode(h.finalize()))
}

/// Target unit ids held out from adaptation: the last `round(f·n)` units,
/// at least one and leaving at least one for training.
fn held_out_units(target: &WindowSet, fraction: f64) -> Result<Vec<u32>> {
    let mut ids: Vec<u32> = target.series().iter().map(|s| s.series.unit_id).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 2 {
        return Err(Error::config(
            "eval.held_out_fraction",
            "needs at least two target units",
        ));
    }
    let k = ((ids.len() as f64 * fraction).round() as usize).clamp(1, ids.len() - 1);
    Ok(ids[ids.len() - k..].to_vec())
}

/// Loads, preprocesses and windows both domains. The scaler is fitted on the
/// source only.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let (source, target) = match &cfg.data {
        DataConfig::Windows { source, target } => (WindowSet::load(source)?, WindowSet::load(target)?),
        _ => {
            let (src, tgt) = load_raw(cfg)?;
            let PreparedSplit { source, target, .. } = prepare_split(&src, &tgt, &cfg.prep)?;
            (source, target)
        }
    };
    if source.domain() != Domain::Source || target.domain() != Domain::Target {
        return Err(Error::InvalidArgument(
            "source and target window sets have swapped domains".into(),
        ));
    }
    if source.is_empty() || target.is_empty() {
        return Err(Error::Empty(format!(
            "{} source and {} target windows after preprocessing",
            source.len(),
            target.len()
        )));
    }
    let data_sha256 = hash_window_sets(&[&source, &target])?;
    let (target_train, target_eval) = match cfg.eval.held_out_fraction {
        None => (target.without_rul(), target),
        Some(f) => {
            let held = held_out_units(&target, f)?;
            (
                target.filter_units(|u| !held.contains(&u)).without_rul(),
                target.filter_units(|u| held.contains(&u)),
            )
        }
    };
    target_train.ensure_unlabeled()?;
    if !target_eval.has_rul() {
        return Err(Error::InvalidArgument(
            "target evaluation windows need RUL labels".into(),
        ));
    }
    Ok(PreparedData {
        source,
        target_train,
        target_eval,
        data_sha256,
    })
}

/// Feature-extractor embeddings tagged with domain and phase.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    /// `n × 50`.
    pub features: Tensor,
    pub domain: Vec<Domain>,
    pub phase: Vec<PhaseLabel>,
}

impl EmbeddingSet {
    pub fn len(&self) -> usize {
        self.domain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domain.is_empty()
    }

    /// Rows of one domain as an `m × d` tensor.
    pub fn domain_rows(&self, domain: Domain) -> Result<Tensor> {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.domain[i] == domain).collect();
        self.rows(&idx)
    }

    fn rows(&self, idx: &[usize]) -> Result<Tensor> {
        let d = self.features.dim(1);
        let mut data = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            data.extend_from_slice(&self.features.data()[i * d..(i + 1) * d]);
        }
        Tensor::new([idx.len(), d], data)
    }

    /// At most `per_domain` evenly spaced rows of each domain, source first.
    pub fn subsample(&self, per_domain: usize) -> Result<EmbeddingSet> {
        let mut idx = Vec::new();
        for dom in [Domain::Source, Domain::Target] {
            let rows: Vec<usize> = (0..self.len()).filter(|&i| self.domain[i] == dom).collect();
            if !rows.is_empty() {
                idx.extend(sample_entries(rows.len(), per_domain).into_iter().map(|k| rows[k]));
            }
        }
        Ok(EmbeddingSet {
            features: self.rows(&idx)?,
            domain: idx.iter().map(|&i| self.domain[i]).collect(),
            phase: idx.iter().map(|&i| self.phase[i]).collect(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let n = self.len();
        let tags = |f: &dyn Fn(usize) -> f64| Tensor::new([n], (0..n).map(f).collect());
        container::save(
            path,
            &[
                ("features".into(), self.features.clone()),
                ("domain".into(), tags(&|i| self.domain[i].label())?),
                ("phase".into(), tags(&|i| self.phase[i].index() as f64)?),
            ],
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let e = container::load(path)?;
        let features = container::find(&e, "features")?.clone();
        let domain = container::find(&e, "domain")?;
        let phase = container::find(&e, "phase")?;
        if features.ndim() != 2 || domain.len() != features.dim(0) || phase.len() != features.dim(0) {
            return Err(Error::Container(format!(
                "{}: inconsistent embedding tags",
                path.display()
            )));
        }
        Ok(EmbeddingSet {
            features,
            domain: domain
                .data()
                .iter()
                .map(|&d| if d == 0.0 { Domain::Source } else { Domain::Target })
                .collect(),
            phase: phase
                .data()
                .iter()
                .map(|&p| PhaseLabel::from_index(p as usize))
                .collect::<Result<_>>()?,
        })
    }
}

pub fn embed_windows(model: &mut ModelBundle, sets: &[&WindowSet], chunk: usize) -> Result<EmbeddingSet> {
    let mut parts = Vec::with_capacity(sets.len());
    let mut domain = Vec::new();
    let mut phase = Vec::new();
    for s in sets {
        parts.push(embed(model, s, chunk)?);
        domain.extend(std::iter::repeat_n(s.domain(), s.len()));
        phase.extend(s.phases());
    }
    Ok(EmbeddingSet {
        features: Tensor::concat_rows(&parts.iter().collect::<Vec<_>>())?,
        domain,
        phase,
    })
}

/// 2-D PCA of the embeddings and the phase silhouette in that plane.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSummary {
    pub points: Vec<EmbeddingPoint>,
    /// Phase silhouette; NaN when fewer than two phases are present.
    pub silhouette_phase: f64,
    /// Fraction of total variance along each of the two axes.
    pub variance_ratio: [f64; 2],
}

pub fn summarize_embeddings(set: &EmbeddingSet) -> Result<EmbeddingSummary> {
    let pca = pca_project(&set.features, 2)?;
    let n = set.len();
    let d = set.features.dim(1);
    let total: f64 = (0..d)
        .map(|j| {
            let col = (0..n).map(|i| set.features.data()[i * d + j]);
            let mean = col.clone().sum::<f64>() / n as f64;
            col.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n.max(2) - 1) as f64
        })
        .sum();
    let ratio = |k: usize| {
        if total > 0.0 {
            pca.explained_variance[k] / total
        } else {
            0.0
        }
    };
    let labels: Vec<usize> = set.phase.iter().map(|p| p.index()).collect();
    let silhouette_phase = match silhouette_score(&pca.coords, &labels) {
        Ok(s) => s,
        Err(Error::InvalidArgument(_)) => f64::NAN,
        Err(e) => return Err(e),
    };
    let c = pca.coords.data();
    let points = (0..n)
        .map(|i| EmbeddingPoint {
            x1: c[2 * i],
            x2: c[2 * i + 1],
            domain: set.domain[i],
            phase: set.phase[i],
        })
        .collect();
    Ok(EmbeddingSummary {
        points,
        silhouette_phase,
        variance_ratio: [ratio(0), ratio(1)],
    })
}

/// Everything produced by one (method, seed) run.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub report: MetricsReport,
    pub trace: Vec<EpochTrace>,
    pub predictions: Vec<PredictionRow>,
    pub embeddings: EmbeddingSet,
    pub projection: EmbeddingSummary,
    pub model: ModelBundle,
}

/// Trains one method with one seed and evaluates it on the target.
pub fn run_seed(cfg: &ExperimentConfig, data: &PreparedData, method: Method, seed: u64) -> Result<SeedRun> {
    let tc = cfg.train_config(method, seed);
    let mut out = train_method(&data.source, &data.target_train, &tc)?;
    let model = &mut out.model;
    let eval = &data.target_eval;
    let chunk = cfg.eval.chunk;

    let pred = predict_rul(model, eval, chunk)?;
    let truth = eval.rul_labels().expect("evaluation windows are labelled");
    let pred_c = denormalize(&pred, eval);
    let truth_c = denormalize(&truth, eval);
    let (pc, tc_): (Vec<f64>, Vec<f64>) = pred_c
        .iter()
        .zip(&truth_c)
        .filter_map(|(p, t)| Some(((*p)?, (*t)?)))
        .unzip();
    let (rmse_cycles, nasa) = if pc.is_empty() {
        (f64::NAN, None)
    } else {
        (rmse(&pc, &tc_)?, Some(nasa_score(&pc, &tc_)?))
    };
    let mut predictions: Vec<PredictionRow> = (0..eval.len())
        .map(|i| PredictionRow {
            unit_id: eval.unit_id(i),
            cycle: eval.cycle(i),
            phase: eval.phase(i).name().to_string(),
            rul_norm: truth[i],
            pred_norm: pred[i],
            rul_cycles: truth_c[i].unwrap_or(f64::NAN),
            pred_cycles: pred_c[i].unwrap_or(f64::NAN),
        })
        .collect();
    predictions.sort_by_key(|r| (r.unit_id, r.cycle));

    let embeddings = embed_windows(model, &[&data.source, eval], chunk)?;
    let probe = crate::metrics::ProbeConfig {
        seed: cfg.eval.probe.seed.wrapping_add(seed),
        ..cfg.eval.probe.clone()
    };
    let pad = proxy_a_distance(
        &embeddings.domain_rows(Domain::Source)?,
        &embeddings.domain_rows(Domain::Target)?,
        &probe,
    )?
    .pad;
    let projection = summarize_embeddings(&embeddings.subsample(cfg.eval.max_points)?)?;

    let report = MetricsReport {
        task: cfg.task.name().to_string(),
        method: method.name().to_string(),
        seed,
        n_target_windows: eval.len(),
        rmse_cycles,
        rmse_norm: rmse(&pred, &truth)?,
        nasa_score_total: nasa.map_or(f64::NAN, |s| s.total),
        nasa_score_mean: nasa.map_or(f64::NAN, |s| s.mean),
        pad,
        silhouette_phase: projection.silhouette_phase,
        pca_var_1: projection.variance_ratio[0],
        pca_var_2: projection.variance_ratio[1],
    };
    Ok(SeedRun {
        report,
        trace: out.trace,
        predictions,
        embeddings,
        projection,
        model: out.model,
    })
}

/// Directory of one run relative to the experiment output directory.
pub fn run_dir(method: Method, seed: u64) -> PathBuf {
    PathBuf::from(method.name()).join(format!("seed-{seed}"))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_seed_outputs(dir: &Path, run: &SeedRun) -> Result<()> {
    create_dir(dir)?;
    MetricsReport::write_csv(&dir.join(METRICS_FILE), std::slice::from_ref(&run.report))?;
    write_trace(&dir.join("trace.csv"), &run.trace)?;
    write_predictions_csv(&dir.join("predictions.csv"), &run.predictions)?;
    write_embedding_csv(&dir.join("embeddings.csv"), &run.projection.points)?;
    run.embeddings.save(&dir.join("embeddings.bin"))?;
    run.model.save(&dir.join("model.bin"))?;
    write_text(&dir.join("summary.txt"), &(run.report.summary() + "\n"))
}

/// Reproducibility record written next to the results.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub crate_version: String,
    /// SHA-256 of the configuration with `output_dir` blanked.
    pub config_sha256: String,
    pub data_sha256: String,
    /// Run directories relative to the manifest.
    pub runs: Vec<PathBuf>,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Schema {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::config("manifest", e.to_string()))?;
        write_text(path, &text)
    }
}

pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let blank = ExperimentConfig {
        output_dir: PathBuf::new(),
        ..cfg.clone()
    };
    Ok(hex::encode(Sha256::digest(blank.to_toml_string()?.as_bytes())))
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    /// One report per (method, seed), methods in config order, seeds ascending
    /// within a method as listed.
    pub reports: Vec<MetricsReport>,
    pub manifest: Manifest,
}

/// Runs every (method, seed) pair and writes per-run directories, the
/// combined `metrics.csv`, `summary.csv` and `manifest.toml` under
/// `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let data = prepare_data(cfg)?;
    run_prepared(cfg, &data)
}

/// [`run_experiment`] on already prepared data.
pub fn run_prepared(cfg: &ExperimentConfig, data: &PreparedData) -> Result<ExperimentOutcome> {
    let out = &cfg.output_dir;
    create_dir(out)?;
    let jobs: Vec<(Method, u64)> = cfg
        .methods
        .iter()
        .flat_map(|&m| cfg.seeds.iter().map(move |&s| (m, s)))
        .collect();
    let reports = jobs
        .par_iter()
        .map(|&(m, s)| {
            let run = run_seed(cfg, data, m, s)?;
            write_seed_outputs(&out.join(run_dir(m, s)), &run)?;
            Ok(run.report)
        })
        .collect::<Result<Vec<_>>>()?;
    MetricsReport::write_csv(&out.join(METRICS_FILE), &reports)?;
    write_comparison_csv(&out.join(SUMMARY_FILE), &aggregate(&reports)?)?;
    let manifest = Manifest {
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: config_hash(cfg)?,
        data_sha256: data.data_sha256.clone(),
        runs: jobs.iter().map(|&(m, s)| run_dir(m, s)).collect(),
        config: cfg.clone(),
    };
    manifest.save(&out.join(MANIFEST_FILE))?;
    Ok(ExperimentOutcome { reports, manifest })
}

/// Repeats the experiment recorded in `manifest_path`, writing to
/// `output_dir` (default: the recorded one). Fails if the embedded config
/// was edited or the regenerated data differs.
pub fn rerun_from_manifest(manifest_path: &Path, output_dir: Option<PathBuf>) -> Result<ExperimentOutcome> {
    let manifest = Manifest::load(manifest_path)?;
    if config_hash(&manifest.config)? != manifest.config_sha256 {
        return Err(Error::ManifestMismatch(format!(
            "{}: embedded config does not match its recorded hash",
            manifest_path.display()
        )));
    }
    let mut cfg = manifest.config.clone();
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    cfg.validate()?;
    let data = prepare_data(&cfg)?;
    if data.data_sha256 != manifest.data_sha256 {
        return Err(Error::ManifestMismatch(format!(
            "regenerated data hash {} differs from recorded {}",
            data.data_sha256, manifest.data_sha256
        )));
    }
    run_prepared(&cfg, &data)
}
