use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use phasealign::data::{load_csv, prepare_split, Domain, PrepConfig};
use phasealign::experiment::{
    compare_runs, rerun_from_manifest, run_experiment, summarize_embeddings, write_comparison_csv, DataConfig,
    EmbeddingSet, ExperimentConfig, ExperimentOutcome, Task, OUTPUT_ROOT_ENV,
};
use phasealign::metrics::{proxy_a_distance, write_embedding_csv, ProbeConfig};
use phasealign::synth::{write_fleet, DegradationSpec, FleetSpec, FlightClass};
use phasealign::Method;

#[derive(Parser)]
#[command(
    name = "phasealign",
    version,
    about = "Operation-profile-aware domain adaptation for RUL regression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic fleet as CSV with metadata and phase truth.
    Gen(GenArgs),
    /// Preprocess source and target CSVs into cached window sets.
    Prep(PrepArgs),
    /// Train and evaluate methods on an adaptation task.
    Run(RunArgs),
    /// Aggregate finished experiments into a ranking table.
    Compare(CompareArgs),
    /// Proxy A-distance of saved embeddings.
    Pad(PadArgs),
    /// 2-D PCA projection of saved embeddings.
    Pca(PcaArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Flight class: short, medium or long.
    #[arg(long)]
    class: FlightClass,
    #[arg(long, default_value_t = 5)]
    units: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// TOML file overriding degradation parameters.
    #[arg(long)]
    degradation: Option<PathBuf>,
    /// Output CSV; the sidecar and truth files are written next to it.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct PrepArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// TOML file with preprocessing options.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    window_stride: Option<usize>,
    /// Directory receiving `source.bin` and `target.bin`.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment TOML; command-line options override it.
    #[arg(long, conflicts_with = "manifest")]
    config: Option<PathBuf>,
    /// Repeat the experiment recorded in a manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// S2M, S2L, M2L or custom.
    #[arg(long)]
    task: Option<Task>,
    /// Method(s) to run; repeat or separate with commas.
    #[arg(long, value_delimiter = ',')]
    method: Vec<Method>,
    /// Seeds as `a..b` (inclusive) or a comma list.
    #[arg(long)]
    seeds: Option<String>,
    /// Use generated fleets (the default without --source/--target).
    #[arg(long, conflicts_with_all = ["source", "target"])]
    synthetic: bool,
    #[arg(long, requires = "target")]
    source: Option<PathBuf>,
    #[arg(long, requires = "source")]
    target: Option<PathBuf>,
    /// Epochs for every method, e.g. for quick smoke runs.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    window_stride: Option<usize>,
    /// Hold out this fraction of target units for evaluation.
    #[arg(long)]
    held_out: Option<f64>,
    /// Output directory; relative paths resolve against the output root.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Root for relative output directories.
    #[arg(long, env = OUTPUT_ROOT_ENV)]
    output_root: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Experiment output directories.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PadArgs {
    /// `embeddings.bin` from a run directory.
    embeddings: PathBuf,
    #[arg(long, default_value_t = 5)]
    probes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PcaArgs {
    /// `embeddings.bin` from a run directory.
    embeddings: PathBuf,
    /// Embeddings per domain.
    #[arg(long, default_value_t = 1000)]
    max_points: usize,
    /// CSV with columns x1, x2, domain, phase.
    #[arg(long, short)]
    out: PathBuf,
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().context("seed range start")?;
        let b: u64 = b.trim_start_matches('=').trim().parse().context("seed range end")?;
        if b < a {
            bail!("empty seed range {s}");
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|x| x.trim().parse::<u64>().with_context(|| format!("seed `{x}`")))
        .collect()
}

fn resolve_output(dir: PathBuf, root: Option<&Path>) -> PathBuf {
    match root {
        Some(r) if dir.is_relative() => r.join(dir),
        _ => dir,
    }
}

fn gen(a: GenArgs) -> Result<()> {
    let mut spec = FleetSpec::new(a.class, a.units, a.seed);
    if let Some(p) = &a.degradation {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        spec.degradation =
            toml::from_str::<DegradationSpec>(&text).with_context(|| format!("parsing {}", p.display()))?;
    }
    let fleet = spec.generate()?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    write_fleet(&a.out, &fleet, &spec)?;
    let steps: usize = fleet.units.iter().map(|u| u.series.len()).sum();
    println!(
        "wrote {} {} units ({steps} samples) to {}",
        a.units,
        a.class.name(),
        a.out.display()
    );
    Ok(())
}

fn prep(a: PrepArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => toml::from_str::<PrepConfig>(&std::fs::read_to_string(p)?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => PrepConfig::default(),
    };
    if let Some(s) = a.window_stride {
        cfg.window_stride = s;
    }
    let split = prepare_split(&load_csv(&a.source)?, &load_csv(&a.target)?, &cfg)?;
    std::fs::create_dir_all(&a.out)?;
    split.source.save(&a.out.join("source.bin"))?;
    split.target.save(&a.out.join("target.bin"))?;
    println!(
        "{} source and {} target windows written to {}",
        split.source.len(),
        split.target.len(),
        a.out.display()
    );
    Ok(())
}

fn build_config(a: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => {
            let task = a.task.context("--task is required without --config")?;
            if a.method.is_empty() {
                bail!("--method is required without --config");
            }
            ExperimentConfig::synthetic(task, a.method.clone())
        }
    };
    if let Some(t) = a.task {
        cfg.task = t;
    }
    if !a.method.is_empty() {
        cfg.methods = a.method.clone();
    }
    if let Some(s) = &a.seeds {
        cfg.seeds = parse_seeds(s)?;
    }
    if let (Some(s), Some(t)) = (&a.source, &a.target) {
        cfg.data = DataConfig::Csv {
            source: s.clone(),
            target: t.clone(),
        };
    } else if a.synthetic && !matches!(cfg.data, DataConfig::Synthetic { .. }) {
        cfg.data = DataConfig::default();
    }
    if a.epochs.is_some() {
        cfg.train.epochs = a.epochs;
    }
    if let Some(s) = a.window_stride {
        cfg.prep.window_stride = s;
    }
    if a.held_out.is_some() {
        cfg.eval.held_out_fraction = a.held_out;
    }
    if let Some(o) = &a.output {
        cfg.output_dir = o.clone();
    }
    cfg.output_dir = resolve_output(cfg.output_dir, a.output_root.as_deref());
    cfg.validate()?;
    Ok(cfg)
}

fn print_outcome(out: &ExperimentOutcome, dir: &Path) {
    println!(
        "{:<22} {:>5} {:>12} {:>10} {:>10} {:>7} {:>10}",
        "method", "seed", "rmse_cycles", "rmse_norm", "nasa_mean", "pad", "silhouette"
    );
    for r in &out.reports {
        println!(
            "{:<22} {:>5} {:>12.4} {:>10.5} {:>10.4} {:>7.4} {:>10.4}",
            r.method, r.seed, r.rmse_cycles, r.rmse_norm, r.nasa_score_mean, r.pad, r.silhouette_phase
        );
    }
    println!("results in {}", dir.display());
}

fn run(a: RunArgs) -> Result<()> {
    let out = if let Some(m) = &a.manifest {
        let dir = a.output.clone().map(|o| resolve_output(o, a.output_root.as_deref()));
        rerun_from_manifest(m, dir)?
    } else {
        run_experiment(&build_config(&a)?)?
    };
    let dir = out.manifest.config.output_dir.clone();
    print_outcome(&out, &dir);
    Ok(())
}

fn compare(a: CompareArgs) -> Result<()> {
    let rows = compare_runs(&a.runs)?;
    println!(
        "{:<8} {:<22} {:>6} {:>12} {:>10} {:>10} {:>8}",
        "task", "method", "seeds", "rmse_median", "rmse_iqr", "nasa_mean", "improve%"
    );
    for r in &rows {
        let imp = r.rmse_improvement_pct.map_or("-".to_string(), |v| format!("{v:.1}"));
        println!(
            "{:<8} {:<22} {:>6} {:>12.4} {:>10.4} {:>10.4} {:>8}",
            r.task, r.method, r.n_seeds, r.rmse_cycles_median, r.rmse_cycles_iqr, r.nasa_score_mean_median, imp
        );
    }
    if let Some(o) = &a.out {
        write_comparison_csv(o, &rows)?;
        println!("wrote {}", o.display());
    }
    Ok(())
}

fn pad(a: PadArgs) -> Result<()> {
    let set = EmbeddingSet::load(&a.embeddings)?;
    let cfg = ProbeConfig {
        seeds: a.probes,
        seed: a.seed,
        ..ProbeConfig::default()
    };
    let out = proxy_a_distance(
        &set.domain_rows(Domain::Source)?,
        &set.domain_rows(Domain::Target)?,
        &cfg,
    )?;
    let errs: Vec<String> = out.errors.iter().map(|e| format!("{e:.4}")).collect();
    println!("pad {:.4} (probe errors {})", out.pad, errs.join(", "));
    Ok(())
}

fn pca(a: PcaArgs) -> Result<()> {
    let set = EmbeddingSet::load(&a.embeddings)?.subsample(a.max_points)?;
    let s = summarize_embeddings(&set)?;
    write_embedding_csv(&a.out, &s.points)?;
    println!(
        "{} points, variance ratio [{:.4}, {:.4}], phase silhouette {:.4}; wrote {}",
        s.points.len(),
        s.variance_ratio[0],
        s.variance_ratio[1],
        s.silhouette_phase,
        a.out.display()
    );
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen(a) => gen(a),
        Command::Prep(a) => prep(a),
        Command::Run(a) => run(a),
        Command::Compare(a) => compare(a),
        Command::Pad(a) => pad(a),
        Command::Pca(a) => pca(a),
    }
}
