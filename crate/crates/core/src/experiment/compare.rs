use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::run::{Manifest, MANIFEST_FILE, METRICS_FILE};
use crate::error::{Error, Result};
use crate::methods::Method;
use crate::metrics::{median, quantile, MetricsReport};

/// Aggregate of one method on one task across seeds.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ComparisonRow {
    pub task: String,
    pub method: String,
    pub n_seeds: usize,
    pub rmse_cycles_median: f64,
    pub rmse_cycles_iqr: f64,
    pub rmse_norm_median: f64,
    pub rmse_norm_iqr: f64,
    pub nasa_score_mean_median: f64,
    pub nasa_score_mean_iqr: f64,
    pub pad_median: f64,
    pub silhouette_phase_median: f64,
    /// `100·(r₀ − r)/r₀` for median RMSE `r` against the source-only median
    /// `r₀` of the same task; absent without a source-only row.
    pub rmse_improvement_pct: Option<f64>,
}

fn stats(values: &[f64]) -> (f64, f64) {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    match (median(&finite), quantile(&finite, 0.25), quantile(&finite, 0.75)) {
        (Some(m), Some(q1), Some(q3)) => (m, q3 - q1),
        _ => (f64::NAN, f64::NAN),
    }
}

/// Headline RMSE of a row: cycles when available, else normalised.
fn headline(row: &ComparisonRow) -> f64 {
    if row.rmse_cycles_median.is_finite() {
        row.rmse_cycles_median
    } else {
        row.rmse_norm_median
    }
}

/// Groups reports by (task, method), ranked within each task by median RMSE.
pub fn aggregate(reports: &[MetricsReport]) -> Result<Vec<ComparisonRow>> {
    if reports.is_empty() {
        return Err(Error::Empty("no reports to compare".into()));
    }
    let mut groups: BTreeMap<(String, String), Vec<&MetricsReport>> = BTreeMap::new();
    for r in reports {
        groups.entry((r.task.clone(), r.method.clone())).or_default().push(r);
    }
    let mut rows: Vec<ComparisonRow> = groups
        .into_iter()
        .map(|((task, method), rs)| {
            let col = |f: fn(&MetricsReport) -> f64| rs.iter().map(|r| f(r)).collect::<Vec<_>>();
            let (rc, rci) = stats(&col(|r| r.rmse_cycles));
            let (rn, rni) = stats(&col(|r| r.rmse_norm));
            let (nm, nmi) = stats(&col(|r| r.nasa_score_mean));
            ComparisonRow {
                task,
                method,
                n_seeds: rs.len(),
                rmse_cycles_median: rc,
                rmse_cycles_iqr: rci,
                rmse_norm_median: rn,
                rmse_norm_iqr: rni,
                nasa_score_mean_median: nm,
                nasa_score_mean_iqr: nmi,
                pad_median: stats(&col(|r| r.pad)).0,
                silhouette_phase_median: stats(&col(|r| r.silhouette_phase)).0,
                rmse_improvement_pct: None,
            }
        })
        .collect();
    let baselines: BTreeMap<String, f64> = rows
        .iter()
        .filter(|r| r.method == Method::SourceOnly.name())
        .map(|r| (r.task.clone(), headline(r)))
        .collect();
    for r in &mut rows {
        r.rmse_improvement_pct = baselines
            .get(&r.task)
            .filter(|b| b.is_finite() && **b > 0.0)
            .map(|b| 100.0 * (b - headline(r)) / b);
    }
    rows.sort_by(|a, b| {
        a.task
            .cmp(&b.task)
            .then(headline(a).total_cmp(&headline(b)))
            .then(a.method.cmp(&b.method))
    });
    Ok(rows)
}

pub fn write_comparison_csv(path: &Path, rows: &[ComparisonRow]) -> Result<()> {
    let err = |e: csv::Error| Error::io(path, std::io::Error::other(e.to_string()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Compares finished experiment directories. Runs on the same task must
/// share the data hash recorded in their manifests.
pub fn compare_runs(dirs: &[PathBuf]) -> Result<Vec<ComparisonRow>> {
    let mut data_hash: BTreeMap<String, (String, PathBuf)> = BTreeMap::new();
    let mut reports = Vec::new();
    for dir in dirs {
        let manifest = Manifest::load(&dir.join(MANIFEST_FILE))?;
        let task = manifest.config.task.name().to_string();
        match data_hash.get(&task) {
            Some((h, first)) if *h != manifest.data_sha256 => {
                return Err(Error::ManifestMismatch(format!(
                    "{} and {} ran {task} on different data",
                    first.display(),
                    dir.display()
                )));
            }
            Some(_) => {}
            None => {
                data_hash.insert(task, (manifest.data_sha256.clone(), dir.clone()));
            }
        }
        reports.extend(MetricsReport::read_csv(&dir.join(METRICS_FILE))?);
    }
    aggregate(&reports)
}
