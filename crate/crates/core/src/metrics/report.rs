use std::path::Path;

use crate::data::{Domain, PhaseLabel};
use crate::error::{Error, Result};

/// One experiment's headline numbers; one CSV row.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricsReport {
    pub task: String,
    pub method: String,
    pub seed: u64,
    pub n_target_windows: usize,
    /// RMSE in cycles (headline).
    pub rmse_cycles: f64,
    /// RMSE on normalised RUL.
    pub rmse_norm: f64,
    pub nasa_score_total: f64,
    /// NASA score per window (headline).
    pub nasa_score_mean: f64,
    /// Proxy A-distance of the embeddings, in `[0, 2]`.
    pub pad: f64,
    /// Silhouette of phase labels in the 2-D PCA projection.
    pub silhouette_phase: f64,
    pub pca_var_1: f64,
    pub pca_var_2: f64,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

impl MetricsReport {
    pub fn write_csv(path: &Path, reports: &[MetricsReport]) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        for r in reports {
            w.serialize(r).map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Vec<MetricsReport>> {
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
        r.deserialize()
            .map(|row| {
                row.map_err(|e| Error::Schema {
                    path: path.to_path_buf(),
                    message: e.to_string(),
                })
            })
            .collect()
    }

    /// Multi-line `key: value` summary.
    pub fn summary(&self) -> String {
        format!(
            "{{\n  task: {}\n  method: {}\n  seed: {}\n  target windows: {}\n  rmse (cycles): {:.4}\n  rmse (normalised): {:.5}\n  nasa score (mean): {:.4}\n  nasa score (total): {:.4}\n  pad: {:.4}\n  phase silhouette: {:.4}\n  pca variance: [{:.5}, {:.5}]\n}}",
            self.task,
            self.method,
            self.seed,
            self.n_target_windows,
            self.rmse_cycles,
            self.rmse_norm,
            self.nasa_score_mean,
            self.nasa_score_total,
            self.pad,
            self.silhouette_phase,
            self.pca_var_1,
            self.pca_var_2
        )
    }
}

/// One projected embedding for external plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingPoint {
    pub x1: f64,
    pub x2: f64,
    pub domain: Domain,
    pub phase: PhaseLabel,
}

pub const EMBEDDING_HEADER: &str = "x1,x2,domain,phase";

pub fn write_embedding_csv(path: &Path, points: &[EmbeddingPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(EMBEDDING_HEADER.split(','))
        .map_err(|e| csv_err(path, e))?;
    for p in points {
        let domain = match p.domain {
            Domain::Source => "source",
            Domain::Target => "target",
        };
        w.write_record([
            p.x1.to_string(),
            p.x2.to_string(),
            domain.to_string(),
            p.phase.name().to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Per-window target prediction; rows of a unit are sorted by cycle.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PredictionRow {
    pub unit_id: u32,
    pub cycle: u32,
    pub phase: String,
    pub rul_norm: f64,
    pub pred_norm: f64,
    pub rul_cycles: f64,
    pub pred_cycles: f64,
}

pub const PREDICTION_HEADER: &str = "unit_id,cycle,phase,rul_norm,pred_norm,rul_cycles,pred_cycles";

pub fn write_predictions_csv(path: &Path, rows: &[PredictionRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> MetricsReport {
        MetricsReport {
            task: "S2L".into(),
            method: "dann".into(),
            seed: 3,
            n_target_windows: 120,
            rmse_cycles: 4.25,
            rmse_norm: 0.1 + 0.2,
            nasa_score_total: 150.5,
            nasa_score_mean: 1.254,
            pad: 0.75,
            silhouette_phase: -0.01,
            pca_var_1: 2.0,
            pca_var_2: 0.5,
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        MetricsReport::write_csv(&p, &[report(), report()]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("task,method,seed,n_target_windows,rmse_cycles,rmse_norm,"));
        assert_eq!(MetricsReport::read_csv(&p).unwrap(), vec![report(), report()]);
        assert!(report().summary().contains("rmse (cycles): 4.2500"));
    }

    #[test]
    fn embedding_csv_has_documented_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        let pts = [EmbeddingPoint {
            x1: 0.5,
            x2: -1.0,
            domain: Domain::Target,
            phase: PhaseLabel::Steady,
        }];
        write_embedding_csv(&p, &pts).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text, format!("{EMBEDDING_HEADER}\n0.5,-1,target,steady\n"));
    }
}
