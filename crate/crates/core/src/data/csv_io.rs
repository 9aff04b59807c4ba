//! CSV ingestion and export.
//!
//! Schema: a mandatory header row containing `unit_id`, `cycle` and the 18
//! channel names of [`CHANNELS`] (any column order, extra columns ignored),
//! one row per timestep, UTF-8, `.` as decimal separator. Rows of one unit
//! must be contiguous in time order.
//!
//! Per-unit fault onset / EOL cycles and the sample rate live in a sidecar
//! TOML file next to the CSV (`fleet.csv` → `fleet.meta.toml`).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::series::{LifeSpan, MultivariateSeries, CHANNELS, NUM_CHANNELS};
use crate::error::{Error, Result};

pub const UNIT_COLUMN: &str = "unit_id";
pub const CYCLE_COLUMN: &str = "cycle";

/// Sidecar metadata for a fleet CSV.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FleetMetadata {
    pub sample_rate_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flight_class: Option<String>,
    /// Keyed by unit id.
    #[serde(default)]
    pub units: BTreeMap<String, LifeSpan>,
    /// Free-form description of how the data was produced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<toml::Table>,
}

impl Default for FleetMetadata {
    fn default() -> Self {
        FleetMetadata {
            sample_rate_hz: 1.0,
            flight_class: None,
            units: BTreeMap::new(),
            generator: None,
        }
    }
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("data");
    csv.with_file_name(format!("{stem}.meta.toml"))
}

pub fn read_metadata(path: &Path) -> Result<FleetMetadata> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Schema {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn write_metadata(path: &Path, meta: &FleetMetadata) -> Result<()> {
    let text = toml::to_string(meta).map_err(|e| Error::Schema {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads every unit from `path`. Life spans and the sample rate come from the
/// sidecar when it exists; otherwise the rate defaults to 1 Hz and life spans
/// are left unknown.
pub fn load_csv(path: &Path) -> Result<Vec<MultivariateSeries>> {
    let side = sidecar_path(path);
    let meta = if side.exists() {
        read_metadata(&side)?
    } else {
        FleetMetadata::default()
    };
    load_csv_with(path, &meta)
}

pub fn load_csv_with(path: &Path, meta: &FleetMetadata) -> Result<Vec<MultivariateSeries>> {
    let schema_err = |message: String| Error::Schema {
        path: path.to_path_buf(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::io(path, std::io::Error::other(e.to_string())),
            _ => schema_err(e.to_string()),
        })?;
    let headers = rdr.headers().map_err(|e| schema_err(e.to_string()))?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::Empty(format!("{}: no header row", path.display())));
    }
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| schema_err(format!("missing column `{name}`")))
    };
    let unit_col = col(UNIT_COLUMN)?;
    let cycle_col = col(CYCLE_COLUMN)?;
    let channel_cols = CHANNELS.iter().map(|c| col(c)).collect::<Result<Vec<_>>>()?;

    struct Acc {
        rows: Vec<[f64; NUM_CHANNELS]>,
        cycles: Vec<u32>,
    }
    let mut order: Vec<u32> = Vec::new();
    let mut units: BTreeMap<u32, Acc> = BTreeMap::new();
    let mut last_unit: Option<u32> = None;

    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| schema_err(format!("line {line}: {e}")))?;
        let parse_err = |column: &str, message: String| Error::Parse {
            path: path.to_path_buf(),
            row: line,
            column: column.to_string(),
            message,
        };
        let field = |c: usize| rec.get(c).unwrap_or("");
        let unit: u32 = field(unit_col)
            .parse()
            .map_err(|_| parse_err(UNIT_COLUMN, format!("`{}` is not a unit id", field(unit_col))))?;
        let cycle: u32 = field(cycle_col)
            .parse::<f64>()
            .ok()
            .filter(|v| v.fract() == 0.0 && *v >= 0.0)
            .map(|v| v as u32)
            .ok_or_else(|| parse_err(CYCLE_COLUMN, format!("`{}` is not a cycle number", field(cycle_col))))?;
        let mut row = [0.0; NUM_CHANNELS];
        for (k, &c) in channel_cols.iter().enumerate() {
            let v: f64 = field(c)
                .parse()
                .map_err(|_| parse_err(CHANNELS[k], format!("`{}` is not a number", field(c))))?;
            if !v.is_finite() {
                return Err(parse_err(CHANNELS[k], "non-finite value".into()));
            }
            row[k] = v;
        }
        if last_unit != Some(unit) {
            if units.contains_key(&unit) {
                return Err(parse_err(
                    UNIT_COLUMN,
                    format!("rows of unit {unit} are not contiguous"),
                ));
            }
            order.push(unit);
            units.insert(
                unit,
                Acc {
                    rows: Vec::new(),
                    cycles: Vec::new(),
                },
            );
            last_unit = Some(unit);
        }
        let acc = units.get_mut(&unit).expect("inserted above");
        if acc.cycles.last().is_some_and(|&c| cycle < c) {
            return Err(parse_err(
                CYCLE_COLUMN,
                format!("cycle {cycle} decreases within unit {unit}"),
            ));
        }
        acc.rows.push(row);
        acc.cycles.push(cycle);
    }
    if order.is_empty() {
        return Err(Error::Empty(format!("{}: no data rows", path.display())));
    }

    order
        .into_iter()
        .map(|unit| {
            let acc = units.remove(&unit).expect("unit recorded");
            let n = acc.rows.len();
            let mut values = vec![0.0; NUM_CHANNELS * n];
            for (t, row) in acc.rows.iter().enumerate() {
                for c in 0..NUM_CHANNELS {
                    values[c * n + t] = row[c];
                }
            }
            let life = meta.units.get(&unit.to_string()).copied();
            if let Some(l) = life {
                LifeSpan::new(l.fault_onset_cycle, l.eol_cycle)?;
            }
            MultivariateSeries::new(unit, values, acc.cycles, meta.sample_rate_hz, life)
        })
        .collect()
}

/// Writes `series` in schema order and, when `meta` is given, the sidecar.
pub fn write_csv(path: &Path, series: &[MultivariateSeries], meta: Option<&FleetMetadata>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    let io = |e: csv::Error| Error::io(path, std::io::Error::other(e.to_string()));
    let mut header = vec![UNIT_COLUMN.to_string(), CYCLE_COLUMN.to_string()];
    header.extend(CHANNELS.iter().map(|c| c.to_string()));
    w.write_record(&header).map_err(io)?;
    let mut rec: Vec<String> = Vec::with_capacity(header.len());
    for s in series {
        for t in 0..s.len() {
            rec.clear();
            rec.push(s.unit_id.to_string());
            rec.push(s.cycles[t].to_string());
            for c in 0..NUM_CHANNELS {
                rec.push(format!("{}", s.channel(c)[t]));
            }
            w.write_record(&rec).map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    if let Some(meta) = meta {
        write_metadata(&sidecar_path(path), meta)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> String {
        let mut h = vec![UNIT_COLUMN, CYCLE_COLUMN];
        h.extend(CHANNELS);
        h.join(",")
    }

    fn row(unit: u32, cycle: u32, base: f64) -> String {
        let mut r = vec![unit.to_string(), cycle.to_string()];
        r.extend((0..NUM_CHANNELS).map(|c| format!("{}", base + c as f64)));
        r.join(",")
    }

    #[test]
    fn reads_three_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        std::fs::write(
            &p,
            format!(
                "{}\n{}\n{}\n{}\n",
                header(),
                row(1, 1, 0.0),
                row(1, 1, 0.5),
                row(1, 2, 1.0)
            ),
        )
        .unwrap();
        let s = load_csv(&p).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].len(), 3);
        assert_eq!(s[0].num_channels(), 18);
        assert_eq!(s[0].channel(2), &[2.0, 2.5, 3.0]);
        assert!(s[0].life.is_none());
    }

    #[test]
    fn missing_altitude_column_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let h = header().replace(",alt,", ",altitude,");
        std::fs::write(&p, format!("{h}\n{}\n", row(1, 1, 0.0))).unwrap();
        let err = load_csv(&p).unwrap_err().to_string();
        assert!(err.contains("`alt`"), "{err}");
    }

    #[test]
    fn non_numeric_cell_reports_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let bad = row(1, 1, 0.0).replacen(",4,", ",x,", 1);
        std::fs::write(&p, format!("{}\n{}\n{bad}\n", header(), row(1, 1, 0.0))).unwrap();
        match load_csv(&p).unwrap_err() {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "T24");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn empty_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        std::fs::write(&p, "").unwrap();
        assert!(load_csv(&p).is_err());
        std::fs::write(&p, format!("{}\n", header())).unwrap();
        assert!(matches!(load_csv(&p), Err(Error::Empty(_))));
    }

    #[test]
    fn write_then_read_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("fleet.csv");
        let n = 7;
        let values: Vec<f64> = (0..18 * n).map(|i| (i as f64).sin() * 1e3 / 7.0).collect();
        let s = MultivariateSeries::new(
            4,
            values,
            vec![3, 3, 3, 4, 4, 5, 5],
            1.0,
            Some(LifeSpan::new(3, 9).unwrap()),
        )
        .unwrap();
        let mut meta = FleetMetadata::default();
        meta.units.insert("4".into(), s.life.unwrap());
        write_csv(&p, std::slice::from_ref(&s), Some(&meta)).unwrap();
        let back = load_csv(&p).unwrap();
        assert_eq!(back, vec![s]);
    }
}
