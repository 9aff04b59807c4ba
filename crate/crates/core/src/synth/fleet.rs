use std::path::Path;

use rayon::prelude::*;

use super::flight::{FlightClass, FlightClassSpec};
use super::unit::{gen_unit, DegradationSpec, GeneratedUnit};
use crate::data::csv_io::{sidecar_path, write_csv, FleetMetadata};
use crate::data::MultivariateSeries;
use crate::error::{Error, Result};

/// Everything needed to regenerate a fleet.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetSpec {
    pub class: FlightClass,
    pub n_units: u32,
    pub seed: u64,
    pub flight: FlightClassSpec,
    #[serde(default)]
    pub degradation: DegradationSpec,
}

impl FleetSpec {
    pub fn new(class: FlightClass, n_units: u32, seed: u64) -> Self {
        FleetSpec {
            class,
            n_units,
            seed,
            flight: class.spec(),
            degradation: DegradationSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_units == 0 {
            return Err(Error::config("n_units", "must be >= 1"));
        }
        if self.flight.class != self.class {
            return Err(Error::config("flight.class", "does not match the fleet class"));
        }
        self.flight.validate()?;
        self.degradation.validate()
    }

    /// Generates the fleet. Unit ids run from 1; each unit depends only on
    /// `(seed, unit id)`.
    pub fn generate(&self) -> Result<Fleet> {
        self.validate()?;
        let units = (1..=self.n_units)
            .into_par_iter()
            .map(|id| gen_unit(&self.flight, &self.degradation, id, self.seed))
            .collect::<Result<Vec<_>>>()?;
        Ok(Fleet {
            class: self.class,
            units,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fleet {
    pub class: FlightClass,
    pub units: Vec<GeneratedUnit>,
}

impl Fleet {
    pub fn series(&self) -> Vec<MultivariateSeries> {
        self.units.iter().map(|u| u.series.clone()).collect()
    }

    pub fn into_series(self) -> Vec<MultivariateSeries> {
        self.units.into_iter().map(|u| u.series).collect()
    }

    pub fn metadata(&self, spec: &FleetSpec) -> Result<FleetMetadata> {
        let mut meta = FleetMetadata {
            sample_rate_hz: 1.0,
            flight_class: Some(self.class.name().to_string()),
            ..FleetMetadata::default()
        };
        for u in &self.units {
            meta.units.insert(u.series.unit_id.to_string(), u.health.life);
        }
        let table = toml::Table::try_from(spec).map_err(|e| Error::config("generator", e.to_string()))?;
        meta.generator = Some(table);
        Ok(meta)
    }
}

pub fn gen_fleet(class: FlightClass, n_units: u32, seed: u64) -> Result<Fleet> {
    FleetSpec::new(class, n_units, seed).generate()
}

/// Writes `path` (CSV), its metadata sidecar, and `<stem>.truth.csv` holding
/// ground-truth phases as runs (`unit_id, start, len, phase`).
pub fn write_fleet(path: &Path, fleet: &Fleet, spec: &FleetSpec) -> Result<()> {
    let meta = fleet.metadata(spec)?;
    write_csv(path, &fleet.series(), Some(&meta))?;
    let side = sidecar_path(path);
    let truth = side.with_file_name(
        side.file_name()
            .and_then(|n| n.to_str())
            .map(|n| n.replace(".meta.toml", ".truth.csv"))
            .unwrap_or_else(|| "truth.csv".into()),
    );
    let mut w = csv::Writer::from_path(&truth).map_err(|e| Error::io(&truth, std::io::Error::other(e.to_string())))?;
    let io = |e: csv::Error| Error::io(&truth, std::io::Error::other(e.to_string()));
    w.write_record(["unit_id", "start", "len", "phase"]).map_err(io)?;
    for u in &fleet.units {
        let mut start = 0;
        for (i, p) in u.phases.iter().enumerate() {
            let end = i + 1 == u.phases.len() || u.phases[i + 1] != *p;
            if end {
                w.write_record([
                    u.series.unit_id.to_string(),
                    start.to_string(),
                    (i + 1 - start).to_string(),
                    p.name().to_string(),
                ])
                .map_err(io)?;
                start = i + 1;
            }
        }
    }
    w.flush().map_err(|e| Error::io(&truth, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::load_csv;

    fn tiny(class: FlightClass, seed: u64) -> FleetSpec {
        let mut s = FleetSpec::new(class, 2, seed);
        s.degradation.total_cycles = (8, 10);
        s.degradation.cycle_stride = 4;
        s
    }

    #[test]
    fn disjoint_seeds_give_different_units() {
        let a = tiny(FlightClass::Short, 1).generate().unwrap();
        let b = tiny(FlightClass::Short, 2).generate().unwrap();
        for u in &a.units {
            assert!(b.units.iter().all(|v| v.series.values() != u.series.values()));
        }
        assert_ne!(a.units[0].series.values(), a.units[1].series.values());
    }

    #[test]
    fn csv_round_trip_preserves_fleet() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("short.csv");
        let spec = tiny(FlightClass::Short, 5);
        let fleet = spec.generate().unwrap();
        write_fleet(&p, &fleet, &spec).unwrap();
        let back = load_csv(&p).unwrap();
        assert_eq!(back.len(), 2);
        for (b, u) in back.iter().zip(&fleet.units) {
            assert_eq!(b.life, Some(u.health.life));
            assert_eq!(b.cycles, u.series.cycles);
            for (x, y) in b.values().iter().zip(u.series.values()) {
                assert_eq!(x, y);
            }
        }
        assert!(dir.path().join("short.truth.csv").exists());
        let meta = crate::data::csv_io::read_metadata(&sidecar_path(&p)).unwrap();
        let g: FleetSpec = meta.generator.unwrap().try_into().unwrap();
        assert_eq!(g, spec);
    }
}
