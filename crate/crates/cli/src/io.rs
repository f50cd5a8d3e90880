//! File formats: observations CSV, forecast JSON and output writing.

use std::collections::BTreeMap;
use std::path::Path;

use reconc_core::ForecastSpec;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Bottom-frequency observations per series, time ordered.
pub type Observations = BTreeMap<String, Vec<u64>>;

/// Forecasts per series, keyed by node label.
pub type ForecastFile = BTreeMap<String, BTreeMap<String, ForecastSpec>>;

#[derive(Debug, Serialize, Deserialize)]
struct ObservationRow {
    series_id: String,
    t: usize,
    value: u64,
}

/// Parses `series_id,t,value` rows. Every series must cover `t = 0..T`
/// exactly once; rows may appear in any order.
pub fn read_observations(path: &Path) -> Result<Observations> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| HarnessError::parse(path, e))?;
    let mut by_series: BTreeMap<String, BTreeMap<usize, u64>> = BTreeMap::new();
    for row in rdr.deserialize() {
        let row: ObservationRow = row.map_err(|e| HarnessError::parse(path, e))?;
        if by_series
            .entry(row.series_id.clone())
            .or_default()
            .insert(row.t, row.value)
            .is_some()
        {
            return Err(HarnessError::parse(
                path,
                format!("series {} has t={} twice", row.series_id, row.t),
            ));
        }
    }
    let mut out = Observations::new();
    for (id, points) in by_series {
        if points.keys().enumerate().any(|(i, &t)| i != t) {
            return Err(HarnessError::parse(
                path,
                format!("series {id} has gaps in t"),
            ));
        }
        out.insert(id, points.into_values().collect());
    }
    Ok(out)
}

pub fn observations_csv(obs: &Observations) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    for (id, values) in obs {
        for (t, &value) in values.iter().enumerate() {
            wtr.serialize(ObservationRow {
                series_id: id.clone(),
                t,
                value,
            })
            .expect("in-memory write");
        }
    }
    Ok(String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf8"))
}

pub fn read_forecasts(path: &Path) -> Result<ForecastFile> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::parse(path, e))
}

/// Writes `contents`, creating parent directories.
pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

/// CSV field quoting for labels and ids.
pub fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
