//! On-disk artifact formats: versioned JSON documents for the grid,
//! adjacency, and sequence sets, plus the delimited prediction dump.
//!
//! All writers are deterministic: identical inputs produce byte-identical
//! files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::TripSequence;
use crate::error::{Error, Result};
use crate::geo::GridId;
use crate::{Adjacency, GeoPoint, GridSpec};

pub const ARTIFACT_VERSION: u32 = 1;

fn check_version(kind: &str, version: u32) -> Result<()> {
    if version != ARTIFACT_VERSION {
        return Err(Error::Version(format!(
            "{kind} artifact version {version} unsupported (expected {ARTIFACT_VERSION})"
        )));
    }
    Ok(())
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))
}

fn write_string(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)
        .map_err(|e| Error::Data(format!("cannot write {}: {e}", path.display())))
}

/// Versioned grid document.
#[derive(Debug, Serialize, Deserialize)]
pub struct GridFile {
    pub version: u32,
    pub grid: GridSpec,
}

pub fn save_grid(path: &Path, grid: &GridSpec) -> Result<()> {
    let doc = GridFile {
        version: ARTIFACT_VERSION,
        grid: grid.clone(),
    };
    write_string(path, &to_json(&doc)?)
}

pub fn load_grid(path: &Path) -> Result<GridSpec> {
    let doc: GridFile = from_json(&read_to_string(path)?)?;
    check_version("grid", doc.version)?;
    Ok(doc.grid)
}

/// Versioned adjacency document: the raw (pre-normalization) matrix over
/// the occupied cells that define the graph nodes.
#[derive(Debug, Serialize, Deserialize)]
pub struct AdjacencyFile {
    pub version: u32,
    pub occupied: Vec<GridId>,
    pub tau_km: f64,
    pub adjacency: Adjacency,
}

pub fn save_adjacency(
    path: &Path,
    occupied: &[GridId],
    tau_km: f64,
    adjacency: &Adjacency,
) -> Result<()> {
    let doc = AdjacencyFile {
        version: ARTIFACT_VERSION,
        occupied: occupied.to_vec(),
        tau_km,
        adjacency: adjacency.clone(),
    };
    write_string(path, &to_json(&doc)?)
}

pub fn load_adjacency(path: &Path) -> Result<(Vec<GridId>, f64, Adjacency)> {
    let doc: AdjacencyFile = from_json(&read_to_string(path)?)?;
    check_version("adjacency", doc.version)?;
    Ok((doc.occupied, doc.tau_km, doc.adjacency))
}

/// Versioned sequence set.
#[derive(Debug, Serialize, Deserialize)]
pub struct SequenceFile {
    pub version: u32,
    pub sequences: Vec<TripSequence>,
}

pub fn save_sequences(path: &Path, sequences: &[TripSequence]) -> Result<()> {
    let doc = SequenceFile {
        version: ARTIFACT_VERSION,
        sequences: sequences.to_vec(),
    };
    write_string(path, &to_json(&doc)?)
}

pub fn load_sequences(path: &Path) -> Result<Vec<TripSequence>> {
    let doc: SequenceFile = from_json(&read_to_string(path)?)?;
    check_version("sequence", doc.version)?;
    Ok(doc.sequences)
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string(value).map_err(|e| Error::Data(format!("artifact encode: {e}")))
}

fn from_json<T: for<'de> Deserialize<'de>>(s: &str) -> Result<T> {
    serde_json::from_str(s).map_err(|e| Error::Version(format!("artifact parse: {e}")))
}

/// One row of a prediction dump.
#[derive(Debug, Clone, PartialEq)]
pub struct DumpRow {
    pub sample_id: usize,
    pub argmax_grid: usize,
    pub pred: GeoPoint,
    pub truth: GeoPoint,
}

/// Write prediction rows as delimited text with the header
/// `sample_id,argmax_grid,pred_lon,pred_lat,true_lon,true_lat`.
pub fn save_dump(path: &Path, rows: &[DumpRow]) -> Result<()> {
    let mut out = String::from("sample_id,argmax_grid,pred_lon,pred_lat,true_lon,true_lat\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.sample_id,
            row.argmax_grid,
            row.pred.lon,
            row.pred.lat,
            row.truth.lon,
            row.truth.lat
        ));
    }
    write_string(path, &out)
}

/// Read a prediction dump for external scoring.
pub fn load_dump(path: &Path) -> Result<Vec<DumpRow>> {
    let text = read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != "sample_id,argmax_grid,pred_lon,pred_lat,true_lon,true_lat" {
                return Err(Error::Data(format!("unexpected dump header: {line}")));
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Data(format!(
                "dump line {} has {} fields",
                i + 1,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Data(format!("bad number {s} on dump line {}", i + 1)))
        };
        rows.push(DumpRow {
            sample_id: fields[0]
                .parse()
                .map_err(|_| Error::Data(format!("bad sample id on dump line {}", i + 1)))?,
            argmax_grid: fields[1]
                .parse()
                .map_err(|_| Error::Data(format!("bad grid id on dump line {}", i + 1)))?,
            pred: GeoPoint {
                lon: parse(fields[2])?,
                lat: parse(fields[3])?,
            },
            truth: GeoPoint {
                lon: parse(fields[4])?,
                lat: parse(fields[5])?,
            },
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic_city, SyntheticSpec};
    use crate::geo::build_adjacency;

    #[test]
    fn grid_roundtrip() {
        let spec = SyntheticSpec {
            n_taxis: 3,
            trips_per_taxi: 10,
            ..Default::default()
        };
        let (grid, _, _) = generate_synthetic_city(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.json");
        save_grid(&path, &grid).unwrap();
        let back = load_grid(&path).unwrap();
        assert_eq!(grid, back);
    }

    #[test]
    fn adjacency_roundtrip_and_version_check() {
        let spec = SyntheticSpec {
            n_rows: 3,
            n_cols: 3,
            n_taxis: 3,
            trips_per_taxi: 10,
            ..Default::default()
        };
        let (grid, _, trips) = generate_synthetic_city(&spec).unwrap();
        let occupied = crate::data::occupied_cells(&trips, &grid);
        let adj = build_adjacency(&grid, &occupied, 1.5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("adjacency.json");
        save_adjacency(&path, &occupied, 1.5, &adj).unwrap();
        let (occ2, tau, adj2) = load_adjacency(&path).unwrap();
        assert_eq!(occupied, occ2);
        assert_eq!(tau, 1.5);
        assert_eq!(adj, adj2);

        // Corrupt the version field.
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("\"version\":1", "\"version\":9");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(load_adjacency(&path), Err(Error::Version(_))));
    }

    #[test]
    fn dump_roundtrip() {
        let rows = vec![DumpRow {
            sample_id: 3,
            argmax_grid: 17,
            pred: GeoPoint {
                lon: 10.5,
                lat: 45.25,
            },
            truth: GeoPoint {
                lon: 10.6,
                lat: 45.30,
            },
        }];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dump.csv");
        save_dump(&path, &rows).unwrap();
        assert_eq!(load_dump(&path).unwrap(), rows);
    }
}
