//! File formats: JSON object maps and configs, PLY labeled clouds, TUM
//! trajectories, PGM frames and CSV curves.

mod map;
mod pgm;
mod ply;
mod tum;

pub use map::{load_object_map, object_map_from_json, object_map_to_json, save_object_map};
pub use pgm::{read_pgm, write_depth_pgm, write_label_pgm, PgmImage, DEPTH_UNITS_PER_METER};
pub use ply::{load_labeled_cloud, parse_labeled_cloud, save_labeled_cloud, PlyFormat};
pub use tum::{load_trajectory, parse_trajectory, save_trajectory, trajectory_to_tum};

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quality::PrPoint;

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Any serde type from a JSON file, e.g. an ablation config.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::parse(path, e.to_string()))
}

/// Pretty-printed JSON with a trailing newline.
pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::parse(path, e.to_string()))?;
    s.push('\n');
    write_bytes(path, s.as_bytes())
}

/// `recall,precision` rows with a header line.
pub fn curve_to_csv(points: &[PrPoint]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["recall", "precision"]).expect("in-memory write");
    for p in points {
        w.write_record([p.recall.to_string(), p.precision.to_string()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

pub fn save_curve_csv(points: &[PrPoint], path: &Path) -> Result<()> {
    write_bytes(path, curve_to_csv(points).as_bytes())
}

pub fn load_curve_csv(path: &Path) -> Result<Vec<PrPoint>> {
    let text = read_text(path)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().map_err(|e| Error::parse(path, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["recall", "precision"] {
        return Err(Error::parse(path, "expected header `recall,precision`"));
    }
    r.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(|e| Error::parse(path, e.to_string()))?;
            let field = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::parse(path, format!("row {}: bad number in column {}", i + 2, k + 1)))
            };
            Ok(PrPoint {
                recall: field(0)?,
                precision: field(1)?,
            })
        })
        .collect()
}
