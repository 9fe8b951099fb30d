//! Ground-plane locations as CSV: `frame,x_m,y_m` plus an optional `score`
//! (detections) or `instance` (ground truth) column.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_bytes, write_bytes, FormatError};
use crate::bev::Detection;
use crate::scenegen::GtLocation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocationRecord {
    pub frame: u32,
    pub x_m: f64,
    pub y_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<u32>,
}

impl LocationRecord {
    pub fn detection(&self) -> Detection {
        Detection { x: self.x_m, y: self.y_m, score: self.score.unwrap_or(1.0) }
    }
}

fn write_records(path: &Path, header: [&str; 4], rows: impl Iterator<Item = [String; 4]>) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| FormatError::Value(e.to_string()))?;
    write_bytes(path, &bytes)
}

/// Writes `(frame, detection)` rows with full round-trip precision.
pub fn write_detections(path: &Path, rows: &[(u32, Detection)]) -> Result<(), FormatError> {
    write_records(
        path,
        ["frame", "x_m", "y_m", "score"],
        rows.iter().map(|(f, d)| [f.to_string(), d.x.to_string(), d.y.to_string(), d.score.to_string()]),
    )
}

pub fn write_locations(path: &Path, rows: &[(u32, GtLocation)]) -> Result<(), FormatError> {
    write_records(
        path,
        ["frame", "x_m", "y_m", "instance"],
        rows.iter().map(|(f, l)| [f.to_string(), l.x.to_string(), l.y.to_string(), l.instance.to_string()]),
    )
}

/// Reads either flavor; rows with non-finite coordinates are rejected.
pub fn read_locations(path: &Path) -> Result<Vec<LocationRecord>, FormatError> {
    let bytes = read_bytes(path)?;
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes.as_slice());
    let mut out = Vec::new();
    for rec in r.deserialize() {
        let rec: LocationRecord = rec?;
        if !rec.x_m.is_finite() || !rec.y_m.is_finite() || rec.score.is_some_and(|s| !s.is_finite()) {
            return Err(FormatError::Value(format!("non-finite value in frame {}", rec.frame)));
        }
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        let dets = vec![(0, Detection { x: 0.1, y: -3.25, score: 0.875 }), (4, Detection { x: 1.0 / 3.0, y: 2.0, score: 1.0 })];
        write_detections(&p, &dets).unwrap();
        let back = read_locations(&p).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!((back[1].frame, back[1].detection()), (4, dets[1].1));
        assert_eq!(back[0].instance, None);

        let q = dir.path().join("g.csv");
        write_locations(&q, &[(2, GtLocation { x: 3.0, y: 4.0, instance: 1 })]).unwrap();
        let back = read_locations(&q).unwrap();
        assert_eq!((back[0].instance, back[0].score), (Some(1), None));

        std::fs::write(&q, "frame,x_m,y_m\n0,nan,1\n").unwrap();
        assert!(matches!(read_locations(&q), Err(FormatError::Value(_))));
        std::fs::write(&q, "frame,x_m\n0,1\n").unwrap();
        assert!(matches!(read_locations(&q), Err(FormatError::Csv(_))));
    }
}
