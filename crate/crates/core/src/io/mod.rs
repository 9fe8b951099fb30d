//! File formats and the dataset directory layout.
//!
//! * voxel grids: `MVPO` binary files (see [`grid`])
//! * depth maps: little-endian PFM
//! * label masks: 16-bit binary PGM
//! * cameras: calibration JSON
//! * locations and detections: CSV
//! * feature maps and volumes: raw little-endian `f32` with a JSON sidecar
//! * visualization: ASCII PLY point clouds

use std::path::{Path, PathBuf};

mod calibration;
mod features;
pub mod grid;
mod layout;
mod locations;
mod pfm_pgm;
mod ply;

pub use calibration::{load_calibration, parse_calibration, save_calibration, CalibrationEntry};
pub use features::{
    load_bev_map, load_feature_map, load_feature_volume, save_bev_map, save_feature_map, save_feature_volume,
};
pub use grid::{decode_grid, encode_grid, load_grid, save_grid, Grid, GridKind, GRID_HEADER_LEN};
pub use layout::DatasetLayout;
pub use locations::{read_locations, write_detections, write_locations, LocationRecord};
pub use pfm_pgm::{decode_pfm, decode_pgm, encode_pfm, encode_pgm, load_pfm, load_pgm, save_pfm, save_pgm};
pub use ply::{export_ply, Palette};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: &'static str, found: String },
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("unknown payload kind {0}")]
    UnknownKind(u8),
    #[error("expected a {expected} grid, found {found}")]
    KindMismatch { expected: &'static str, found: &'static str },
    #[error("truncated: need {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(u64),
    #[error("grid dimensions {0:?} overflow")]
    DimOverflow([u32; 3]),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("invalid value: {0}")]
    Value(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>, FormatError> {
    std::fs::read(path).map_err(|source| FormatError::Io { path: path.to_path_buf(), source })
}

pub(crate) fn read_text(path: &Path) -> Result<String, FormatError> {
    std::fs::read_to_string(path).map_err(|source| FormatError::Io { path: path.to_path_buf(), source })
}

/// Writes `bytes`, creating parent directories.
pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    let io = |source| FormatError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, bytes).map_err(io)
}

/// The `f64` whose shortest decimal form matches that of `v`, so values
/// written from decimals such as 0.1 read back unchanged.
pub(crate) fn widen_f32(v: f32) -> f64 {
    if v.is_finite() {
        v.to_string().parse().unwrap_or(f64::from(v))
    } else {
        f64::from(v)
    }
}
