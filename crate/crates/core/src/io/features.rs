//! Dense float fields as raw little-endian `f32` plus a JSON sidecar at
//! `<path>.json` holding the shape.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_bytes, read_text, write_bytes, FormatError};
use crate::bev::{BevGrid, BevMap};
use crate::geometry::VoxelGridSpec;
use crate::view_transform::{FeatureMap, FeatureVolume};

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum Sidecar {
    FeatureMap { channels: usize, height: usize, width: usize },
    /// Raw file: values, then one `u32` valid-view count per voxel.
    FeatureVolume { channels: usize, dims: [usize; 3], origin: [f64; 3], voxel_size: f64 },
    BevMap { dims: [usize; 2], origin: [f64; 2], cell_size: f64 },
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn write_with_sidecar(path: &Path, meta: &Sidecar, raw: &[u8]) -> Result<(), FormatError> {
    write_bytes(path, raw)?;
    let mut text = serde_json::to_string_pretty(meta)?;
    text.push('\n');
    write_bytes(&sidecar_path(path), text.as_bytes())
}

fn read_with_sidecar(path: &Path) -> Result<(Sidecar, Vec<u8>), FormatError> {
    let meta: Sidecar = serde_json::from_str(&read_text(&sidecar_path(path))?)?;
    Ok((meta, read_bytes(path)?))
}

fn f32_bytes(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect()
}

fn check_len(raw: &[u8], expected: usize) -> Result<(), FormatError> {
    match raw.len().cmp(&expected) {
        std::cmp::Ordering::Less => Err(FormatError::Truncated { expected: expected as u64, found: raw.len() as u64 }),
        std::cmp::Ordering::Greater => Err(FormatError::TrailingBytes((raw.len() - expected) as u64)),
        std::cmp::Ordering::Equal => Ok(()),
    }
}

fn checked_count(dims: &[usize]) -> Result<usize, FormatError> {
    dims.iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .filter(|n| n.checked_mul(8).is_some())
        .ok_or_else(|| FormatError::Header(format!("shape {dims:?} overflows")))
}

fn floats(raw: &[u8]) -> Vec<f64> {
    raw.chunks_exact(4).map(|b| f64::from(f32::from_le_bytes(b.try_into().unwrap()))).collect()
}

pub fn save_feature_map(map: &FeatureMap, path: &Path) -> Result<(), FormatError> {
    let meta = Sidecar::FeatureMap { channels: map.channels, height: map.height, width: map.width };
    write_with_sidecar(path, &meta, &f32_bytes(&map.data))
}

pub fn load_feature_map(path: &Path) -> Result<FeatureMap, FormatError> {
    match read_with_sidecar(path)? {
        (Sidecar::FeatureMap { channels, height, width }, raw) => {
            check_len(&raw, checked_count(&[channels, height, width, 4])?)?;
            FeatureMap::new(channels, height, width, floats(&raw)).map_err(|e| FormatError::Header(e.to_string()))
        }
        (other, _) => Err(FormatError::Header(format!("expected a feature map sidecar, found {other:?}"))),
    }
}

pub fn save_feature_volume(vol: &FeatureVolume, path: &Path) -> Result<(), FormatError> {
    let meta = Sidecar::FeatureVolume {
        channels: vol.channels,
        dims: vol.spec.dims,
        origin: vol.spec.origin,
        voxel_size: vol.spec.voxel_size,
    };
    let mut raw = f32_bytes(&vol.values);
    raw.extend(vol.valid_count.iter().flat_map(|c| c.to_le_bytes()));
    write_with_sidecar(path, &meta, &raw)
}

pub fn load_feature_volume(path: &Path) -> Result<FeatureVolume, FormatError> {
    match read_with_sidecar(path)? {
        (Sidecar::FeatureVolume { channels, dims, origin, voxel_size }, raw) => {
            let spec = VoxelGridSpec::new(origin, voxel_size, dims).map_err(|e| FormatError::Header(e.to_string()))?;
            let n = checked_count(&dims)?;
            let nv = checked_count(&[n, channels])?;
            check_len(&raw, checked_count(&[nv + n, 4])?)?;
            let (vals, counts) = raw.split_at(nv * 4);
            Ok(FeatureVolume {
                spec,
                channels,
                values: floats(vals),
                valid_count: counts.chunks_exact(4).map(|b| u32::from_le_bytes(b.try_into().unwrap())).collect(),
            })
        }
        (other, _) => Err(FormatError::Header(format!("expected a feature volume sidecar, found {other:?}"))),
    }
}

pub fn save_bev_map(map: &BevMap, path: &Path) -> Result<(), FormatError> {
    let meta = Sidecar::BevMap { dims: map.grid.dims, origin: map.grid.origin, cell_size: map.grid.cell_size };
    write_with_sidecar(path, &meta, &f32_bytes(&map.values))
}

pub fn load_bev_map(path: &Path) -> Result<BevMap, FormatError> {
    match read_with_sidecar(path)? {
        (Sidecar::BevMap { dims, origin, cell_size }, raw) => {
            let grid = BevGrid::new(origin, cell_size, dims).map_err(|e| FormatError::Header(e.to_string()))?;
            check_len(&raw, checked_count(&[dims[0], dims[1], 4])?)?;
            BevMap::from_values(grid, floats(&raw)).map_err(|e| FormatError::Header(e.to_string()))
        }
        (other, _) => Err(FormatError::Header(format!("expected a BEV map sidecar, found {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.f32");
        let map = FeatureMap::new(2, 2, 3, (0..12).map(|i| f64::from(i) * 0.5).collect()).unwrap();
        save_feature_map(&map, &p).unwrap();
        assert_eq!(load_feature_map(&p).unwrap(), map);

        let spec = VoxelGridSpec::new([0.5, 0.0, -1.0], 0.25, [2, 1, 2]).unwrap();
        let vol = FeatureVolume { spec, channels: 2, values: vec![1.0, -2.0, 0.0, 0.75, 3.0, 4.0, 5.5, 6.0], valid_count: vec![1, 0, 2, 3] };
        let q = dir.path().join("v.f32");
        save_feature_volume(&vol, &q).unwrap();
        assert_eq!(load_feature_volume(&q).unwrap(), vol);
        assert!(load_feature_map(&q).is_err());

        let grid = BevGrid::new([0.0, 0.0], 0.1, [2, 2]).unwrap();
        let bev = BevMap::from_values(grid, vec![0.0, 0.25, 1.0, 0.5]).unwrap();
        let r = dir.path().join("b.f32");
        save_bev_map(&bev, &r).unwrap();
        assert_eq!(load_bev_map(&r).unwrap(), bev);
        std::fs::write(&r, [0u8; 3]).unwrap();
        assert!(matches!(load_bev_map(&r), Err(FormatError::Truncated { .. })));
    }
}
