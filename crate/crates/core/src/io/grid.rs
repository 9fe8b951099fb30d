//! `MVPO` voxel grid files.
//!
//! Little-endian, 44-byte header:
//!
//! | offset | size | field                                          |
//! |--------|------|------------------------------------------------|
//! | 0      | 4    | magic `MVPO`                                   |
//! | 4      | 4    | version `u32` (1)                              |
//! | 8      | 1    | kind `u8`: 1 semantic, 2 instance, 3 panoptic  |
//! | 9      | 3    | zero padding                                   |
//! | 12     | 12   | dims X, Y, Z as `u32`                          |
//! | 24     | 4    | voxel size `f32`, meters                       |
//! | 28     | 12   | origin x, y, z as `f32`, meters                |
//! | 40     | 4    | reserved `u32` (0)                             |
//!
//! The payload follows in linear index order `(ix * Y + iy) * Z + iz`: one
//! `u8` per voxel for semantic grids, one `u32` for instance and panoptic.

use std::path::Path;

use super::{read_bytes, widen_f32, write_bytes, FormatError};
use crate::geometry::VoxelGridSpec;
use crate::volume::{decode_panoptic, InstanceVolume, LabelVolume, PanopticVolume, SemanticClass};

pub const GRID_MAGIC: &[u8; 4] = b"MVPO";
pub const GRID_VERSION: u32 = 1;
pub const GRID_HEADER_LEN: usize = 44;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum GridKind {
    Semantic = 1,
    Instance = 2,
    Panoptic = 3,
}

impl GridKind {
    fn from_u8(v: u8) -> Option<Self> {
        match v {
            1 => Some(GridKind::Semantic),
            2 => Some(GridKind::Instance),
            3 => Some(GridKind::Panoptic),
            _ => None,
        }
    }

    /// Payload bytes per voxel.
    pub fn width(self) -> usize {
        match self {
            GridKind::Semantic => 1,
            GridKind::Instance | GridKind::Panoptic => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GridKind::Semantic => "semantic",
            GridKind::Instance => "instance",
            GridKind::Panoptic => "panoptic",
        }
    }
}

/// A decoded grid file.
#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    /// Instance ids are all 0; they live in a separate instance grid.
    Semantic(LabelVolume),
    Instance(InstanceVolume),
    Panoptic(PanopticVolume),
}

impl Grid {
    pub fn kind(&self) -> GridKind {
        match self {
            Grid::Semantic(_) => GridKind::Semantic,
            Grid::Instance(_) => GridKind::Instance,
            Grid::Panoptic(_) => GridKind::Panoptic,
        }
    }

    pub fn spec(&self) -> &VoxelGridSpec {
        match self {
            Grid::Semantic(v) => &v.spec,
            Grid::Instance(v) => &v.spec,
            Grid::Panoptic(v) => &v.spec,
        }
    }

    fn mismatch(&self, expected: GridKind) -> FormatError {
        FormatError::KindMismatch { expected: expected.name(), found: self.kind().name() }
    }

    pub fn into_semantic(self) -> Result<LabelVolume, FormatError> {
        match self {
            Grid::Semantic(v) => Ok(v),
            other => Err(other.mismatch(GridKind::Semantic)),
        }
    }

    pub fn into_instance(self) -> Result<InstanceVolume, FormatError> {
        match self {
            Grid::Instance(v) => Ok(v),
            other => Err(other.mismatch(GridKind::Instance)),
        }
    }

    pub fn into_panoptic(self) -> Result<PanopticVolume, FormatError> {
        match self {
            Grid::Panoptic(v) => Ok(v),
            other => Err(other.mismatch(GridKind::Panoptic)),
        }
    }
}

/// Volumes that can be written as a grid file.
pub trait GridPayload {
    const KIND: GridKind;
    fn grid_spec(&self) -> &VoxelGridSpec;
    fn write_payload(&self, out: &mut Vec<u8>);
}

impl GridPayload for LabelVolume {
    const KIND: GridKind = GridKind::Semantic;
    fn grid_spec(&self) -> &VoxelGridSpec {
        &self.spec
    }
    fn write_payload(&self, out: &mut Vec<u8>) {
        out.extend(self.labels.iter().map(|l| l.code()));
    }
}

impl GridPayload for InstanceVolume {
    const KIND: GridKind = GridKind::Instance;
    fn grid_spec(&self) -> &VoxelGridSpec {
        &self.spec
    }
    fn write_payload(&self, out: &mut Vec<u8>) {
        out.extend(self.ids.iter().flat_map(|v| v.to_le_bytes()));
    }
}

impl GridPayload for PanopticVolume {
    const KIND: GridKind = GridKind::Panoptic;
    fn grid_spec(&self) -> &VoxelGridSpec {
        &self.spec
    }
    fn write_payload(&self, out: &mut Vec<u8>) {
        out.extend(self.codes.iter().flat_map(|v| v.to_le_bytes()));
    }
}

/// Serializes a volume. Spec values are stored as `f32`.
pub fn encode_grid<V: GridPayload>(vol: &V) -> Result<Vec<u8>, FormatError> {
    let spec = vol.grid_spec();
    let mut dims = [0u32; 3];
    for (out, &d) in dims.iter_mut().zip(&spec.dims) {
        *out = u32::try_from(d).map_err(|_| FormatError::Value(format!("grid dim {d} exceeds u32")))?;
    }
    let mut out = Vec::with_capacity(GRID_HEADER_LEN + spec.len() * V::KIND.width());
    out.extend_from_slice(GRID_MAGIC);
    out.extend_from_slice(&GRID_VERSION.to_le_bytes());
    out.push(V::KIND as u8);
    out.extend_from_slice(&[0; 3]);
    for d in dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    out.extend_from_slice(&(spec.voxel_size as f32).to_le_bytes());
    for o in spec.origin {
        out.extend_from_slice(&(o as f32).to_le_bytes());
    }
    out.extend_from_slice(&0u32.to_le_bytes());
    vol.write_payload(&mut out);
    Ok(out)
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn f32_at(b: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

/// Parses a grid file image, validating every header field and label code.
pub fn decode_grid(bytes: &[u8]) -> Result<Grid, FormatError> {
    if bytes.len() < 4 || &bytes[..4] != GRID_MAGIC {
        let found = String::from_utf8_lossy(&bytes[..bytes.len().min(4)]).into_owned();
        return Err(FormatError::BadMagic { expected: "MVPO", found });
    }
    if bytes.len() < GRID_HEADER_LEN {
        return Err(FormatError::Truncated { expected: GRID_HEADER_LEN as u64, found: bytes.len() as u64 });
    }
    let version = u32_at(bytes, 4);
    if version != GRID_VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let kind = GridKind::from_u8(bytes[8]).ok_or(FormatError::UnknownKind(bytes[8]))?;
    if bytes[9..12] != [0; 3] {
        return Err(FormatError::Header("nonzero padding".into()));
    }
    let dims = [u32_at(bytes, 12), u32_at(bytes, 16), u32_at(bytes, 20)];
    let voxel_size = f32_at(bytes, 24);
    let origin = [f32_at(bytes, 28), f32_at(bytes, 32), f32_at(bytes, 36)];
    if u32_at(bytes, 40) != 0 {
        return Err(FormatError::Header("nonzero reserved field".into()));
    }
    let payload_len = dims
        .iter()
        .try_fold(kind.width() as u64, |acc, &d| acc.checked_mul(u64::from(d)))
        .filter(|&n| usize::try_from(n).is_ok())
        .ok_or(FormatError::DimOverflow(dims))?;
    if dims.contains(&0) {
        return Err(FormatError::Header(format!("zero grid dimension {dims:?}")));
    }
    if !(voxel_size > 0.0) || !voxel_size.is_finite() {
        return Err(FormatError::Header(format!("voxel size {voxel_size}")));
    }
    if origin.iter().any(|o| !o.is_finite()) {
        return Err(FormatError::Header(format!("origin {origin:?}")));
    }
    let payload = &bytes[GRID_HEADER_LEN..];
    let have = payload.len() as u64;
    if have < payload_len {
        return Err(FormatError::Truncated { expected: GRID_HEADER_LEN as u64 + payload_len, found: bytes.len() as u64 });
    }
    if have > payload_len {
        return Err(FormatError::TrailingBytes(have - payload_len));
    }
    let spec = VoxelGridSpec::new(
        origin.map(widen_f32),
        widen_f32(voxel_size),
        dims.map(|d| d as usize),
    )
    .map_err(|e| FormatError::Header(e.to_string()))?;

    Ok(match kind {
        GridKind::Semantic => {
            let labels = payload
                .iter()
                .map(|&c| SemanticClass::from_code(u32::from(c)).ok_or_else(|| FormatError::Value(format!("semantic code {c}"))))
                .collect::<Result<Vec<_>, _>>()?;
            Grid::Semantic(LabelVolume { spec, instances: vec![0; labels.len()], labels })
        }
        GridKind::Instance => {
            Grid::Instance(InstanceVolume { spec, ids: payload.chunks_exact(4).map(|c| u32_at(c, 0)).collect() })
        }
        GridKind::Panoptic => {
            let codes: Vec<u32> = payload.chunks_exact(4).map(|c| u32_at(c, 0)).collect();
            if let Some(bad) = codes.iter().find(|&&c| decode_panoptic(c).is_none()) {
                return Err(FormatError::Value(format!("panoptic code {bad}")));
            }
            Grid::Panoptic(PanopticVolume { spec, codes })
        }
    })
}

pub fn save_grid<V: GridPayload>(vol: &V, path: &Path) -> Result<(), FormatError> {
    write_bytes(path, &encode_grid(vol)?)
}

pub fn load_grid(path: &Path) -> Result<Grid, FormatError> {
    decode_grid(&read_bytes(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let spec = VoxelGridSpec::new([-1.5, 2.0, 0.0], 0.1, [2, 3, 4]).unwrap();
        let bytes = encode_grid(&LabelVolume::free(spec)).unwrap();
        assert_eq!(bytes.len(), 44 + 24);
        assert_eq!(&bytes[..4], b"MVPO");
        assert_eq!(bytes[8], 1);
        assert_eq!(u32_at(&bytes, 16), 3);
        assert_eq!(f32_at(&bytes, 24), 0.1f32);
        assert_eq!(f32_at(&bytes, 28), -1.5f32);
    }

    #[test]
    fn full_scene_file_size() {
        let spec = VoxelGridSpec::new([0.0; 3], 0.1, [360, 120, 30]).unwrap();
        assert_eq!(encode_grid(&LabelVolume::free(spec)).unwrap().len(), 44 + 1_296_000);
    }

    #[test]
    fn decimal_spec_survives() {
        let spec = VoxelGridSpec::new([0.3, -12.7, 0.1], 0.1, [1, 1, 1]).unwrap();
        let back = decode_grid(&encode_grid(&InstanceVolume::unassigned(spec)).unwrap()).unwrap();
        assert_eq!(*back.spec(), spec);
    }

    #[test]
    fn typed_errors() {
        let spec = VoxelGridSpec::new([0.0; 3], 0.1, [2, 2, 2]).unwrap();
        let good = encode_grid(&InstanceVolume::unassigned(spec)).unwrap();
        let mut b = good.clone();
        b[0] = b'X';
        assert!(matches!(decode_grid(&b), Err(FormatError::BadMagic { .. })));
        let mut b = good.clone();
        b[4] = 2;
        assert!(matches!(decode_grid(&b), Err(FormatError::UnsupportedVersion(2))));
        assert!(matches!(decode_grid(&good[..good.len() - 1]), Err(FormatError::Truncated { .. })));
        assert!(matches!(decode_grid(&good[..20]), Err(FormatError::Truncated { .. })));
        let mut b = good.clone();
        b[12..24].copy_from_slice(&[0xff; 12]);
        assert!(matches!(decode_grid(&b), Err(FormatError::DimOverflow(_))));
        let mut b = good.clone();
        b.push(0);
        assert!(matches!(decode_grid(&b), Err(FormatError::TrailingBytes(1))));
        let mut b = good.clone();
        b[8] = 9;
        assert!(matches!(decode_grid(&b), Err(FormatError::UnknownKind(9))));
        assert!(matches!(decode_grid(&good).unwrap().into_semantic(), Err(FormatError::KindMismatch { .. })));
    }
}
