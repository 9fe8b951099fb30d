//! ASCII PLY export of occupied voxels.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{write_bytes, FormatError};
use crate::volume::{decode_panoptic, SemanticClass, VoxelLabels};

/// RGB color per label code.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Palette {
    pub colors: BTreeMap<u32, [u8; 3]>,
}

impl Palette {
    pub fn semantic() -> Self {
        let mut colors = BTreeMap::new();
        colors.insert(SemanticClass::Pedestrian as u32, [220, 20, 60]);
        colors.insert(SemanticClass::Ground as u32, [128, 64, 128]);
        colors.insert(SemanticClass::Wall as u32, [102, 102, 156]);
        colors.insert(SemanticClass::Others as u32, [250, 170, 30]);
        Palette { colors }
    }

    /// Semantic colors for stuff codes and a distinct color per instance code
    /// present in `vol`.
    pub fn panoptic<V: VoxelLabels + ?Sized>(vol: &V) -> Self {
        let mut p = Self::semantic();
        for idx in 0..vol.spec().len() {
            let code = vol.code(idx);
            if let Some((SemanticClass::Pedestrian, id)) = decode_panoptic(code) {
                p.colors.entry(code).or_insert_with(|| instance_color(id));
            }
        }
        p
    }

    /// A color for every nonzero code in an instance volume.
    pub fn instances<V: VoxelLabels + ?Sized>(vol: &V) -> Self {
        let mut colors = BTreeMap::new();
        for idx in 0..vol.spec().len() {
            let id = vol.code(idx);
            if id != 0 {
                colors.entry(id).or_insert_with(|| instance_color(id));
            }
        }
        Palette { colors }
    }
}

/// Golden-angle hue walk, so neighboring ids get distant colors.
fn instance_color(id: u32) -> [u8; 3] {
    let h = (f64::from(id) * 137.507_764) % 360.0 / 60.0;
    let x = 1.0 - (h % 2.0 - 1.0).abs();
    let (r, g, b) = match h as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    [r, g, b].map(|c: f64| (55.0 + 200.0 * c).round() as u8)
}

/// One vertex per nonzero voxel, at its center, colored by `palette`.
pub fn export_ply<V: VoxelLabels + ?Sized>(vol: &V, palette: &Palette, path: &Path) -> Result<(), FormatError> {
    let spec = vol.spec();
    let mut body = String::new();
    let mut count = 0usize;
    for idx in 0..spec.len() {
        let code = vol.code(idx);
        if code == 0 {
            continue;
        }
        let [r, g, b] = *palette.colors.get(&code).ok_or_else(|| FormatError::Value(format!("no palette color for label {code}")))?;
        let c = spec.center_unchecked(spec.unravel(idx));
        writeln!(body, "{} {} {} {r} {g} {b}", c.x, c.y, c.z).unwrap();
        count += 1;
    }
    let header = format!(
        "ply\nformat ascii 1.0\nelement vertex {count}\nproperty float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n"
    );
    write_bytes(path, (header + &body).as_bytes())
}
