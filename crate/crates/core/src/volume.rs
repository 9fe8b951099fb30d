//! Label volumes and the integer label codes shared by grids and images.
//!
//! Label codes:
//!
//! * semantic: `0 Free, 1 Pedestrian, 2 Ground, 3 Wall, 4 Others`
//! * instance: `0` unassigned, otherwise the instance id
//! * panoptic: `0 Free`, stuff classes keep their semantic code (2, 3, 4),
//!   pedestrian instance `k` is `1000 + k`

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::VoxelGridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[repr(u8)]
pub enum SemanticClass {
    #[default]
    Free = 0,
    Pedestrian = 1,
    Ground = 2,
    Wall = 3,
    Others = 4,
}

impl SemanticClass {
    pub const ALL: [SemanticClass; 5] = [
        SemanticClass::Free,
        SemanticClass::Pedestrian,
        SemanticClass::Ground,
        SemanticClass::Wall,
        SemanticClass::Others,
    ];
    pub const STUFF: [SemanticClass; 3] = [SemanticClass::Ground, SemanticClass::Wall, SemanticClass::Others];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(SemanticClass::Free),
            1 => Some(SemanticClass::Pedestrian),
            2 => Some(SemanticClass::Ground),
            3 => Some(SemanticClass::Wall),
            4 => Some(SemanticClass::Others),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SemanticClass::Free => "free",
            SemanticClass::Pedestrian => "pedestrian",
            SemanticClass::Ground => "ground",
            SemanticClass::Wall => "wall",
            SemanticClass::Others => "others",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name().eq_ignore_ascii_case(name))
    }

    pub fn is_stuff(self) -> bool {
        matches!(self, SemanticClass::Ground | SemanticClass::Wall | SemanticClass::Others)
    }

    /// Rank used when several labels compete for one voxel with equal support.
    pub fn priority(self) -> u8 {
        match self {
            SemanticClass::Pedestrian => 4,
            SemanticClass::Wall => 3,
            SemanticClass::Others => 2,
            SemanticClass::Ground => 1,
            SemanticClass::Free => 0,
        }
    }
}

pub const PANOPTIC_INSTANCE_BASE: u32 = 1000;

/// Largest instance id that still fits a 16-bit label image as a panoptic code.
pub const MAX_INSTANCE_ID: u32 = u16::MAX as u32 - PANOPTIC_INSTANCE_BASE;

pub fn panoptic_code(class: SemanticClass, instance: u32) -> u32 {
    match class {
        SemanticClass::Pedestrian if instance > 0 => PANOPTIC_INSTANCE_BASE + instance,
        SemanticClass::Pedestrian | SemanticClass::Free => 0,
        stuff => u32::from(stuff.code()),
    }
}

/// Semantic class and instance id carried by a panoptic code.
pub fn decode_panoptic(code: u32) -> Option<(SemanticClass, u32)> {
    if code > PANOPTIC_INSTANCE_BASE {
        return Some((SemanticClass::Pedestrian, code - PANOPTIC_INSTANCE_BASE));
    }
    match SemanticClass::from_code(code)? {
        SemanticClass::Pedestrian => None,
        c => Some((c, 0)),
    }
}

/// Read access shared by every voxel label volume; code 0 means empty space.
pub trait VoxelLabels: Sync {
    fn spec(&self) -> &VoxelGridSpec;
    fn code(&self, idx: usize) -> u32;
}

/// Semantic labels with the instance ids of pedestrian voxels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    pub spec: VoxelGridSpec,
    pub labels: Vec<SemanticClass>,
    /// 0 where the voxel carries no instance.
    pub instances: Vec<u32>,
}

impl LabelVolume {
    pub fn free(spec: VoxelGridSpec) -> Self {
        LabelVolume { spec, labels: vec![SemanticClass::Free; spec.len()], instances: vec![0; spec.len()] }
    }

    pub fn from_parts(spec: VoxelGridSpec, labels: Vec<SemanticClass>, instances: Vec<u32>) -> Result<Self> {
        if labels.len() != spec.len() || instances.len() != spec.len() {
            return Err(Error::shape(format!(
                "label volume needs {} voxels, got {} labels / {} instances",
                spec.len(),
                labels.len(),
                instances.len()
            )));
        }
        if let Some(i) = labels.iter().zip(&instances).position(|(&l, &id)| id != 0 && l != SemanticClass::Pedestrian) {
            return Err(Error::invalid(format!("voxel {i} has an instance id but is not Pedestrian")));
        }
        Ok(LabelVolume { spec, labels, instances })
    }

    pub fn get(&self, ijk: [usize; 3]) -> SemanticClass {
        self.labels[self.spec.linear_index(ijk)]
    }

    pub fn set(&mut self, ijk: [usize; 3], label: SemanticClass, instance: u32) {
        let i = self.spec.linear_index(ijk);
        self.labels[i] = label;
        self.instances[i] = if label == SemanticClass::Pedestrian { instance } else { 0 };
    }

    pub fn class_counts(&self) -> [u64; 5] {
        let mut counts = [0u64; 5];
        for l in &self.labels {
            counts[*l as usize] += 1;
        }
        counts
    }

    pub fn instance_volume(&self) -> InstanceVolume {
        InstanceVolume { spec: self.spec, ids: self.instances.clone() }
    }

    /// Panoptic codes from the stored instance ids.
    pub fn panoptic(&self) -> PanopticVolume {
        let codes = self.labels.iter().zip(&self.instances).map(|(&l, &id)| panoptic_code(l, id)).collect();
        PanopticVolume { spec: self.spec, codes }
    }
}

impl VoxelLabels for LabelVolume {
    fn spec(&self) -> &VoxelGridSpec {
        &self.spec
    }
    fn code(&self, idx: usize) -> u32 {
        u32::from(self.labels[idx].code())
    }
}

/// Per-voxel pedestrian instance ids; 0 is unassigned.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceVolume {
    pub spec: VoxelGridSpec,
    pub ids: Vec<u32>,
}

impl InstanceVolume {
    pub fn unassigned(spec: VoxelGridSpec) -> Self {
        InstanceVolume { spec, ids: vec![0; spec.len()] }
    }
}

impl VoxelLabels for InstanceVolume {
    fn spec(&self) -> &VoxelGridSpec {
        &self.spec
    }
    fn code(&self, idx: usize) -> u32 {
        self.ids[idx]
    }
}

/// Free, stuff classes and pedestrian instances in one code per voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct PanopticVolume {
    pub spec: VoxelGridSpec,
    pub codes: Vec<u32>,
}

impl PanopticVolume {
    pub fn from_codes(spec: VoxelGridSpec, codes: Vec<u32>) -> Result<Self> {
        if codes.len() != spec.len() {
            return Err(Error::shape(format!("panoptic volume needs {} voxels, got {}", spec.len(), codes.len())));
        }
        if let Some(bad) = codes.iter().find(|&&c| decode_panoptic(c).is_none()) {
            return Err(Error::invalid(format!("invalid panoptic code {bad}")));
        }
        Ok(PanopticVolume { spec, codes })
    }

    /// Semantic labels and instance ids implied by the codes.
    pub fn to_label_volume(&self) -> LabelVolume {
        let mut labels = Vec::with_capacity(self.codes.len());
        let mut instances = Vec::with_capacity(self.codes.len());
        for &c in &self.codes {
            let (class, id) = decode_panoptic(c).unwrap_or((SemanticClass::Free, 0));
            labels.push(class);
            instances.push(id);
        }
        LabelVolume { spec: self.spec, labels, instances }
    }
}

impl VoxelLabels for PanopticVolume {
    fn spec(&self) -> &VoxelGridSpec {
        &self.spec
    }
    fn code(&self, idx: usize) -> u32 {
        self.codes[idx]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panoptic_codes_round_trip() {
        for class in SemanticClass::ALL {
            for id in [0u32, 1, 7, MAX_INSTANCE_ID] {
                let code = panoptic_code(class, id);
                let (c, i) = decode_panoptic(code).unwrap();
                match class {
                    SemanticClass::Pedestrian if id > 0 => assert_eq!((c, i), (class, id)),
                    SemanticClass::Pedestrian | SemanticClass::Free => assert_eq!((c, i), (SemanticClass::Free, 0)),
                    _ => assert_eq!((c, i), (class, 0)),
                }
            }
        }
        assert!(decode_panoptic(1).is_none());
        assert!(decode_panoptic(5).is_none());
        assert!(decode_panoptic(1000).is_none());
        assert!(u16::try_from(panoptic_code(SemanticClass::Pedestrian, MAX_INSTANCE_ID)).is_ok());
    }

    #[test]
    fn label_volume_rejects_stray_instances() {
        let spec = VoxelGridSpec::new([0.0; 3], 0.1, [1, 1, 2]).unwrap();
        assert!(LabelVolume::from_parts(spec, vec![SemanticClass::Ground; 2], vec![0, 3]).is_err());
        assert!(LabelVolume::from_parts(spec, vec![SemanticClass::Pedestrian; 2], vec![0, 3]).is_ok());
        assert!(LabelVolume::from_parts(spec, vec![SemanticClass::Free; 3], vec![0; 3]).is_err());
    }

    #[test]
    fn class_names() {
        for c in SemanticClass::ALL {
            assert_eq!(SemanticClass::from_name(c.name()), Some(c));
            assert_eq!(SemanticClass::from_code(u32::from(c.code())), Some(c));
        }
    }
}
