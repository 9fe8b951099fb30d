//! Pedestrian instance grouping.
//!
//! Each Pedestrian voxel is assigned to its nearest detected ground-plane
//! location (planar distance), provided that distance is below `r`. Merging
//! with the stuff classes yields the panoptic volume; pedestrian voxels that
//! no location claims are dropped to Free there.

use rayon::prelude::*;

use crate::bev::Detection;
use crate::error::{Error, Result};
use crate::volume::{panoptic_code, InstanceVolume, LabelVolume, PanopticVolume, SemanticClass, MAX_INSTANCE_ID};

/// Sorts detections by `(x, y)` so instance ids do not depend on input order.
/// Instance id `k` refers to element `k - 1` of the returned list.
pub fn normalize_detections(detections: &[Detection]) -> Vec<Detection> {
    let mut sorted = detections.to_vec();
    sorted.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)).then(b.score.total_cmp(&a.score)));
    sorted
}

/// Index of the nearest location (lowest index on ties) and its distance.
pub fn nearest_location(x: f64, y: f64, locations: &[Detection]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (j, l) in locations.iter().enumerate() {
        let d = ((x - l.x).powi(2) + (y - l.y).powi(2)).sqrt();
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((j, d));
        }
    }
    best
}

/// Groups Pedestrian voxels of `sem` around `detections`.
///
/// Detections are index-normalized first (see [`normalize_detections`]).
pub fn group_instances(sem: &LabelVolume, detections: &[Detection], r: f64) -> Result<InstanceVolume> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid(format!("grouping radius must be positive, got {r}")));
    }
    if detections.len() > MAX_INSTANCE_ID as usize {
        return Err(Error::invalid(format!("{} detections exceed the instance id range", detections.len())));
    }
    let locations = normalize_detections(detections);
    let spec = sem.spec;
    let [_, ny, nz] = spec.dims;
    let mut ids = vec![0u32; spec.len()];
    if locations.is_empty() {
        return Ok(InstanceVolume { spec, ids });
    }
    // assignment depends only on the column, so resolve it once per (ix, iy)
    ids.par_chunks_mut(nz).enumerate().for_each(|(cell, column)| {
        let labels = &sem.labels[cell * nz..(cell + 1) * nz];
        if !labels.contains(&SemanticClass::Pedestrian) {
            return;
        }
        let c = spec.center_unchecked([cell / ny, cell % ny, 0]);
        let id = match nearest_location(c.x, c.y, &locations) {
            Some((j, d)) if d < r => j as u32 + 1,
            _ => return,
        };
        for (slot, &l) in column.iter_mut().zip(labels) {
            if l == SemanticClass::Pedestrian {
                *slot = id;
            }
        }
    });
    Ok(InstanceVolume { spec, ids })
}

/// Stuff voxels keep their class, assigned pedestrian voxels take their
/// instance, everything else becomes Free.
pub fn merge_panoptic(sem: &LabelVolume, inst: &InstanceVolume) -> Result<PanopticVolume> {
    if sem.spec != inst.spec {
        return Err(Error::SpecMismatch);
    }
    let codes = sem.labels.par_iter().zip(&inst.ids).map(|(&l, &id)| panoptic_code(l, id)).collect();
    Ok(PanopticVolume { spec: sem.spec, codes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::VoxelGridSpec;

    fn det(x: f64, y: f64) -> Detection {
        Detection { x, y, score: 0.9 }
    }

    #[test]
    fn nearest_and_radius() {
        let locs = [det(1.25, 1.0), det(2.0, 1.0)];
        assert_eq!(nearest_location(1.0, 1.0, &locs).map(|(j, _)| j), Some(0));
        // equidistant resolves to the lower index
        assert_eq!(nearest_location(1.625, 1.0, &locs).map(|(j, _)| j), Some(0));

        let spec = VoxelGridSpec::new([0.95, 0.95, 0.0], 0.1, [1, 1, 1]).unwrap();
        let mut sem = LabelVolume::free(spec);
        sem.set([0, 0, 0], SemanticClass::Pedestrian, 0);
        let inst = group_instances(&sem, &locs, 0.5).unwrap();
        assert_eq!(inst.ids, vec![1]);

        let far = group_instances(&sem, &[det(1.6, 1.0), det(1.0, 0.4)], 0.5).unwrap();
        assert_eq!(far.ids, vec![0]);
        assert!(group_instances(&sem, &locs, 0.0).is_err());
    }

    #[test]
    fn merge_rules() {
        let spec = VoxelGridSpec::new([0.0; 3], 0.1, [3, 1, 2]).unwrap();
        let mut sem = LabelVolume::free(spec);
        sem.set([0, 0, 0], SemanticClass::Ground, 0);
        sem.set([1, 0, 0], SemanticClass::Wall, 0);
        sem.set([2, 0, 1], SemanticClass::Pedestrian, 0);

        let none = group_instances(&sem, &[], 0.5).unwrap();
        let pan = merge_panoptic(&sem, &none).unwrap();
        // floating pedestrian voxels vanish without detections
        assert_eq!(pan.codes, vec![2, 0, 3, 0, 0, 0]);

        let inst = group_instances(&sem, &[det(0.25, 0.05)], 0.5).unwrap();
        let pan = merge_panoptic(&sem, &inst).unwrap();
        assert_eq!(pan.codes, vec![2, 0, 3, 0, 0, 1001]);

        let other = InstanceVolume::unassigned(VoxelGridSpec::new([0.0; 3], 0.1, [1, 1, 1]).unwrap());
        assert!(matches!(merge_panoptic(&sem, &other), Err(Error::SpecMismatch)));
    }

    #[test]
    fn no_pedestrians_keeps_semantics() {
        let spec = VoxelGridSpec::new([0.0; 3], 0.1, [2, 2, 2]).unwrap();
        let mut sem = LabelVolume::free(spec);
        sem.set([1, 1, 0], SemanticClass::Others, 0);
        let inst = group_instances(&sem, &[det(0.1, 0.1)], 0.5).unwrap();
        let pan = merge_panoptic(&sem, &inst).unwrap();
        let back = pan.to_label_volume();
        assert_eq!(back.labels, sem.labels);
    }
}
