//! Occupancy labels from labeled depth maps.
//!
//! Every labeled pixel with a finite depth is lifted to a world point; the
//! points of all views are pooled, cropped to the area of interest, and each
//! voxel takes the label most of its points carry.

use std::collections::HashMap;

use nalgebra::Point3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{backproject_pixel, Aabb, CameraModel, VoxelGridSpec};
use crate::image::{DepthImage, LabelImage};
use crate::volume::{LabelVolume, SemanticClass};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPoint {
    pub position: Point3<f64>,
    pub label: SemanticClass,
    /// Present exactly for Pedestrian points.
    pub instance: Option<u32>,
}

/// One world point per labeled pixel with finite positive depth.
///
/// Free pixels and pixels without a usable depth are skipped. Pedestrian
/// pixels must carry a nonzero instance id.
pub fn depth_to_points(
    cam: &CameraModel,
    depth: &DepthImage,
    semantic: &LabelImage,
    instance: &LabelImage,
) -> Result<Vec<LabeledPoint>> {
    let (w, h) = (cam.intrinsics.width as usize, cam.intrinsics.height as usize);
    for (what, dw, dh) in [
        ("depth", depth.width, depth.height),
        ("semantic", semantic.width, semantic.height),
        ("instance", instance.width, instance.height),
    ] {
        if (dw, dh) != (w, h) {
            return Err(Error::shape(format!(
                "{what} map of camera '{}' is {dw}x{dh}, camera image is {w}x{h}",
                cam.name
            )));
        }
    }
    let rows: Result<Vec<Vec<LabeledPoint>>> = (0..h)
        .into_par_iter()
        .map(|row| {
            let mut out = Vec::new();
            for col in 0..w {
                let i = row * w + col;
                let z = depth.data[i];
                if !z.is_finite() || z <= 0.0 {
                    continue;
                }
                let code = semantic.data[i];
                let label = SemanticClass::from_code(code)
                    .ok_or_else(|| Error::invalid(format!("unknown semantic code {code} at pixel ({col}, {row})")))?;
                if label == SemanticClass::Free {
                    continue;
                }
                let instance = if label == SemanticClass::Pedestrian {
                    match instance.data[i] {
                        0 => {
                            return Err(Error::invalid(format!(
                                "pedestrian pixel ({col}, {row}) of camera '{}' has no instance id",
                                cam.name
                            )))
                        }
                        id => Some(id),
                    }
                } else {
                    None
                };
                let position = backproject_pixel(cam, col as f64, row as f64, z)?;
                out.push(LabeledPoint { position, label, instance });
            }
            Ok(out)
        })
        .collect();
    Ok(rows?.into_iter().flatten().collect())
}

/// Label-count index of the four non-Free classes.
fn slot(label: SemanticClass) -> Option<usize> {
    match label {
        SemanticClass::Free => None,
        SemanticClass::Pedestrian => Some(0),
        SemanticClass::Ground => Some(1),
        SemanticClass::Wall => Some(2),
        SemanticClass::Others => Some(3),
    }
}

const SLOT_CLASS: [SemanticClass; 4] =
    [SemanticClass::Pedestrian, SemanticClass::Ground, SemanticClass::Wall, SemanticClass::Others];

/// Pools the points of all views into a label volume.
///
/// Points outside `aoi` are dropped, as are voxels whose center lies outside
/// it. Each voxel takes its most frequent label; equal counts resolve by
/// Pedestrian > Wall > Others > Ground. Pedestrian voxels take their most
/// frequent instance id, the smaller id on equal counts. The result does not
/// depend on the order of views or points.
pub fn fuse_and_voxelize(views: &[Vec<LabeledPoint>], spec: &VoxelGridSpec, aoi: &Aabb) -> LabelVolume {
    let mut counts = vec![[0u32; 4]; spec.len()];
    let mut instance_votes: HashMap<(usize, u32), u32> = HashMap::new();
    let mut center_inside: Vec<Option<bool>> = vec![None; spec.len()];

    for p in views.iter().flatten() {
        if !aoi.contains(&p.position) {
            continue;
        }
        let Some(ijk) = spec.world_to_voxel(&p.position) else { continue };
        let Some(s) = slot(p.label) else { continue };
        let idx = spec.linear_index(ijk);
        let inside = *center_inside[idx].get_or_insert_with(|| aoi.contains(&spec.center_unchecked(ijk)));
        if !inside {
            continue;
        }
        counts[idx][s] += 1;
        if let Some(id) = p.instance.filter(|_| p.label == SemanticClass::Pedestrian) {
            *instance_votes.entry((idx, id)).or_default() += 1;
        }
    }

    let mut vol = LabelVolume::free(*spec);
    for (idx, c) in counts.iter().enumerate() {
        let winner = (0..4)
            .filter(|&s| c[s] > 0)
            .max_by_key(|&s| (c[s], SLOT_CLASS[s].priority()));
        if let Some(s) = winner {
            vol.labels[idx] = SLOT_CLASS[s];
        }
    }

    let mut best: HashMap<usize, (u32, u32)> = HashMap::new();
    for (&(idx, id), &n) in &instance_votes {
        if vol.labels[idx] != SemanticClass::Pedestrian {
            continue;
        }
        let e = best.entry(idx).or_insert((id, n));
        if n > e.1 || (n == e.1 && id < e.0) {
            *e = (id, n);
        }
    }
    for (idx, (id, _)) in best {
        vol.instances[idx] = id;
    }
    vol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CameraIntrinsics, CameraPose};

    fn pt(x: f64, y: f64, z: f64, label: SemanticClass, instance: Option<u32>) -> LabeledPoint {
        LabeledPoint { position: Point3::new(x, y, z), label, instance }
    }

    fn grid() -> (VoxelGridSpec, Aabb) {
        let spec = VoxelGridSpec::new([0.0; 3], 0.1, [3, 3, 3]).unwrap();
        (spec, spec.bounds())
    }

    #[test]
    fn single_pixel_backprojects() {
        let k = CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, 1, 1).unwrap();
        let cam = CameraModel::new("c", k, CameraPose::identity()).unwrap();
        let depth = DepthImage::from_data(1, 1, vec![4.0]).unwrap();
        let sem = LabelImage::from_data(1, 1, vec![SemanticClass::Ground as u32]).unwrap();
        let inst = LabelImage::zeros(1, 1);
        let pts = depth_to_points(&cam, &depth, &sem, &inst).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].position, Point3::new(0.0, 0.0, 4.0));
        assert_eq!(pts[0].label, SemanticClass::Ground);

        let free = LabelImage::zeros(1, 1);
        assert!(depth_to_points(&cam, &depth, &free, &inst).unwrap().is_empty());
        let inf = DepthImage::from_data(1, 1, vec![f64::INFINITY]).unwrap();
        assert!(depth_to_points(&cam, &inf, &sem, &inst).unwrap().is_empty());
        assert!(depth_to_points(&cam, &depth, &LabelImage::zeros(2, 1), &inst).is_err());

        let ped = LabelImage::from_data(1, 1, vec![SemanticClass::Pedestrian as u32]).unwrap();
        assert!(depth_to_points(&cam, &depth, &ped, &inst).is_err());
        let id = LabelImage::from_data(1, 1, vec![5]).unwrap();
        assert_eq!(depth_to_points(&cam, &depth, &ped, &id).unwrap()[0].instance, Some(5));
    }

    #[test]
    fn empty_input_is_free() {
        let (spec, aoi) = grid();
        let vol = fuse_and_voxelize(&[], &spec, &aoi);
        assert!(vol.labels.iter().all(|&l| l == SemanticClass::Free));
    }

    #[test]
    fn bottom_slab() {
        let (spec, aoi) = grid();
        let pts: Vec<_> = (0..3)
            .flat_map(|i| (0..3).map(move |j| pt(0.05 + 0.1 * i as f64, 0.05 + 0.1 * j as f64, 0.02, SemanticClass::Ground, None)))
            .collect();
        let vol = fuse_and_voxelize(&[pts], &spec, &aoi);
        for idx in 0..spec.len() {
            let expect = if spec.unravel(idx)[2] == 0 { SemanticClass::Ground } else { SemanticClass::Free };
            assert_eq!(vol.labels[idx], expect);
        }
    }

    #[test]
    fn majority_and_ties() {
        let (spec, aoi) = grid();
        let views = vec![
            vec![pt(0.05, 0.05, 0.05, SemanticClass::Ground, None), pt(0.06, 0.05, 0.05, SemanticClass::Ground, None)],
            vec![pt(0.05, 0.06, 0.05, SemanticClass::Wall, None)],
        ];
        assert_eq!(fuse_and_voxelize(&views, &spec, &aoi).get([0, 0, 0]), SemanticClass::Ground);

        let tie = vec![
            vec![pt(0.15, 0.05, 0.05, SemanticClass::Ground, None), pt(0.15, 0.05, 0.06, SemanticClass::Wall, None)],
            vec![pt(0.15, 0.06, 0.05, SemanticClass::Pedestrian, Some(9)), pt(0.16, 0.05, 0.05, SemanticClass::Others, None)],
        ];
        let vol = fuse_and_voxelize(&tie, &spec, &aoi);
        assert_eq!(vol.get([1, 0, 0]), SemanticClass::Pedestrian);
        assert_eq!(vol.instances[spec.linear_index([1, 0, 0])], 9);

        let wall_others = vec![vec![pt(0.25, 0.05, 0.05, SemanticClass::Others, None), pt(0.25, 0.05, 0.06, SemanticClass::Wall, None)]];
        assert_eq!(fuse_and_voxelize(&wall_others, &spec, &aoi).get([2, 0, 0]), SemanticClass::Wall);
        let others_ground = vec![vec![pt(0.25, 0.05, 0.05, SemanticClass::Others, None), pt(0.25, 0.05, 0.06, SemanticClass::Ground, None)]];
        assert_eq!(fuse_and_voxelize(&others_ground, &spec, &aoi).get([2, 0, 0]), SemanticClass::Others);

        let ids = vec![vec![
            pt(0.05, 0.15, 0.05, SemanticClass::Pedestrian, Some(4)),
            pt(0.05, 0.15, 0.06, SemanticClass::Pedestrian, Some(2)),
        ]];
        assert_eq!(fuse_and_voxelize(&ids, &spec, &aoi).instances[spec.linear_index([0, 1, 0])], 2);
    }

    #[test]
    fn crop_to_aoi() {
        let (spec, _) = grid();
        let aoi = Aabb::new(Point3::new(0.0, 0.0, 0.0), Point3::new(0.14, 0.3, 0.3)).unwrap();
        let pts = vec![
            pt(0.05, 0.05, 0.05, SemanticClass::Others, None),
            // inside the box, but its voxel center (0.15) is not
            pt(0.12, 0.05, 0.05, SemanticClass::Others, None),
            pt(0.25, 0.05, 0.05, SemanticClass::Others, None),
        ];
        let vol = fuse_and_voxelize(&[pts], &spec, &aoi);
        assert_eq!(vol.get([0, 0, 0]), SemanticClass::Others);
        assert_eq!(vol.get([1, 0, 0]), SemanticClass::Free);
        assert_eq!(vol.get([2, 0, 0]), SemanticClass::Free);
    }
}
