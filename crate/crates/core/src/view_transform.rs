//! Lifting per-view 2D feature maps into a voxel feature volume.
//!
//! Every voxel center is projected into each view with the feature-map
//! intrinsics, sampled bilinearly where it lands inside the map, and the
//! samples are averaged.

use rayon::prelude::*;

use crate::config::FEATURE_SCALE;
use crate::error::{Error, Result};
use crate::geometry::{bilinear_sample, project_point, CameraModel, VoxelGridSpec};

/// `channels x height x width` values, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::shape(format!("feature map dims must be >= 1, got {channels}x{height}x{width}")));
        }
        if data.len() != channels * height * width {
            return Err(Error::shape(format!(
                "feature map {channels}x{height}x{width} needs {} values, got {}",
                channels * height * width,
                data.len()
            )));
        }
        Ok(FeatureMap { channels, height, width, data })
    }

    pub fn constant(channels: usize, height: usize, width: usize, value: f64) -> Self {
        FeatureMap { channels, height, width, data: vec![value; channels * height * width] }
    }

    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }
}

/// Lifted features, voxel-major: `values[voxel * channels + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVolume {
    pub spec: VoxelGridSpec,
    pub channels: usize,
    pub values: Vec<f64>,
    /// Number of views whose frustum contains the voxel center.
    pub valid_count: Vec<u32>,
}

impl FeatureVolume {
    pub fn voxel(&self, idx: usize) -> &[f64] {
        &self.values[idx * self.channels..(idx + 1) * self.channels]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftConfig {
    /// Feature-map resolution relative to the camera image.
    pub scale: f64,
    /// Divide by the total number of views instead of the per-voxel valid count.
    pub strict_view_mean: bool,
}

impl Default for LiftConfig {
    fn default() -> Self {
        LiftConfig { scale: FEATURE_SCALE, strict_view_mean: false }
    }
}

impl LiftConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale <= 1.0) {
            return Err(Error::invalid(format!("feature scale must be in (0, 1], got {}", self.scale)));
        }
        Ok(())
    }
}

/// Whether a projection at feature resolution lands on the map.
///
/// The upper bounds are exclusive to pair with the half-open texel cells.
#[inline]
fn in_frustum(u: f64, v: f64, width: usize, height: usize) -> bool {
    u >= 0.0 && u < width as f64 && v >= 0.0 && v < height as f64
}

/// Per-voxel visibility of `cam` for a feature map of `(height, width)`.
pub fn frustum_mask(cam: &CameraModel, spec: &VoxelGridSpec, feat_dims: (usize, usize), scale: f64) -> Vec<bool> {
    let (h, w) = feat_dims;
    (0..spec.len())
        .into_par_iter()
        .map(|idx| {
            let c = spec.center_unchecked(spec.unravel(idx));
            project_point(cam, &c, scale).is_some_and(|p| in_frustum(p.u, p.v, w, h))
        })
        .collect()
}

fn check_map_matches(cam: &CameraModel, map: &FeatureMap, scale: f64) -> Result<()> {
    let k = cam.intrinsics.scaled(scale);
    if map.width != k.width as usize || map.height != k.height as usize {
        return Err(Error::shape(format!(
            "feature map for camera '{}' is {}x{}, expected {}x{} at scale {scale}",
            cam.name, map.width, map.height, k.width, k.height
        )));
    }
    Ok(())
}

/// Averages bilinear feature samples over the views that see each voxel.
///
/// Voxels seen by no view are zero with a valid count of 0.
pub fn lift_features(
    cams: &[CameraModel],
    maps: &[FeatureMap],
    spec: &VoxelGridSpec,
    config: &LiftConfig,
) -> Result<FeatureVolume> {
    config.validate()?;
    if cams.is_empty() {
        return Err(Error::invalid("at least one view is required"));
    }
    if cams.len() != maps.len() {
        return Err(Error::shape(format!("{} cameras but {} feature maps", cams.len(), maps.len())));
    }
    let channels = maps[0].channels;
    if let Some(m) = maps.iter().find(|m| m.channels != channels) {
        return Err(Error::shape(format!("feature maps disagree on channels ({channels} vs {})", m.channels)));
    }
    for (cam, map) in cams.iter().zip(maps) {
        check_map_matches(cam, map, config.scale)?;
    }

    let n_views = cams.len() as f64;
    let mut values = vec![0.0; spec.len() * channels];
    let mut valid_count = vec![0u32; spec.len()];
    values
        .par_chunks_mut(channels)
        .zip(valid_count.par_iter_mut())
        .enumerate()
        .for_each_init(
            || vec![0.0; channels],
            |sample, (idx, (acc, count))| {
                let center = spec.center_unchecked(spec.unravel(idx));
                for (cam, map) in cams.iter().zip(maps) {
                    let Some(p) = project_point(cam, &center, config.scale) else { continue };
                    if !in_frustum(p.u, p.v, map.width, map.height) {
                        continue;
                    }
                    bilinear_sample(map, p.u, p.v, sample);
                    *count += 1;
                    // running mean: equal samples reproduce themselves exactly
                    let k = f64::from(*count);
                    for (a, s) in acc.iter_mut().zip(sample.iter()) {
                        *a += (s - *a) / k;
                    }
                }
                if config.strict_view_mean && *count > 0 {
                    let frac = f64::from(*count) / n_views;
                    acc.iter_mut().for_each(|a| *a *= frac);
                }
            },
        );
    Ok(FeatureVolume { spec: *spec, channels, values, valid_count })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CameraIntrinsics, CameraPose};
    use nalgebra::Point3;

    fn front_camera() -> CameraModel {
        let k = CameraIntrinsics::new(80.0, 80.0, 40.0, 40.0, 80, 80).unwrap();
        let pose = CameraPose::look_at(Point3::new(0.4, 0.4, -5.0), Point3::new(0.4, 0.4, 0.4)).unwrap();
        CameraModel::new("front", k, pose).unwrap()
    }

    #[test]
    fn mask_behind_and_ahead() {
        let k = CameraIntrinsics::new(40.0, 40.0, 20.0, 20.0, 40, 40).unwrap();
        let cam = CameraModel::new("c", k, CameraPose::identity()).unwrap();
        // single voxel centered 5 m ahead on the optical axis
        let ahead = VoxelGridSpec::new([-0.05, -0.05, 4.95], 0.1, [1, 1, 1]).unwrap();
        assert_eq!(frustum_mask(&cam, &ahead, (10, 10), 0.25), vec![true]);
        let behind = VoxelGridSpec::new([-0.05, -0.05, -5.05], 0.1, [1, 1, 1]).unwrap();
        assert_eq!(frustum_mask(&cam, &behind, (10, 10), 0.25), vec![false]);
    }

    #[test]
    fn two_views_average() {
        let cam = front_camera();
        let spec = VoxelGridSpec::new([0.0; 3], 0.1, [8, 8, 8]).unwrap();
        let maps = vec![FeatureMap::constant(1, 20, 20, 3.0), FeatureMap::constant(1, 20, 20, 5.0)];
        let vol = lift_features(&[cam.clone(), cam], &maps, &spec, &LiftConfig::default()).unwrap();
        for idx in 0..spec.len() {
            assert_eq!(vol.valid_count[idx], 2);
            assert_eq!(vol.voxel(idx), &[4.0]);
        }
    }

    #[test]
    fn unseen_voxels_are_zero() {
        let cam = front_camera();
        let spec = VoxelGridSpec::new([100.0, 0.0, 0.0], 0.1, [2, 2, 2]).unwrap();
        let vol = lift_features(&[cam], &[FeatureMap::constant(2, 20, 20, 1.0)], &spec, &LiftConfig::default()).unwrap();
        assert!(vol.valid_count.iter().all(|&c| c == 0));
        assert!(vol.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_errors() {
        let cam = front_camera();
        let spec = VoxelGridSpec::new([0.0; 3], 0.1, [2, 2, 2]).unwrap();
        let cfg = LiftConfig::default();
        assert!(lift_features(&[], &[], &spec, &cfg).is_err());
        assert!(lift_features(std::slice::from_ref(&cam), &[], &spec, &cfg).is_err());
        assert!(lift_features(std::slice::from_ref(&cam), &[FeatureMap::constant(1, 19, 20, 0.0)], &spec, &cfg).is_err());
        let maps = [FeatureMap::constant(1, 20, 20, 0.0), FeatureMap::constant(2, 20, 20, 0.0)];
        assert!(lift_features(&[cam.clone(), cam], &maps, &spec, &cfg).is_err());
    }
}
