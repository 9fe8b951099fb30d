//! Camera and voxel-grid coordinate math.
//!
//! Conventions used throughout the crate:
//!
//! * Poses map world to camera: `x_cam = R * p_world + t`.
//! * Camera axes are x right, y down, z forward; world z is vertical.
//! * Pixel `(u, v)` samples the continuous image coordinate `(u, v)`, so texel
//!   centers sit on integers.
//! * Voxel `(ix, iy, iz)` covers the half-open box
//!   `origin + [i, i + 1) * voxel_size` on every axis.

use nalgebra::{Matrix3, Point3, Vector3};

use crate::error::{Error, Result};
use crate::view_transform::FeatureMap;

const ORTHONORMAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let k = CameraIntrinsics { fx, fy, cx, cy, width, height };
        k.validate()?;
        Ok(k)
    }

    /// Pinhole intrinsics with the principal point at the image center and a
    /// horizontal field of view in radians.
    pub fn from_fov(hfov: f64, width: u32, height: u32) -> Result<Self> {
        if !(hfov > 0.0 && hfov < std::f64::consts::PI) {
            return Err(Error::InvalidCamera(format!("field of view {hfov} rad out of (0, pi)")));
        }
        let f = 0.5 * f64::from(width) / (0.5 * hfov).tan();
        Self::new(f, f, 0.5 * f64::from(width), 0.5 * f64::from(height), width, height)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidCamera("non-finite intrinsic parameter".into()));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::InvalidCamera(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidCamera("image size must be at least 1x1".into()));
        }
        Ok(())
    }

    /// Intrinsics of an image resampled by `s`: `(s fx, s fy, s cx, s cy)`.
    pub fn scaled(&self, s: f64) -> Self {
        CameraIntrinsics {
            fx: s * self.fx,
            fy: s * self.fy,
            cx: s * self.cx,
            cy: s * self.cy,
            width: ((f64::from(self.width) * s).round() as u32).max(1),
            height: ((f64::from(self.height) * s).round() as u32).max(1),
        }
    }

    /// Intrinsics for the same field of view rendered at `width x height`.
    pub fn resized(&self, width: u32, height: u32) -> Self {
        let sx = f64::from(width) / f64::from(self.width);
        let sy = f64::from(height) / f64::from(self.height);
        CameraIntrinsics {
            fx: sx * self.fx,
            fy: sy * self.fy,
            cx: sx * self.cx,
            cy: sy * self.cy,
            width,
            height,
        }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }
}

/// Rigid world-to-camera transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl CameraPose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let pose = CameraPose { rotation, translation };
        pose.validate()?;
        Ok(pose)
    }

    pub fn identity() -> Self {
        CameraPose { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    /// Camera at `eye` looking at `target`, with world +z as up.
    ///
    /// A straight-down view uses world +x as the image right direction.
    pub fn look_at(eye: Point3<f64>, target: Point3<f64>) -> Result<Self> {
        let forward = target - eye;
        let norm = forward.norm();
        if !(norm > 0.0) {
            return Err(Error::InvalidCamera("eye and target coincide".into()));
        }
        let forward = forward / norm;
        let up = Vector3::z();
        let mut right = forward.cross(&up);
        if right.norm() < 1e-9 {
            right = Vector3::x();
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * eye.coords);
        Self::new(rotation, translation)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rotation.iter().chain(self.translation.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidCamera("non-finite pose entry".into()));
        }
        let gram = self.rotation.transpose() * self.rotation;
        let err = (gram - Matrix3::identity()).abs().max();
        if err > ORTHONORMAL_TOL {
            return Err(Error::InvalidCamera(format!("rotation is not orthonormal (|RtR - I| = {err:e})")));
        }
        let det = self.rotation.determinant();
        if (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::InvalidCamera(format!("rotation determinant is {det}, expected +1")));
        }
        Ok(())
    }

    pub fn world_to_camera(&self, p: &Point3<f64>) -> Vector3<f64> {
        self.rotation * p.coords + self.translation
    }

    pub fn camera_to_world(&self, x: &Vector3<f64>) -> Point3<f64> {
        Point3::from(self.rotation.transpose() * (x - self.translation))
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Point3<f64> {
        Point3::from(-(self.rotation.transpose() * self.translation))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub name: String,
    pub intrinsics: CameraIntrinsics,
    pub pose: CameraPose,
}

impl CameraModel {
    pub fn new(name: impl Into<String>, intrinsics: CameraIntrinsics, pose: CameraPose) -> Result<Self> {
        intrinsics.validate()?;
        pose.validate()?;
        Ok(CameraModel { name: name.into(), intrinsics, pose })
    }

    /// World-space unit direction of the ray through continuous pixel `(u, v)`
    /// of an image rendered with intrinsics `k`.
    pub fn ray_direction(&self, k: &CameraIntrinsics, u: f64, v: f64) -> Vector3<f64> {
        let d = Vector3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
        (self.pose.rotation.transpose() * d).normalize()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    /// Camera-space z, meters.
    pub depth: f64,
}

/// Projects a world point with intrinsics scaled by `scale`.
///
/// Returns `None` for points at or behind the camera plane.
pub fn project_point(cam: &CameraModel, p: &Point3<f64>, scale: f64) -> Option<Projection> {
    let x = cam.pose.world_to_camera(p);
    if !(x.z > 0.0) {
        return None;
    }
    let k = &cam.intrinsics;
    Some(Projection {
        u: scale * (k.fx * x.x / x.z + k.cx),
        v: scale * (k.fy * x.y / x.z + k.cy),
        depth: x.z,
    })
}

/// Lifts pixel `(u, v)` at camera-space depth `depth` into world space:
/// `x = depth * K^-1 [u v 1]^T`, then the inverse pose.
pub fn backproject_pixel(cam: &CameraModel, u: f64, v: f64, depth: f64) -> Result<Point3<f64>> {
    if !(depth > 0.0) || !depth.is_finite() {
        return Err(Error::invalid(format!("back-projection depth must be positive and finite, got {depth}")));
    }
    let k = &cam.intrinsics;
    let x = Vector3::new(depth * (u - k.cx) / k.fx, depth * (v - k.cy) / k.fy, depth);
    Ok(cam.pose.camera_to_world(&x))
}

/// Axis-aligned world box, closed at `min` and open at `max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn new(min: Point3<f64>, max: Point3<f64>) -> Result<Self> {
        if (0..3).any(|a| !(min[a] < max[a])) {
            return Err(Error::invalid(format!("degenerate box {min:?}..{max:?}")));
        }
        Ok(Aabb { min, max })
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] < self.max[a])
    }

    /// Slab test; returns the parametric interval `[t_enter, t_exit]` of the
    /// ray `origin + t * dir` inside the closed box, or `None` if it misses.
    pub fn ray_interval(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for a in 0..3 {
            if dir[a] == 0.0 {
                if origin[a] < self.min[a] || origin[a] > self.max[a] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / dir[a];
            let mut ta = (self.min[a] - origin[a]) * inv;
            let mut tb = (self.max[a] - origin[a]) * inv;
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
        }
        (t0 <= t1).then_some((t0, t1))
    }
}

/// Regular voxel grid. Z is the vertical axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelGridSpec {
    /// Minimum corner, meters.
    pub origin: [f64; 3],
    pub voxel_size: f64,
    pub dims: [usize; 3],
}

impl VoxelGridSpec {
    pub fn new(origin: [f64; 3], voxel_size: f64, dims: [usize; 3]) -> Result<Self> {
        if !(voxel_size > 0.0) || !voxel_size.is_finite() {
            return Err(Error::invalid(format!("voxel size must be positive, got {voxel_size}")));
        }
        if dims.contains(&0) {
            return Err(Error::invalid(format!("grid dims must be >= 1, got {dims:?}")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::invalid("grid origin must be finite"));
        }
        dims.iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::invalid(format!("grid dims {dims:?} overflow")))?;
        Ok(VoxelGridSpec { origin, voxel_size, dims })
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(ix * Y + iy) * Z + iz`.
    #[inline]
    pub fn linear_index(&self, [ix, iy, iz]: [usize; 3]) -> usize {
        (ix * self.dims[1] + iy) * self.dims[2] + iz
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let z = self.dims[2];
        let y = self.dims[1];
        [idx / (y * z), (idx / z) % y, idx % z]
    }

    pub fn world_to_voxel(&self, p: &Point3<f64>) -> Option<[usize; 3]> {
        let mut out = [0usize; 3];
        for a in 0..3 {
            let f = ((p[a] - self.origin[a]) / self.voxel_size).floor();
            if !(f >= 0.0 && f < self.dims[a] as f64) {
                return None;
            }
            out[a] = f as usize;
        }
        Some(out)
    }

    pub fn voxel_center(&self, index: [usize; 3]) -> Result<Point3<f64>> {
        if (0..3).any(|a| index[a] >= self.dims[a]) {
            return Err(Error::invalid(format!("voxel index {index:?} outside dims {:?}", self.dims)));
        }
        Ok(self.center_unchecked(index))
    }

    #[inline]
    pub(crate) fn center_unchecked(&self, index: [usize; 3]) -> Point3<f64> {
        Point3::new(
            self.origin[0] + (index[0] as f64 + 0.5) * self.voxel_size,
            self.origin[1] + (index[1] as f64 + 0.5) * self.voxel_size,
            self.origin[2] + (index[2] as f64 + 0.5) * self.voxel_size,
        )
    }

    pub fn max_corner(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| self.origin[a] + self.dims[a] as f64 * self.voxel_size)
    }

    pub fn bounds(&self) -> Aabb {
        Aabb { min: Point3::from(self.origin), max: Point3::from(self.max_corner()) }
    }
}

/// Bilinear sample of every channel at continuous `(u, v)`, written to `out`.
///
/// Coordinates are clamped to `[0, W-1] x [0, H-1]` first, so the border
/// texels extend outward.
pub fn bilinear_sample(map: &FeatureMap, u: f64, v: f64, out: &mut [f64]) {
    debug_assert_eq!(out.len(), map.channels);
    let (w, h) = (map.width, map.height);
    let u = u.clamp(0.0, (w - 1) as f64);
    let v = v.clamp(0.0, (h - 1) as f64);
    let x0 = (u.floor() as usize).min(w - 1);
    let y0 = (v.floor() as usize).min(h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let ax = u - x0 as f64;
    let ay = v - y0 as f64;
    let plane = w * h;
    for (c, o) in out.iter_mut().enumerate() {
        let base = c * plane;
        let f00 = map.data[base + y0 * w + x0];
        let f10 = map.data[base + y0 * w + x1];
        let f01 = map.data[base + y1 * w + x0];
        let f11 = map.data[base + y1 * w + x1];
        let top = f00 + ax * (f10 - f00);
        let bottom = f01 + ax * (f11 - f01);
        *o = top + ay * (bottom - top);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cam(k: CameraIntrinsics, pose: CameraPose) -> CameraModel {
        CameraModel::new("c", k, pose).unwrap()
    }

    #[test]
    fn pinhole_arithmetic() {
        let k = CameraIntrinsics::new(100.0, 100.0, 320.0, 180.0, 640, 360).unwrap();
        let c = cam(k, CameraPose::identity());
        let p = project_point(&c, &Point3::new(1.0, 2.0, 5.0), 1.0).unwrap();
        assert_eq!((p.u, p.v, p.depth), (340.0, 220.0, 5.0));
        assert!(project_point(&c, &Point3::new(0.3, 0.1, -1.0), 1.0).is_none());
        assert!(project_point(&c, &Point3::new(0.3, 0.1, 0.0), 1.0).is_none());
    }

    #[test]
    fn backprojection_cases() {
        let k = CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, 10, 10).unwrap();
        let c = cam(k, CameraPose::identity());
        let p = backproject_pixel(&c, 2.0, 3.0, 4.0).unwrap();
        assert_eq!(p, Point3::new(8.0, 12.0, 4.0));

        let moved = cam(k, CameraPose::new(Matrix3::identity(), Vector3::new(0.0, 0.0, -4.0)).unwrap());
        let p = backproject_pixel(&moved, 2.0, 3.0, 4.0).unwrap();
        assert_eq!(p, Point3::new(8.0, 12.0, 8.0));

        assert!(backproject_pixel(&c, 0.0, 0.0, 0.0).is_err());
        assert!(backproject_pixel(&c, 0.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn round_trip_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let k = CameraIntrinsics::new(800.0, 790.0, 640.0, 360.0, 1280, 720).unwrap();
        let pose = CameraPose::look_at(Point3::new(-3.0, 2.0, 5.0), Point3::new(4.0, 6.0, 0.0)).unwrap();
        let c = cam(k, pose);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let p = Point3::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(-2.0..4.0));
            let Some(pr) = project_point(&c, &p, 1.0) else { continue };
            let q = backproject_pixel(&c, pr.u, pr.v, pr.depth).unwrap();
            worst = worst.max((q - p).norm());
        }
        assert!(worst < 1e-9, "worst {worst}");
    }

    #[test]
    fn scaled_projection_is_proportional() {
        let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap();
        let c = cam(k, CameraPose::look_at(Point3::new(0.0, -5.0, 3.0), Point3::origin()).unwrap());
        let p = Point3::new(0.4, 0.2, 0.9);
        let full = project_point(&c, &p, 1.0).unwrap();
        for s in [0.25, 0.5, 0.75, 1.0] {
            let q = project_point(&c, &p, s).unwrap();
            assert!((q.u - s * full.u).abs() < 1e-9);
            assert!((q.v - s * full.v).abs() < 1e-9);
            assert_eq!(q.depth, full.depth);
        }
    }

    #[test]
    fn look_at_sees_target_on_axis() {
        let k = CameraIntrinsics::new(100.0, 100.0, 50.0, 40.0, 100, 80).unwrap();
        for eye in [Point3::new(3.0, -4.0, 2.0), Point3::new(0.0, 0.0, 9.0)] {
            let c = cam(k, CameraPose::look_at(eye, Point3::new(0.0, 0.0, 0.0)).unwrap());
            let p = project_point(&c, &Point3::origin(), 1.0).unwrap();
            assert!((p.u - 50.0).abs() < 1e-9 && (p.v - 40.0).abs() < 1e-9);
            assert!((c.pose.center() - eye).norm() < 1e-12);
        }
        // world up maps to image up for a horizontal view
        let c = cam(k, CameraPose::look_at(Point3::new(-5.0, 0.0, 1.0), Point3::new(0.0, 0.0, 1.0)).unwrap());
        let hi = project_point(&c, &Point3::new(0.0, 0.0, 2.0), 1.0).unwrap();
        assert!(hi.v < 40.0);
    }

    #[test]
    fn pose_validation() {
        let reflect = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(CameraPose::new(reflect, Vector3::zeros()).is_err());
        let skew = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(CameraPose::new(skew, Vector3::zeros()).is_err());
        assert!(CameraIntrinsics::new(0.0, 1.0, 0.0, 0.0, 1, 1).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, 0, 1).is_err());
    }

    #[test]
    fn voxel_indexing() {
        let spec = VoxelGridSpec::new([0.0; 3], 0.1, [4, 4, 4]).unwrap();
        assert_eq!(spec.world_to_voxel(&Point3::new(0.05, 0.15, 0.25)), Some([0, 1, 2]));
        assert_eq!(spec.world_to_voxel(&Point3::new(0.4, 0.4, 0.4)), None);
        assert_eq!(spec.world_to_voxel(&Point3::new(0.1, 0.1, 0.4)), None);
        assert_eq!(spec.world_to_voxel(&Point3::new(-1e-12, 0.1, 0.1)), None);
        let c = spec.voxel_center([0, 0, 0]).unwrap();
        assert!((c - Point3::new(0.05, 0.05, 0.05)).norm() < 1e-15);
        let c = spec.voxel_center([1, 2, 3]).unwrap();
        assert!((c - Point3::new(0.15, 0.25, 0.35)).norm() < 1e-15);
        assert!(spec.voxel_center([4, 0, 0]).is_err());
    }

    #[test]
    fn center_index_identity_exhaustive() {
        let spec = VoxelGridSpec::new([-0.4, 1.3, -0.05], 0.1, [8, 8, 8]).unwrap();
        for idx in 0..spec.len() {
            let ijk = spec.unravel(idx);
            assert_eq!(spec.linear_index(ijk), idx);
            let c = spec.voxel_center(ijk).unwrap();
            assert_eq!(spec.world_to_voxel(&c), Some(ijk));
        }
    }

    #[test]
    fn bilinear_cases() {
        let map = FeatureMap::new(1, 2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let mut out = [0.0];
        bilinear_sample(&map, 1.0, 1.0, &mut out);
        assert_eq!(out[0], 5.0);
        bilinear_sample(&map, 0.5, 0.0, &mut out);
        assert_eq!(out[0], 1.5);
        bilinear_sample(&map, 0.5, 0.5, &mut out);
        assert_eq!(out[0], 3.0);
        // clamped to the border texel
        bilinear_sample(&map, 7.0, -3.0, &mut out);
        assert_eq!(out[0], 3.0);

        let constant = FeatureMap::new(2, 3, 3, [vec![0.7; 9], vec![-2.0; 9]].concat()).unwrap();
        let mut out = [0.0; 2];
        for (u, v) in [(0.0, 0.0), (2.0, 2.0), (1.3, 0.2), (2.5, -1.0)] {
            bilinear_sample(&constant, u, v, &mut out);
            assert_eq!(out, [0.7, -2.0]);
        }

        let single = FeatureMap::new(1, 1, 1, vec![4.0]).unwrap();
        let mut out = [0.0];
        bilinear_sample(&single, 0.3, 0.9, &mut out);
        assert_eq!(out[0], 4.0);
    }

    #[test]
    fn aabb_ray_interval() {
        let b = Aabb::new(Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 1.0, 1.0)).unwrap();
        let (t0, t1) = b.ray_interval(&Point3::new(-1.0, 0.5, 0.5), &Vector3::x()).unwrap();
        assert_eq!((t0, t1), (1.0, 2.0));
        assert!(b.ray_interval(&Point3::new(-1.0, 2.0, 0.5), &Vector3::x()).is_none());
        assert!(b.contains(&Point3::new(0.0, 0.5, 0.99)));
        assert!(!b.contains(&Point3::new(1.0, 0.5, 0.5)));
    }

    proptest::proptest! {
        #[test]
        fn bilinear_is_convex(vals in proptest::collection::vec(-5.0f64..5.0, 12), u in -1.0f64..5.0, v in -1.0f64..4.0) {
            let map = FeatureMap::new(1, 3, 4, vals.clone()).unwrap();
            let mut out = [0.0];
            bilinear_sample(&map, u, v, &mut out);
            let uc = u.clamp(0.0, 3.0);
            let vc = v.clamp(0.0, 2.0);
            let xs = [uc.floor() as usize, (uc.floor() as usize + 1).min(3)];
            let ys = [vc.floor() as usize, (vc.floor() as usize + 1).min(2)];
            let vals = &vals;
            let support: Vec<f64> = ys.iter().flat_map(|&y| xs.iter().map(move |&x| vals[y * 4 + x])).collect();
            let lo = support.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = support.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            proptest::prop_assert!(out[0] >= lo - 1e-12 && out[0] <= hi + 1e-12);
        }
    }
}
