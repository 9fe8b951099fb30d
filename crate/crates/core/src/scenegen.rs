//! Procedural labeled scenes with exact sensor renders.
//!
//! A scene is a ground slab, walls around its border, a few boxes and
//! pedestrians modeled as vertical capsules. Boxes are snapped to the voxel
//! grid: each face sits a tenth of a voxel outside the centers of its outer
//! voxel layer, so every surface point lies in a voxel whose center is inside
//! the box. Everything is a pure function of the config and its seed.

use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, CameraModel, CameraPose, VoxelGridSpec};
use crate::image::{DepthImage, LabelImage};
use crate::volume::{LabelVolume, SemanticClass};

pub const MIN_PEDESTRIAN_RADIUS: f64 = 0.15;
pub const MAX_PEDESTRIAN_RADIUS: f64 = 0.35;
pub const MIN_PEDESTRIAN_HEIGHT: f64 = 1.5;
pub const MAX_PEDESTRIAN_HEIGHT: f64 = 2.0;
/// Free planar space kept between two pedestrian capsules, meters.
pub const PEDESTRIAN_GAP: f64 = 0.5;
const PLACEMENT_TRIES: usize = 2000;
const HIT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    Box { min: [f64; 3], max: [f64; 3] },
    /// Vertical capsule standing on `base_z`; `height` includes both caps.
    Capsule { center: [f64; 2], base_z: f64, radius: f64, height: f64 },
}

impl Shape {
    pub fn contains(&self, p: &Point3<f64>) -> bool {
        match *self {
            Shape::Box { min, max } => (0..3).all(|a| p[a] >= min[a] && p[a] <= max[a]),
            Shape::Capsule { center, base_z, radius, height } => {
                let (za, zb) = (base_z + radius, base_z + height - radius);
                let dz = if p.z < za { p.z - za } else if p.z > zb { p.z - zb } else { 0.0 };
                let dx = p.x - center[0];
                let dy = p.y - center[1];
                dx * dx + dy * dy + dz * dz <= radius * radius
            }
        }
    }

    /// Nearest ray parameter `t > 0` where `origin + t * dir` meets the surface.
    pub fn intersect(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        match *self {
            Shape::Box { min, max } => ray_box(origin, dir, &min, &max),
            Shape::Capsule { center, base_z, radius, height } => {
                ray_capsule(origin, dir, center, base_z + radius, base_z + height - radius, radius)
            }
        }
    }

    /// World-space bounds `(min, max)`.
    pub fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        match *self {
            Shape::Box { min, max } => (min, max),
            Shape::Capsule { center, base_z, radius, height } => (
                [center[0] - radius, center[1] - radius, base_z],
                [center[0] + radius, center[1] + radius, base_z + height],
            ),
        }
    }
}

fn ray_box(o: &Point3<f64>, d: &Vector3<f64>, min: &[f64; 3], max: &[f64; 3]) -> Option<f64> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for a in 0..3 {
        if d[a] == 0.0 {
            if o[a] < min[a] || o[a] > max[a] {
                return None;
            }
            continue;
        }
        let ta = (min[a] - o[a]) / d[a];
        let tb = (max[a] - o[a]) / d[a];
        t0 = t0.max(ta.min(tb));
        t1 = t1.min(ta.max(tb));
    }
    if t0 > t1 {
        return None;
    }
    if t0 > HIT_EPS {
        Some(t0)
    } else {
        (t1 > HIT_EPS).then_some(t1)
    }
}

fn ray_capsule(o: &Point3<f64>, d: &Vector3<f64>, c: [f64; 2], za: f64, zb: f64, r: f64) -> Option<f64> {
    let mut best = f64::INFINITY;
    let mut consider = |t: f64, ok: bool| {
        if ok && t > HIT_EPS && t < best {
            best = t;
        }
    };
    let (ox, oy) = (o.x - c[0], o.y - c[1]);
    let a = d.x * d.x + d.y * d.y;
    if a > 0.0 {
        let b = ox * d.x + oy * d.y;
        let disc = b * b - a * (ox * ox + oy * oy - r * r);
        if disc >= 0.0 {
            let s = disc.sqrt();
            for t in [(-b - s) / a, (-b + s) / a] {
                let z = o.z + t * d.z;
                consider(t, z >= za && z <= zb);
            }
        }
    }
    for (zc, below) in [(za, true), (zb, false)] {
        let oc = Vector3::new(ox, oy, o.z - zc);
        let b = oc.dot(d);
        let disc = b * b - d.norm_squared() * (oc.norm_squared() - r * r);
        if disc < 0.0 {
            continue;
        }
        let s = disc.sqrt();
        for t in [(-b - s) / d.norm_squared(), (-b + s) / d.norm_squared()] {
            let z = o.z + t * d.z;
            consider(t, if below { z <= za } else { z >= zb });
        }
    }
    best.is_finite().then_some(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenePrimitive {
    pub shape: Shape,
    pub label: SemanticClass,
    /// Nonzero for pedestrians only.
    pub instance: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub seed: u64,
    /// Ground extent along x and y, meters; the grid covers `[0, extent]`.
    pub extent: [f64; 2],
    /// Grid height, meters.
    pub height: f64,
    pub voxel_size: f64,
    pub pedestrians: usize,
    /// Number of loose boxes labeled Others.
    pub others: usize,
    pub wall_height: f64,
    /// Cameras around the border; one overhead camera is always added.
    pub cameras: usize,
    pub image_width: u32,
    pub image_height: u32,
    /// Horizontal field of view of the border cameras, degrees.
    pub hfov_deg: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            seed: 0,
            extent: [12.0, 12.0],
            height: 3.0,
            voxel_size: 0.1,
            pedestrians: 10,
            others: 4,
            wall_height: 1.0,
            cameras: 6,
            image_width: 640,
            image_height: 360,
            hfov_deg: 90.0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.extent[0], self.extent[1], self.height, self.voxel_size, self.wall_height];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("scene extents, height, voxel size and wall height must be positive"));
        }
        if !(self.hfov_deg > 0.0 && self.hfov_deg < 180.0) {
            return Err(Error::invalid(format!("field of view {} deg out of (0, 180)", self.hfov_deg)));
        }
        if self.image_width == 0 || self.image_height == 0 {
            return Err(Error::invalid("image size must be at least 1x1"));
        }
        let dims = self.dims();
        if dims[0] < 8 || dims[1] < 8 {
            return Err(Error::invalid("scene must span at least 8 voxels in x and y"));
        }
        if (dims[2] as f64) * self.voxel_size < MAX_PEDESTRIAN_HEIGHT + 2.0 * self.voxel_size {
            return Err(Error::invalid(format!("grid height {} m cannot hold a pedestrian", self.height)));
        }
        if self.wall_height > self.height {
            return Err(Error::invalid("walls are taller than the grid"));
        }
        Ok(())
    }

    fn dims(&self) -> [usize; 3] {
        [
            (self.extent[0] / self.voxel_size).round() as usize,
            (self.extent[1] / self.voxel_size).round() as usize,
            (self.height / self.voxel_size).round() as usize,
        ]
    }

    /// Voxel grid with its minimum corner at the world origin.
    pub fn grid_spec(&self) -> Result<VoxelGridSpec> {
        self.validate()?;
        VoxelGridSpec::new([0.0; 3], self.voxel_size, self.dims())
    }

    /// Border cameras at 2-8 m looking into the scene, then the overhead camera.
    pub fn rig(&self) -> Result<Vec<CameraModel>> {
        let spec = self.grid_spec()?;
        let [x_max, y_max, _] = spec.max_corner();
        let (cx, cy) = (0.5 * x_max, 0.5 * y_max);
        // independent stream, so the rig does not move when scene counts change
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5eed_ca4e_7a5c_0001);
        let k = CameraIntrinsics::from_fov(self.hfov_deg.to_radians(), self.image_width, self.image_height)?;
        let inset = 0.5;
        let (hx, hy) = (cx - inset, cy - inset);
        let mut cams = Vec::with_capacity(self.cameras + 1);
        for i in 0..self.cameras {
            let theta = 2.0 * PI * (i as f64 + rng.gen_range(-0.15..0.15)) / self.cameras as f64;
            let (c, s) = (theta.cos(), theta.sin());
            // first crossing of the inset border rectangle along the bearing
            let reach = (hx / c.abs().max(1e-12)).min(hy / s.abs().max(1e-12));
            let eye = Point3::new(cx + reach * c, cy + reach * s, rng.gen_range(2.0..8.0));
            let target = Point3::new(
                cx + rng.gen_range(-0.125..0.125) * x_max,
                cy + rng.gen_range(-0.125..0.125) * y_max,
                0.0,
            );
            cams.push(CameraModel::new(format!("cam{i:02}"), k, CameraPose::look_at(eye, target)?)?);
        }
        let overhead_z = 8.0_f64.max(0.5 * x_max.max(y_max));
        let (w, h) = (f64::from(self.image_width), f64::from(self.image_height));
        let f = (0.5 * w * overhead_z / (cx + inset)).min(0.5 * h * overhead_z / (cy + inset));
        let k_top = CameraIntrinsics::new(f, f, 0.5 * w, 0.5 * h, self.image_width, self.image_height)?;
        let pose = CameraPose::look_at(Point3::new(cx, cy, overhead_z), Point3::new(cx, cy, 0.0))?;
        cams.push(CameraModel::new(format!("cam{:02}", self.cameras), k_top, pose)?);
        Ok(cams)
    }
}

/// Box covering voxels `lo..=hi`, faces a tenth of a voxel beyond the outer
/// voxel centers.
pub fn snapped_box(spec: &VoxelGridSpec, lo: [usize; 3], hi: [usize; 3]) -> Shape {
    let pad = 0.1 * spec.voxel_size;
    let a = spec.center_unchecked(lo);
    let b = spec.center_unchecked(hi);
    Shape::Box { min: [a.x - pad, a.y - pad, a.z - pad], max: [b.x + pad, b.y + pad, b.z + pad] }
}

/// Planar distance from `(x, y)` to the footprint of a box.
fn distance_to_footprint(x: f64, y: f64, min: &[f64; 3], max: &[f64; 3]) -> f64 {
    let dx = (min[0] - x).max(x - max[0]).max(0.0);
    let dy = (min[1] - y).max(y - max[1]).max(0.0);
    dx.hypot(dy)
}

/// Static layout plus pedestrians; fails if the pedestrians cannot be packed.
pub fn sample_scene(config: &SceneConfig) -> Result<Vec<ScenePrimitive>> {
    let spec = config.grid_spec()?;
    let [nx, ny, nz] = spec.dims;
    let [x_max, y_max, _] = spec.max_corner();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let s = spec.voxel_size;
    let ground_top = spec.center_unchecked([0, 0, 0]).z + 0.1 * s;
    let mut prims = vec![ScenePrimitive {
        shape: Shape::Box { min: [0.0, 0.0, -0.2], max: [x_max, y_max, ground_top] },
        label: SemanticClass::Ground,
        instance: 0,
    }];

    let wall_top = ((config.wall_height / s).round() as usize).clamp(1, nz - 1);
    let walls = [
        ([0, 0, 1], [1, ny - 1, wall_top]),
        ([nx - 2, 0, 1], [nx - 1, ny - 1, wall_top]),
        ([2, 0, 1], [nx - 3, 1, wall_top]),
        ([2, ny - 2, 1], [nx - 3, ny - 1, wall_top]),
    ];
    for (lo, hi) in walls {
        prims.push(ScenePrimitive { shape: snapped_box(&spec, lo, hi), label: SemanticClass::Wall, instance: 0 });
    }

    let mut boxes = Vec::new();
    for _ in 0..config.others {
        let sx = rng.gen_range(4..=15).min(nx.saturating_sub(8)).max(1);
        let sy = rng.gen_range(4..=15).min(ny.saturating_sub(8)).max(1);
        let sz = rng.gen_range(4..=15).min(nz - 2);
        let ix = rng.gen_range(3..=nx - 4 - sx);
        let iy = rng.gen_range(3..=ny - 4 - sy);
        let shape = snapped_box(&spec, [ix, iy, 1], [ix + sx - 1, iy + sy - 1, sz]);
        boxes.push(shape);
        prims.push(ScenePrimitive { shape, label: SemanticClass::Others, instance: 0 });
    }

    let mut placed: Vec<([f64; 2], f64)> = Vec::new();
    for id in 1..=config.pedestrians {
        let radius = rng.gen_range(MIN_PEDESTRIAN_RADIUS..=MAX_PEDESTRIAN_RADIUS);
        let height = rng.gen_range(MIN_PEDESTRIAN_HEIGHT..=MAX_PEDESTRIAN_HEIGHT);
        let margin = 2.0 * s + radius + 0.3;
        if 2.0 * margin >= x_max || 2.0 * margin >= y_max {
            return Err(Error::Infeasible("scene too small for a pedestrian".into()));
        }
        let mut spot = None;
        for _ in 0..PLACEMENT_TRIES {
            let x = rng.gen_range(margin..x_max - margin);
            let y = rng.gen_range(margin..y_max - margin);
            let clear_of_peds =
                placed.iter().all(|(c, r)| (c[0] - x).hypot(c[1] - y) >= r + radius + PEDESTRIAN_GAP);
            let clear_of_boxes = boxes.iter().all(|b| match b {
                Shape::Box { min, max } => distance_to_footprint(x, y, min, max) >= radius + 0.3,
                Shape::Capsule { .. } => true,
            });
            if clear_of_peds && clear_of_boxes {
                spot = Some([x, y]);
                break;
            }
        }
        let Some(center) = spot else {
            return Err(Error::Infeasible(format!(
                "could not place pedestrian {id} of {} after {PLACEMENT_TRIES} tries",
                config.pedestrians
            )));
        };
        placed.push((center, radius));
        prims.push(ScenePrimitive {
            shape: Shape::Capsule { center, base_z: ground_top, radius, height },
            label: SemanticClass::Pedestrian,
            instance: id as u32,
        });
    }
    Ok(prims)
}

/// Labeled sensor images of one camera.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorFrame {
    /// Camera-space z of the first surface hit; `+inf` on background.
    pub depth: DepthImage,
    pub semantic: LabelImage,
    /// Pedestrian instance id, 0 elsewhere.
    pub instance: LabelImage,
}

/// Nearest primitive hit along a ray: `(t, index)`.
pub fn first_hit(prims: &[ScenePrimitive], origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (i, p) in prims.iter().enumerate() {
        if let Some(t) = p.shape.intersect(origin, dir) {
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, i));
            }
        }
    }
    best
}

/// Exact depth, semantic and instance images through every pixel center of a
/// `width x height` image of `cam`.
pub fn render_sensors(cam: &CameraModel, prims: &[ScenePrimitive], width: usize, height: usize) -> Result<SensorFrame> {
    if width == 0 || height == 0 {
        return Err(Error::invalid("render size must be at least 1x1"));
    }
    let k = cam.intrinsics.resized(width as u32, height as u32);
    let origin = cam.pose.center();
    let forward: Vector3<f64> = cam.pose.rotation.row(2).transpose();
    let n = width * height;
    let mut depth = vec![f64::INFINITY; n];
    let mut semantic = vec![0u32; n];
    let mut instance = vec![0u32; n];
    depth
        .par_chunks_mut(width)
        .zip(semantic.par_chunks_mut(width))
        .zip(instance.par_chunks_mut(width))
        .enumerate()
        .for_each(|(row, ((d, s), inst))| {
            for col in 0..width {
                let dir = cam.ray_direction(&k, col as f64, row as f64);
                if let Some((t, i)) = first_hit(prims, &origin, &dir) {
                    d[col] = t * dir.dot(&forward);
                    s[col] = prims[i].label as u32;
                    inst[col] = prims[i].instance;
                }
            }
        });
    Ok(SensorFrame {
        depth: DepthImage::from_data(width, height, depth)?,
        semantic: LabelImage::from_data(width, height, semantic)?,
        instance: LabelImage::from_data(width, height, instance)?,
    })
}

/// Labels every voxel by the primitives containing its center; overlaps
/// resolve Pedestrian > Wall > Others > Ground.
pub fn voxelize_analytic(prims: &[ScenePrimitive], spec: &VoxelGridSpec) -> LabelVolume {
    let mut vol = LabelVolume::free(*spec);
    let s = spec.voxel_size;
    for p in prims {
        if p.label == SemanticClass::Free {
            continue;
        }
        let (lo, hi) = p.shape.bounds();
        let mut range = [(0usize, 0usize); 3];
        for a in 0..3 {
            // voxels whose centers can fall inside [lo, hi]
            let first = ((lo[a] - spec.origin[a]) / s - 0.5).ceil().max(0.0);
            let last = ((hi[a] - spec.origin[a]) / s - 0.5).floor().min(spec.dims[a] as f64 - 1.0);
            if last < first {
                range[a] = (1, 0);
            } else {
                range[a] = (first as usize, last as usize);
            }
        }
        if (0..3).any(|a| range[a].0 > range[a].1) {
            continue;
        }
        for ix in range[0].0..=range[0].1 {
            for iy in range[1].0..=range[1].1 {
                for iz in range[2].0..=range[2].1 {
                    let c = spec.center_unchecked([ix, iy, iz]);
                    if !p.shape.contains(&c) {
                        continue;
                    }
                    let idx = spec.linear_index([ix, iy, iz]);
                    if p.label.priority() > vol.labels[idx].priority() {
                        vol.labels[idx] = p.label;
                        vol.instances[idx] = if p.label == SemanticClass::Pedestrian { p.instance } else { 0 };
                    }
                }
            }
        }
    }
    vol
}

/// Ground-plane location of a pedestrian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GtLocation {
    pub x: f64,
    pub y: f64,
    pub instance: u32,
}

/// Capsule axes of all pedestrians, by instance id.
pub fn gt_locations(prims: &[ScenePrimitive]) -> Vec<GtLocation> {
    let mut out: Vec<GtLocation> = prims
        .iter()
        .filter(|p| p.label == SemanticClass::Pedestrian)
        .map(|p| match p.shape {
            Shape::Capsule { center, .. } => GtLocation { x: center[0], y: center[1], instance: p.instance },
            Shape::Box { min, max } => {
                GtLocation { x: 0.5 * (min[0] + max[0]), y: 0.5 * (min[1] + max[1]), instance: p.instance }
            }
        })
        .collect();
    out.sort_by_key(|l| l.instance);
    out
}
