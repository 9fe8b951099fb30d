//! First-hit voxel ray marching.
//!
//! Rays are traversed with exact boundary stepping (Amanatides-Woo DDA): each
//! voxel the ray passes through is visited once, in order of entry distance.

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;

use crate::config::{RAY_MAX_TRACE_DISTANCE, RAY_MIN_HIT_DISTANCE};
use crate::error::{Error, Result};
use crate::geometry::{Aabb, CameraModel, VoxelGridSpec};
use crate::image::LabelImage;
use crate::volume::VoxelLabels;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayMarchParams {
    /// Maximum number of voxel boundary crossings; `None` marches to the grid
    /// exit or the trace limit.
    pub max_steps: Option<u32>,
    /// Occupied space closer than this to the ray origin is ignored, meters.
    pub min_hit_distance: f64,
    pub max_trace_distance: f64,
}

impl Default for RayMarchParams {
    fn default() -> Self {
        RayMarchParams {
            max_steps: None,
            min_hit_distance: RAY_MIN_HIT_DISTANCE,
            max_trace_distance: RAY_MAX_TRACE_DISTANCE,
        }
    }
}

impl RayMarchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_hit_distance > 0.0) || !(self.max_trace_distance > 0.0) {
            return Err(Error::invalid("ray-march distances must be positive"));
        }
        if self.max_trace_distance <= self.min_hit_distance {
            return Err(Error::invalid("max trace distance must exceed the min hit distance"));
        }
        if self.max_steps == Some(0) {
            return Err(Error::invalid("ray-march step budget must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub code: u32,
    pub voxel: [usize; 3],
    /// Distance along the unit ray where it enters occupied space.
    pub distance: f64,
}

/// Marches `origin + t * dir` (`dir` unit length) through `vol` and returns
/// the first non-empty voxel met at `t` in `[min_hit, max_trace]`.
pub fn trace_ray<V: VoxelLabels + ?Sized>(
    vol: &V,
    origin: &Point3<f64>,
    dir: &Vector3<f64>,
    params: &RayMarchParams,
) -> Option<RayHit> {
    march(vol, |i| vol.code(i) != 0, &IndexBox::full(vol.spec()), origin, dir, params)
}

/// Half-open voxel index range `lo..hi` per axis.
#[derive(Debug, Clone, Copy)]
struct IndexBox {
    lo: [usize; 3],
    hi: [usize; 3],
}

impl IndexBox {
    fn full(spec: &VoxelGridSpec) -> Self {
        IndexBox { lo: [0; 3], hi: spec.dims }
    }

    /// Smallest box holding every non-empty voxel, `None` if there is none.
    fn occupied<V: VoxelLabels + ?Sized>(vol: &V) -> Option<Self> {
        let spec = vol.spec();
        (0..spec.len())
            .into_par_iter()
            .filter(|&i| vol.code(i) != 0)
            .map(|i| {
                let ijk = spec.unravel(i);
                IndexBox { lo: ijk, hi: ijk.map(|v| v + 1) }
            })
            .reduce_with(|a, b| IndexBox {
                lo: std::array::from_fn(|k| a.lo[k].min(b.lo[k])),
                hi: std::array::from_fn(|k| a.hi[k].max(b.hi[k])),
            })
    }

    fn world(&self, spec: &VoxelGridSpec) -> Aabb {
        let corner = |i: [usize; 3]| {
            Point3::new(
                spec.origin[0] + i[0] as f64 * spec.voxel_size,
                spec.origin[1] + i[1] as f64 * spec.voxel_size,
                spec.origin[2] + i[2] as f64 * spec.voxel_size,
            )
        };
        Aabb { min: corner(self.lo), max: corner(self.hi) }
    }
}

/// DDA restricted to `bounds`; every voxel outside it must be empty.
/// `occupied(i)` must agree with `vol.code(i) != 0`.
fn march<V: VoxelLabels + ?Sized>(
    vol: &V,
    occupied: impl Fn(usize) -> bool,
    bounds: &IndexBox,
    origin: &Point3<f64>,
    dir: &Vector3<f64>,
    params: &RayMarchParams,
) -> Option<RayHit> {
    let spec = vol.spec();
    let (t_enter, t_exit) = bounds.world(spec).ray_interval(origin, dir)?;
    let t_start = t_enter.max(params.min_hit_distance);
    let t_end = t_exit.min(params.max_trace_distance);
    if !(t_start < t_end) {
        return None;
    }

    let size = spec.voxel_size;
    let stride = [(spec.dims[1] * spec.dims[2]) as i64, spec.dims[2] as i64, 1];
    let mut index = [0i64; 3];
    let mut step = [0i64; 3];
    let mut t_next = [f64::INFINITY; 3];
    for a in 0..3 {
        let p = origin[a] + t_start * dir[a];
        let f = ((p - spec.origin[a]) / size).floor() as i64;
        index[a] = f.clamp(bounds.lo[a] as i64, bounds.hi[a] as i64 - 1);
        if dir[a] > 0.0 {
            step[a] = 1;
        } else if dir[a] < 0.0 {
            step[a] = -1;
        }
        t_next[a] = boundary_t(spec.origin[a], size, index[a], step[a], origin[a], dir[a]);
    }

    let lo = bounds.lo.map(|d| d as i64);
    let hi = bounds.hi.map(|d| d as i64);
    let mut linear = index[0] * stride[0] + index[1] * stride[1] + index[2];
    let mut t = t_start;
    let mut crossings = 0u32;
    loop {
        if occupied(linear as usize) {
            let voxel = [index[0] as usize, index[1] as usize, index[2] as usize];
            return Some(RayHit { code: vol.code(linear as usize), voxel, distance: t });
        }
        let axis = if t_next[0] <= t_next[1] {
            if t_next[0] <= t_next[2] { 0 } else { 2 }
        } else if t_next[1] <= t_next[2] {
            1
        } else {
            2
        };
        t = t_next[axis];
        if !(t <= t_end) {
            return None;
        }
        index[axis] += step[axis];
        if index[axis] < lo[axis] || index[axis] >= hi[axis] {
            return None;
        }
        linear += step[axis] * stride[axis];
        crossings += 1;
        if params.max_steps.is_some_and(|m| crossings > m) {
            return None;
        }
        t_next[axis] = boundary_t(spec.origin[axis], size, index[axis], step[axis], origin[axis], dir[axis]);
    }
}

/// Ray parameter at which the ray leaves voxel `i` along one axis.
#[inline]
fn boundary_t(grid_origin: f64, size: f64, i: i64, step: i64, o: f64, d: f64) -> f64 {
    if step == 0 {
        return f64::INFINITY;
    }
    let plane = grid_origin + (i + i64::from(step > 0)) as f64 * size;
    (plane - o) / d
}

/// Renders the label of the first occupied voxel seen through every pixel
/// center of an `out_width x out_height` image; 0 where nothing is hit.
pub fn render_view<V: VoxelLabels + ?Sized>(
    cam: &CameraModel,
    vol: &V,
    params: &RayMarchParams,
    out_width: usize,
    out_height: usize,
) -> Result<LabelImage> {
    params.validate()?;
    if out_width == 0 || out_height == 0 {
        return Err(Error::invalid("render size must be at least 1x1"));
    }
    let k = cam.intrinsics.resized(out_width as u32, out_height as u32);
    let origin = cam.pose.center();
    let mut data = vec![0u32; out_width * out_height];
    // a step budget counts crossings from the grid boundary, so only an
    // unlimited march may skip the empty margin
    let bounds = match params.max_steps {
        None => match IndexBox::occupied(vol) {
            Some(b) => b,
            None => return LabelImage::from_data(out_width, out_height, data),
        },
        Some(_) => IndexBox::full(vol.spec()),
    };
    // one bit per voxel stays cache resident where the labels would not
    let n = vol.spec().len();
    let mut bits = vec![0u64; n.div_ceil(64)];
    bits.par_iter_mut().enumerate().for_each(|(w, word)| {
        for b in 0..64.min(n - w * 64) {
            if vol.code(w * 64 + b) != 0 {
                *word |= 1 << b;
            }
        }
    });
    let occupied = |i: usize| bits[i >> 6] & (1 << (i & 63)) != 0;
    data.par_chunks_mut(out_width).enumerate().for_each(|(row, out)| {
        for (col, px) in out.iter_mut().enumerate() {
            let dir = cam.ray_direction(&k, col as f64, row as f64);
            *px = march(vol, occupied, &bounds, &origin, &dir, params).map_or(0, |h| h.code);
        }
    });
    LabelImage::from_data(out_width, out_height, data)
}
