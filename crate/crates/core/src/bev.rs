//! Ground-plane (bird's eye view) occupancy.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::VoxelGridSpec;
use crate::view_transform::FeatureVolume;

/// The x/y footprint of a voxel grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BevGrid {
    pub origin: [f64; 2],
    pub cell_size: f64,
    pub dims: [usize; 2],
}

impl BevGrid {
    pub fn new(origin: [f64; 2], cell_size: f64, dims: [usize; 2]) -> Result<Self> {
        if !(cell_size > 0.0) || !cell_size.is_finite() || dims.contains(&0) {
            return Err(Error::invalid(format!("bad BEV grid: cell {cell_size}, dims {dims:?}")));
        }
        Ok(BevGrid { origin, cell_size, dims })
    }

    pub fn from_voxel_spec(spec: &VoxelGridSpec) -> Self {
        BevGrid {
            origin: [spec.origin[0], spec.origin[1]],
            cell_size: spec.voxel_size,
            dims: [spec.dims[0], spec.dims[1]],
        }
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        ix * self.dims[1] + iy
    }

    #[inline]
    pub fn cell_center(&self, ix: usize, iy: usize) -> [f64; 2] {
        [
            self.origin[0] + (ix as f64 + 0.5) * self.cell_size,
            self.origin[1] + (iy as f64 + 0.5) * self.cell_size,
        ]
    }
}

/// One scalar per ground cell, `values[ix * Y + iy]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BevMap {
    pub grid: BevGrid,
    pub values: Vec<f64>,
}

impl BevMap {
    pub fn zeros(grid: BevGrid) -> Self {
        BevMap { grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_values(grid: BevGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::shape(format!("BEV map needs {} cells, got {}", grid.len(), values.len())));
        }
        Ok(BevMap { grid, values })
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.grid.index(ix, iy)]
    }
}

/// Multi-channel BEV field, `values[cell * channels + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BevFeatures {
    pub grid: BevGrid,
    pub channels: usize,
    pub values: Vec<f64>,
}

impl BevFeatures {
    pub fn channel(&self, c: usize) -> BevMap {
        let values = self.values.chunks(self.channels).map(|cell| cell[c]).collect();
        BevMap { grid: self.grid, values }
    }
}

/// Averages each channel over the vertical axis.
pub fn collapse_to_bev(vol: &FeatureVolume) -> BevFeatures {
    let grid = BevGrid::from_voxel_spec(&vol.spec);
    let z = vol.spec.dims[2];
    let ch = vol.channels;
    let mut values = vec![0.0; grid.len() * ch];
    values.par_chunks_mut(ch).enumerate().for_each(|(cell, out)| {
        // voxels of one column are contiguous
        let column = &vol.values[cell * z * ch..(cell + 1) * z * ch];
        for voxel in column.chunks(ch) {
            for (o, v) in out.iter_mut().zip(voxel) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|o| *o /= z as f64);
    });
    BevFeatures { grid, channels: ch, values }
}

/// Gaussian target: each cell holds the max over locations of
/// `exp(-d^2 / (2 sigma^2))`, `d` measured from the cell center.
pub fn splat_gaussian(locations: &[[f64; 2]], grid: &BevGrid, sigma: f64) -> Result<BevMap> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("splat sigma must be positive, got {sigma}")));
    }
    let mut map = BevMap::zeros(*grid);
    let inv = 1.0 / (2.0 * sigma * sigma);
    // beyond 8 sigma the kernel is below 1e-13
    let reach = (8.0 * sigma / grid.cell_size).ceil() as i64;
    for loc in locations {
        let cx = ((loc[0] - grid.origin[0]) / grid.cell_size).floor() as i64;
        let cy = ((loc[1] - grid.origin[1]) / grid.cell_size).floor() as i64;
        let x_lo = (cx - reach).max(0);
        let x_hi = (cx + reach).min(grid.dims[0] as i64 - 1);
        let y_lo = (cy - reach).max(0);
        let y_hi = (cy + reach).min(grid.dims[1] as i64 - 1);
        for ix in x_lo..=x_hi {
            for iy in y_lo..=y_hi {
                let c = grid.cell_center(ix as usize, iy as usize);
                let d2 = (c[0] - loc[0]).powi(2) + (c[1] - loc[1]).powi(2);
                let v = (-d2 * inv).exp();
                let slot = &mut map.values[grid.index(ix as usize, iy as usize)];
                if v > *slot {
                    *slot = v;
                }
            }
        }
    }
    Ok(map)
}

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss(pred: &BevMap, target: &BevMap) -> Result<(f64, Vec<f64>)> {
    if pred.grid.dims != target.grid.dims || pred.values.len() != target.values.len() {
        return Err(Error::shape(format!(
            "MSE between {:?} and {:?} maps",
            pred.grid.dims, target.grid.dims
        )));
    }
    let n = pred.values.len() as f64;
    let diff: Vec<f64> = pred.values.iter().zip(&target.values).map(|(p, t)| p - t).collect();
    let value = diff.iter().map(|d| d * d).sum::<f64>() / n;
    let grad = diff.iter().map(|d| 2.0 * d / n).collect();
    Ok((value, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Cell center, world meters.
    pub x: f64,
    pub y: f64,
    pub score: f64,
}

/// Candidate order: higher score first, then lower `(ix, iy)`.
fn precedes(a: (f64, usize, usize), b: (f64, usize, usize)) -> bool {
    match b.0.total_cmp(&a.0) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => (a.1, a.2) < (b.1, b.2),
    }
}

/// Thresholds the map at `tau` and keeps cells that come first (by score,
/// then index) among all cells within `nms_radius`, followed by a greedy
/// suppression pass. Returned detections are in descending score order.
pub fn extract_locations(pocc: &BevMap, tau: f64, nms_radius: f64) -> Result<Vec<Detection>> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::invalid(format!("tau must be in (0, 1), got {tau}")));
    }
    if !(nms_radius > 0.0) || !nms_radius.is_finite() {
        return Err(Error::invalid(format!("NMS radius must be positive, got {nms_radius}")));
    }
    let grid = &pocc.grid;
    let [nx, ny] = grid.dims;
    let reach = (nms_radius / grid.cell_size).floor() as i64;
    let r2 = nms_radius * nms_radius;
    let score = |ix: usize, iy: usize| {
        let s = pocc.get(ix, iy);
        if s.is_nan() { f64::NEG_INFINITY } else { s }
    };

    let mut candidates: Vec<(f64, usize, usize)> = (0..nx * ny)
        .into_par_iter()
        .filter_map(|cell| {
            let (ix, iy) = (cell / ny, cell % ny);
            let s = score(ix, iy);
            if !(s >= tau) {
                return None;
            }
            let me = (s, ix, iy);
            for dx in -reach..=reach {
                for dy in -reach..=reach {
                    let (jx, jy) = (ix as i64 + dx, iy as i64 + dy);
                    if (dx == 0 && dy == 0) || jx < 0 || jy < 0 || jx >= nx as i64 || jy >= ny as i64 {
                        continue;
                    }
                    let d2 = ((dx * dx + dy * dy) as f64) * grid.cell_size * grid.cell_size;
                    if d2 > r2 {
                        continue;
                    }
                    let (jx, jy) = (jx as usize, jy as usize);
                    if !precedes(me, (score(jx, jy), jx, jy)) {
                        return None;
                    }
                }
            }
            Some(me)
        })
        .collect();
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));

    let mut kept: Vec<Detection> = Vec::new();
    for (s, ix, iy) in candidates {
        let [x, y] = grid.cell_center(ix, iy);
        if kept.iter().all(|d| (d.x - x).powi(2) + (d.y - y).powi(2) > r2) {
            kept.push(Detection { x, y, score: s });
        }
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> BevGrid {
        BevGrid::new([0.0, 0.0], 0.1, [n, n]).unwrap()
    }

    #[test]
    fn collapse_column_mean() {
        let spec = VoxelGridSpec::new([0.0; 3], 0.1, [2, 3, 5]).unwrap();
        let values: Vec<f64> = (0..spec.len()).map(|i| spec.unravel(i)[2] as f64).collect();
        let vol = FeatureVolume { spec, channels: 1, values, valid_count: vec![1; spec.len()] };
        let bev = collapse_to_bev(&vol);
        assert!(bev.values.iter().all(|&v| v == 2.0));
    }

    #[test]
    fn splat_cases() {
        let g = grid(10);
        assert!(splat_gaussian(&[], &g, 0.3).unwrap().values.iter().all(|&v| v == 0.0));
        let m = splat_gaussian(&[[0.55, 0.35]], &g, 0.3).unwrap();
        assert!((m.get(5, 3) - 1.0).abs() < 1e-15);
        // a neighbor three cells away sits at exactly one sigma
        assert!((m.get(8, 3) - (-0.5f64).exp()).abs() < 1e-12);
        assert!((m.get(8, 3) - 0.6065).abs() < 1e-4);
        assert!(splat_gaussian(&[[0.0, 0.0]], &g, 0.0).is_err());
    }

    #[test]
    fn splat_combines_by_max() {
        let g = grid(10);
        let m = splat_gaussian(&[[0.45, 0.45], [0.55, 0.45]], &g, 0.3).unwrap();
        assert!(m.values.iter().all(|&v| v <= 1.0));
    }

    #[test]
    fn mse_cases() {
        let g = BevGrid::new([0.0, 0.0], 0.1, [1, 1]).unwrap();
        let p = BevMap::from_values(g, vec![1.0]).unwrap();
        let t = BevMap::zeros(g);
        assert_eq!(mse_loss(&p, &t).unwrap(), (1.0, vec![2.0]));
        assert_eq!(mse_loss(&p, &p).unwrap(), (0.0, vec![0.0]));
        assert!(mse_loss(&p, &BevMap::zeros(grid(2))).is_err());
    }

    #[test]
    fn extraction_cases() {
        let g = grid(20);
        assert!(extract_locations(&BevMap::zeros(g), 0.5, 0.5).unwrap().is_empty());

        let mut m = BevMap::zeros(g);
        m.values[g.index(4, 7)] = 0.9;
        let d = extract_locations(&m, 0.5, 0.5).unwrap();
        assert_eq!(d.len(), 1);
        assert!((d[0].x - 0.45).abs() < 1e-12 && (d[0].y - 0.75).abs() < 1e-12 && d[0].score == 0.9);

        m.values[g.index(6, 7)] = 0.8;
        let d = extract_locations(&m, 0.5, 0.5).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].score, 0.9);

        // equal plateau resolves to the lower index
        let mut m = BevMap::zeros(g);
        m.values[g.index(3, 3)] = 0.7;
        m.values[g.index(3, 4)] = 0.7;
        let d = extract_locations(&m, 0.5, 0.5).unwrap();
        assert_eq!(d.len(), 1);
        assert!((d[0].y - 0.35).abs() < 1e-12);

        assert!(extract_locations(&m, 1.0, 0.5).is_err());
        assert!(extract_locations(&m, 0.5, 0.0).is_err());
    }
}
