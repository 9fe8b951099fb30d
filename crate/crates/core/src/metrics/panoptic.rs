use std::collections::{BTreeMap, BTreeSet};

use super::instance::Overlaps;
use crate::error::{Error, Result};
use crate::volume::{decode_panoptic, PanopticVolume, SemanticClass};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassPq {
    pub class: SemanticClass,
    pub tp: usize,
    pub fp: usize,
    pub fn_count: usize,
    pub iou_sum: f64,
    pub sq: f64,
    pub rq: f64,
    pub pq: f64,
}

fn quality(tp: usize, fp: usize, fn_count: usize, iou_sum: f64) -> (f64, f64, f64) {
    let sq = if tp == 0 { 0.0 } else { iou_sum / tp as f64 };
    let rq = tp as f64 / (tp as f64 + 0.5 * fp as f64 + 0.5 * fn_count as f64);
    (sq, rq, sq * rq)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanopticReport {
    /// Classes with at least one segment on either side.
    pub per_class: Vec<ClassPq>,
    /// Pooled over all segments of all classes, so `pq = sq * rq`.
    pub pq: f64,
    pub sq: f64,
    pub rq: f64,
    /// Unweighted means of the per-class values.
    pub pq_class_mean: f64,
    pub sq_class_mean: f64,
    pub rq_class_mean: f64,
}

/// PQ over per-element panoptic codes; see [`panoptic_quality`].
pub fn panoptic_quality_codes(pred: &[u32], gt: &[u32]) -> Result<PanopticReport> {
    let o = Overlaps::new(pred, gt)?;
    let class_of = |code: u32| {
        decode_panoptic(code).map(|(c, _)| c).ok_or_else(|| Error::invalid(format!("invalid panoptic code {code}")))
    };
    let mut stats: BTreeMap<SemanticClass, (usize, usize, usize, f64)> = BTreeMap::new();
    let mut matched_p = BTreeSet::new();
    let mut matched_g = BTreeSet::new();
    let mut pairs: Vec<(u32, u32)> = o.inter.keys().copied().collect();
    pairs.sort_unstable();
    for (p, g) in pairs {
        let c = class_of(p)?;
        if c != class_of(g)? {
            continue;
        }
        let iou = o.iou(p, g);
        if iou > 0.5 {
            // IoU above one half leaves no room for a second partner
            assert!(matched_p.insert(p) && matched_g.insert(g), "segment matched twice");
            let e = stats.entry(c).or_default();
            e.0 += 1;
            e.3 += iou;
        }
    }
    for &p in o.pred_sizes.keys() {
        let e = stats.entry(class_of(p)?).or_default();
        if !matched_p.contains(&p) {
            e.1 += 1;
        }
    }
    for &g in o.gt_sizes.keys() {
        let e = stats.entry(class_of(g)?).or_default();
        if !matched_g.contains(&g) {
            e.2 += 1;
        }
    }

    let per_class: Vec<ClassPq> = stats
        .iter()
        .map(|(&class, &(tp, fp, fn_count, iou_sum))| {
            let (sq, rq, pq) = quality(tp, fp, fn_count, iou_sum);
            ClassPq { class, tp, fp, fn_count, iou_sum, sq, rq, pq }
        })
        .collect();
    if per_class.is_empty() {
        return Ok(PanopticReport {
            per_class,
            pq: 1.0,
            sq: 1.0,
            rq: 1.0,
            pq_class_mean: 1.0,
            sq_class_mean: 1.0,
            rq_class_mean: 1.0,
        });
    }
    let tp = per_class.iter().map(|c| c.tp).sum();
    let fp = per_class.iter().map(|c| c.fp).sum();
    let fn_count = per_class.iter().map(|c| c.fn_count).sum();
    let iou_sum = per_class.iter().map(|c| c.iou_sum).sum();
    let (sq, rq, pq) = quality(tp, fp, fn_count, iou_sum);
    let n = per_class.len() as f64;
    Ok(PanopticReport {
        pq,
        sq,
        rq,
        pq_class_mean: per_class.iter().map(|c| c.pq).sum::<f64>() / n,
        sq_class_mean: per_class.iter().map(|c| c.sq).sum::<f64>() / n,
        rq_class_mean: per_class.iter().map(|c| c.rq).sum::<f64>() / n,
        per_class,
    })
}

/// Panoptic, segmentation and recognition quality.
///
/// Each stuff class is one segment per side, each pedestrian instance one
/// segment; Free is not a segment. Segments of the same class match when
/// their IoU exceeds 0.5. Classes without segments on either side are left
/// out; if none remain, all scores are 1.
pub fn panoptic_quality(pred: &PanopticVolume, gt: &PanopticVolume) -> Result<PanopticReport> {
    if pred.spec != gt.spec {
        return Err(Error::SpecMismatch);
    }
    panoptic_quality_codes(&pred.codes, &gt.codes)
}
