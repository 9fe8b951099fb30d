use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::volume::InstanceVolume;

/// Segment sizes and pairwise intersections of two label maps; code 0 is
/// never a segment.
pub(crate) struct Overlaps {
    pub pred_sizes: BTreeMap<u32, u64>,
    pub gt_sizes: BTreeMap<u32, u64>,
    pub inter: HashMap<(u32, u32), u64>,
}

impl Overlaps {
    pub fn new(pred: &[u32], gt: &[u32]) -> Result<Self> {
        if pred.len() != gt.len() {
            return Err(Error::shape(format!("{} predicted labels vs {} ground-truth labels", pred.len(), gt.len())));
        }
        let mut o = Overlaps { pred_sizes: BTreeMap::new(), gt_sizes: BTreeMap::new(), inter: HashMap::new() };
        for (&p, &g) in pred.iter().zip(gt) {
            if p != 0 {
                *o.pred_sizes.entry(p).or_default() += 1;
            }
            if g != 0 {
                *o.gt_sizes.entry(g).or_default() += 1;
            }
            if p != 0 && g != 0 {
                *o.inter.entry((p, g)).or_default() += 1;
            }
        }
        Ok(o)
    }

    pub fn iou(&self, p: u32, g: u32) -> f64 {
        let i = self.inter.get(&(p, g)).copied().unwrap_or(0);
        let u = self.pred_sizes[&p] + self.gt_sizes[&g] - i;
        i as f64 / u as f64
    }

    /// Overlapping pairs with their IoU, highest first, ties by ids.
    pub fn ranked_pairs(&self) -> Vec<(u32, u32, f64)> {
        let mut pairs: Vec<(u32, u32, f64)> = self.inter.keys().map(|&(p, g)| (p, g, self.iou(p, g))).collect();
        pairs.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
        pairs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApReport {
    pub thresholds: Vec<f64>,
    /// `TP / (TP + FP + FN)` at each threshold.
    pub per_threshold: Vec<f64>,
    pub ap: f64,
    pub num_pred: usize,
    pub num_gt: usize,
}

/// AP over per-element instance ids (0 = no instance); see [`instance_ap`].
pub fn instance_ap_codes(pred: &[u32], gt: &[u32], thresholds: &[f64]) -> Result<ApReport> {
    if thresholds.is_empty() {
        return Err(Error::invalid("AP needs at least one IoU threshold"));
    }
    if let Some(t) = thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::invalid(format!("IoU threshold {t} outside [0, 1]")));
    }
    let o = Overlaps::new(pred, gt)?;
    let (np, ng) = (o.pred_sizes.len(), o.gt_sizes.len());

    // greedy by descending IoU; matches at IoU >= t are the same as if only
    // pairs above t had been offered, so one pass serves every threshold
    let mut used_p = BTreeMap::new();
    let mut used_g = BTreeMap::new();
    let mut matched = Vec::new();
    for (p, g, iou) in o.ranked_pairs() {
        if used_p.contains_key(&p) || used_g.contains_key(&g) {
            continue;
        }
        used_p.insert(p, g);
        used_g.insert(g, p);
        matched.push(iou);
    }

    let per_threshold: Vec<f64> = thresholds
        .iter()
        .map(|&t| {
            if np == 0 && ng == 0 {
                return 1.0;
            }
            let tp = matched.iter().filter(|&&iou| iou >= t).count();
            // TP + FP + FN = np + ng - tp
            tp as f64 / (np + ng - tp) as f64
        })
        .collect();
    let ap = per_threshold.iter().sum::<f64>() / per_threshold.len() as f64;
    Ok(ApReport { thresholds: thresholds.to_vec(), per_threshold, ap, num_pred: np, num_gt: ng })
}

/// Set-based instance AP: the mean over `thresholds` of `TP / (TP + FP + FN)`
/// under one-to-one matching of instances by mask IoU.
///
/// With no instances on either side every threshold scores 1.
pub fn instance_ap(pred: &InstanceVolume, gt: &InstanceVolume, thresholds: &[f64]) -> Result<ApReport> {
    if pred.spec != gt.spec {
        return Err(Error::SpecMismatch);
    }
    instance_ap_codes(&pred.ids, &gt.ids, thresholds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::volume_ap_thresholds;
    use proptest::prelude::*;

    /// Best TP count over every one-to-one matching, per threshold.
    fn exhaustive(pred: &[u32], gt: &[u32], thresholds: &[f64]) -> Vec<f64> {
        let o = Overlaps::new(pred, gt).unwrap();
        let ps: Vec<u32> = o.pred_sizes.keys().copied().collect();
        let gs: Vec<u32> = o.gt_sizes.keys().copied().collect();
        fn best(i: usize, ps: &[u32], gs: &[u32], used: &mut Vec<bool>, o: &Overlaps, t: f64) -> usize {
            if i == ps.len() {
                return 0;
            }
            let mut b = best(i + 1, ps, gs, used, o, t);
            for j in 0..gs.len() {
                if !used[j] && o.iou(ps[i], gs[j]) >= t && o.inter.contains_key(&(ps[i], gs[j])) {
                    used[j] = true;
                    b = b.max(1 + best(i + 1, ps, gs, used, o, t));
                    used[j] = false;
                }
            }
            b
        }
        thresholds
            .iter()
            .map(|&t| {
                if ps.is_empty() && gs.is_empty() {
                    return 1.0;
                }
                let tp = best(0, &ps, &gs, &mut vec![false; gs.len()], &o, t);
                tp as f64 / (ps.len() + gs.len() - tp) as f64
            })
            .collect()
    }

    #[test]
    fn identical_maps() {
        let ids = vec![0, 1, 1, 2, 2, 2, 0, 3];
        let r = instance_ap_codes(&ids, &ids, &volume_ap_thresholds()).unwrap();
        assert_eq!(r.ap, 1.0);
        assert_eq!(instance_ap_codes(&[0, 0], &[0, 0], &[0.5]).unwrap().ap, 1.0);
    }

    #[test]
    fn single_pair_052() {
        // 13 shared, 25 in the union
        let mut pred = vec![0u32; 25];
        let mut gt = vec![0u32; 25];
        pred[0..19].fill(1);
        gt[6..25].fill(7);
        let r = instance_ap_codes(&pred, &gt, &[0.50, 0.55]).unwrap();
        assert_eq!(r.per_threshold, vec![1.0, 0.0]);
        assert_eq!(r.ap, 0.5);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(instance_ap_codes(&[1], &[1], &[]).is_err());
        assert!(instance_ap_codes(&[1], &[1], &[1.5]).is_err());
        assert!(instance_ap_codes(&[1], &[1, 0], &[0.5]).is_err());
    }

    proptest! {
        #[test]
        fn equals_exhaustive_oracle(pairs in prop::collection::vec((0u32..5, 0u32..5), 1..40)) {
            let (pred, gt): (Vec<u32>, Vec<u32>) = pairs.into_iter().unzip();
            let t = volume_ap_thresholds();
            let r = instance_ap_codes(&pred, &gt, &t).unwrap();
            prop_assert_eq!(r.per_threshold, exhaustive(&pred, &gt, &t));
        }

        #[test]
        fn monotone_in_thresholds(pairs in prop::collection::vec((0u32..4, 0u32..4), 1..40), shift in 0.0f64..0.3) {
            let (pred, gt): (Vec<u32>, Vec<u32>) = pairs.into_iter().unzip();
            let t = [0.25, 0.4, 0.5, 0.7];
            let raised: Vec<f64> = t.iter().map(|x| x + shift).collect();
            let a = instance_ap_codes(&pred, &gt, &t).unwrap().ap;
            let b = instance_ap_codes(&pred, &gt, &raised).unwrap().ap;
            prop_assert!(b <= a + 1e-15);
        }
    }
}
