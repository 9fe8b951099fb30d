use serde::{Deserialize, Serialize};

use super::hungarian::hungarian;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub pred: usize,
    pub gt: usize,
    pub distance: f64,
}

/// One-to-one matching of predicted and ground-truth ground-plane locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub pairs: Vec<MatchedPair>,
    pub fp: usize,
    pub fn_count: usize,
    pub threshold: f64,
}

impl MatchReport {
    pub fn counts(&self) -> DetectionCounts {
        DetectionCounts {
            tp: self.pairs.len(),
            fp: self.fp,
            fn_count: self.fn_count,
            closeness: self.pairs.iter().map(|p| 1.0 - p.distance / self.threshold).sum(),
        }
    }
}

/// Matches with the largest number of pairs closer than `t`, and among
/// those the smallest total distance.
pub fn match_detections(preds: &[[f64; 2]], gts: &[[f64; 2]], t: f64) -> Result<MatchReport> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("match threshold must be positive, got {t}")));
    }
    let dist = |p: &[f64; 2], g: &[f64; 2]| ((p[0] - g[0]).powi(2) + (p[1] - g[1]).powi(2)).sqrt();
    // each admissible pair is worth more than any total distance, so the
    // minimum-cost assignment first maximizes the match count
    let bonus = t * (preds.len().min(gts.len()) as f64 + 1.0);
    let cost: Vec<Vec<f64>> = preds
        .iter()
        .map(|p| {
            gts.iter()
                .map(|g| {
                    let d = dist(p, g);
                    if d < t { d - bonus } else { 0.0 }
                })
                .collect()
        })
        .collect();
    let pairs: Vec<MatchedPair> = hungarian(&cost)
        .into_iter()
        .filter_map(|(i, j)| {
            let d = dist(&preds[i], &gts[j]);
            (d < t).then_some(MatchedPair { pred: i, gt: j, distance: d })
        })
        .collect();
    Ok(MatchReport {
        fp: preds.len() - pairs.len(),
        fn_count: gts.len() - pairs.len(),
        pairs,
        threshold: t,
    })
}

/// Summed counts, so scores can be pooled over frames.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_count: usize,
    /// Sum of `1 - d / t` over true positives.
    pub closeness: f64,
}

impl std::ops::AddAssign for DetectionCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_count += o.fn_count;
        self.closeness += o.closeness;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionScores {
    pub moda: f64,
    pub modp: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl DetectionCounts {
    /// Empty denominators: MODP is 0 without true positives, precision and
    /// recall are 1 when there was nothing to get wrong, MODA divides by at
    /// least one ground truth.
    pub fn scores(&self) -> DetectionScores {
        let tp = self.tp as f64;
        let fp = self.fp as f64;
        let fn_ = self.fn_count as f64;
        let positives = tp + fn_;
        let moda = 1.0 - (fp + fn_) / positives.max(1.0);
        let modp = if self.tp == 0 { 0.0 } else { self.closeness / tp };
        let precision = if self.tp + self.fp == 0 { 1.0 } else { tp / (tp + fp) };
        let recall = if self.tp + self.fn_count == 0 { 1.0 } else { tp / positives };
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        DetectionScores { moda, modp, precision, recall, f1 }
    }
}

pub fn detection_scores(report: &MatchReport) -> DetectionScores {
    report.counts().scores()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_counts() {
        let c = DetectionCounts { tp: 8, fp: 1, fn_count: 2, closeness: 4.0 };
        let s = c.scores();
        assert!((s.moda - 0.7).abs() < 1e-15);
        assert_eq!(s.precision, 8.0 / 9.0);
        assert_eq!(s.recall, 0.8);
        assert!((s.f1 - 16.0 / 19.0).abs() < 1e-15);
        assert!((s.f1 - 0.8421).abs() < 1e-4);
    }

    #[test]
    fn modp_from_distances() {
        let preds = [[0.1, 0.0], [5.0, 0.4]];
        let gts = [[0.0, 0.0], [5.0, 0.0]];
        let r = match_detections(&preds, &gts, 0.5).unwrap();
        assert_eq!(r.pairs.len(), 2);
        assert!((detection_scores(&r).modp - 0.5).abs() < 1e-12);
    }

    #[test]
    fn exact_and_far() {
        let pts = [[1.0, 2.0], [3.0, 4.0], [-1.0, 0.5]];
        let r = match_detections(&pts, &pts, 0.5).unwrap();
        assert_eq!((r.pairs.len(), r.fp, r.fn_count), (3, 0, 0));
        assert!(r.pairs.iter().all(|p| p.distance == 0.0 && p.pred == p.gt));
        let s = detection_scores(&r);
        assert_eq!((s.moda, s.modp, s.f1), (1.0, 1.0, 1.0));

        let r = match_detections(&[[0.6, 0.0]], &[[0.0, 0.0]], 0.5).unwrap();
        assert_eq!((r.pairs.len(), r.fp, r.fn_count), (0, 1, 1));
        assert!(match_detections(&[], &[], 0.0).is_err());
    }

    #[test]
    fn optimal_beats_greedy() {
        // greedy would pair pred 0 with gt 0 (0.1) and leave pred 1 with nothing under t
        let preds = [[0.0, 0.0], [-0.45, 0.0]];
        let gts = [[-0.1, 0.0], [0.4, 0.0]];
        let r = match_detections(&preds, &gts, 0.5).unwrap();
        assert_eq!(r.pairs.len(), 2);
    }

    #[test]
    fn empty_conventions() {
        let s = DetectionCounts::default().scores();
        assert_eq!((s.moda, s.modp, s.precision, s.recall, s.f1), (1.0, 0.0, 1.0, 1.0, 1.0));
        let s = DetectionCounts { fp: 2, ..Default::default() }.scores();
        assert_eq!((s.moda, s.precision, s.f1), (-1.0, 0.0, 0.0));
        let s = DetectionCounts { fn_count: 3, ..Default::default() }.scores();
        assert_eq!((s.moda, s.recall, s.precision), (0.0, 0.0, 1.0));
    }
}
