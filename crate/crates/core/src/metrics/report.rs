use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::detection::DetectionScores;
use super::instance::ApReport;
use super::panoptic::PanopticReport;
use super::semantic::SemanticIouReport;

/// JSON summary of an evaluation. Metrics that were not computed are `null`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub moda: Option<f64>,
    pub modp: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    /// Per-class IoU keyed by class name, plus `background` for the stuff union.
    #[serde(default)]
    pub iou: BTreeMap<String, f64>,
    pub miou: Option<f64>,
    pub ap: Option<f64>,
    pub pq: Option<f64>,
    pub sq: Option<f64>,
    pub rq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pq_class_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sq_class_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rq_class_mean: Option<f64>,
    #[serde(default)]
    pub per_view: Vec<MetricReport>,
}

impl MetricReport {
    pub fn set_detection(&mut self, s: &DetectionScores) {
        self.moda = Some(s.moda);
        self.modp = Some(s.modp);
        self.precision = Some(s.precision);
        self.recall = Some(s.recall);
        self.f1 = Some(s.f1);
    }

    pub fn set_semantic(&mut self, r: &SemanticIouReport) {
        for (c, v) in r.classes.iter().zip(&r.iou) {
            if let Some(v) = v {
                self.iou.insert(c.name().to_string(), *v);
            }
        }
        if let Some(b) = r.background {
            self.iou.insert("background".to_string(), b);
        }
        self.miou = Some(r.miou);
    }

    pub fn set_instance(&mut self, r: &ApReport) {
        self.ap = Some(r.ap);
    }

    pub fn set_panoptic(&mut self, r: &PanopticReport) {
        self.pq = Some(r.pq);
        self.sq = Some(r.sq);
        self.rq = Some(r.rq);
        self.pq_class_mean = Some(r.pq_class_mean);
        self.sq_class_mean = Some(r.sq_class_mean);
        self.rq_class_mean = Some(r.rq_class_mean);
    }

    /// Fills every metric missing here from `other`; IoU entries already
    /// present win. Views are appended.
    pub fn merge(&mut self, other: &MetricReport) {
        let fields = [
            (&mut self.moda, other.moda),
            (&mut self.modp, other.modp),
            (&mut self.precision, other.precision),
            (&mut self.recall, other.recall),
            (&mut self.f1, other.f1),
            (&mut self.miou, other.miou),
            (&mut self.ap, other.ap),
            (&mut self.pq, other.pq),
            (&mut self.sq, other.sq),
            (&mut self.rq, other.rq),
            (&mut self.pq_class_mean, other.pq_class_mean),
            (&mut self.sq_class_mean, other.sq_class_mean),
            (&mut self.rq_class_mean, other.rq_class_mean),
        ];
        for (mine, theirs) in fields {
            if mine.is_none() {
                *mine = theirs;
            }
        }
        for (k, v) in &other.iou {
            self.iou.entry(k.clone()).or_insert(*v);
        }
        self.per_view.extend(other.per_view.iter().cloned());
    }
}
