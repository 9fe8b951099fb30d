use std::collections::BTreeMap;

use rayon::prelude::*;

use super::instance::instance_ap_codes;
use super::panoptic::panoptic_quality_codes;
use super::report::MetricReport;
use super::semantic::semantic_iou_labels;
use crate::error::{Error, Result};
use crate::image::LabelImage;
use crate::volume::{panoptic_code, SemanticClass};

/// Rendered semantic and instance masks of one view.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewMasks {
    pub semantic: LabelImage,
    pub instance: LabelImage,
}

/// Semantic, instance and panoptic codes with every class outside `classes`
/// folded into Free.
fn reduce(m: &ViewMasks, classes: &[SemanticClass]) -> Result<(Vec<u32>, Vec<u32>, Vec<u32>)> {
    if !m.semantic.same_size(&m.instance) {
        return Err(Error::shape("semantic and instance masks differ in size"));
    }
    let n = m.semantic.data.len();
    let (mut sem, mut inst, mut pan) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for (&s, &i) in m.semantic.data.iter().zip(&m.instance.data) {
        let c = SemanticClass::from_code(s).ok_or_else(|| Error::invalid(format!("unknown semantic code {s}")))?;
        let c = if classes.contains(&c) { c } else { SemanticClass::Free };
        let id = if c == SemanticClass::Pedestrian { i } else { 0 };
        sem.push(c as u32);
        inst.push(id);
        pan.push(panoptic_code(c, id));
    }
    Ok((sem, inst, pan))
}

fn view_report(pred: &ViewMasks, gt: &ViewMasks, classes: &[SemanticClass], thresholds: &[f64]) -> Result<MetricReport> {
    if !pred.semantic.same_size(&gt.semantic) {
        return Err(Error::shape(format!(
            "predicted view is {}x{}, ground truth {}x{}",
            pred.semantic.width, pred.semantic.height, gt.semantic.width, gt.semantic.height
        )));
    }
    let (ps, pi, pp) = reduce(pred, classes)?;
    let (gs, gi, gp) = reduce(gt, classes)?;
    let mut r = MetricReport::default();
    r.set_semantic(&semantic_iou_labels(&ps, &gs, classes)?);
    r.set_instance(&instance_ap_codes(&pi, &gi, thresholds)?);
    r.set_panoptic(&panoptic_quality_codes(&pp, &gp)?);
    Ok(r)
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Scores every view on its 2D masks and averages the views with equal
/// weight. Classes outside `classes` count as Free. IoU of a class is averaged
/// over the views where it is defined.
pub fn view_level_report(
    pred: &[ViewMasks],
    gt: &[ViewMasks],
    classes: &[SemanticClass],
    thresholds: &[f64],
) -> Result<MetricReport> {
    if pred.len() != gt.len() {
        return Err(Error::shape(format!("{} predicted views vs {} ground-truth views", pred.len(), gt.len())));
    }
    if pred.is_empty() {
        return Err(Error::invalid("view-level evaluation needs at least one view"));
    }
    let views: Vec<MetricReport> = pred
        .par_iter()
        .zip(gt)
        .map(|(p, g)| view_report(p, g, classes, thresholds))
        .collect::<Result<_>>()?;

    let mut keys: Vec<&String> = views.iter().flat_map(|v| v.iou.keys()).collect();
    keys.sort();
    keys.dedup();
    let iou: BTreeMap<String, f64> = keys
        .into_iter()
        .filter_map(|k| mean(views.iter().map(|v| v.iou.get(k).copied())).map(|m| (k.clone(), m)))
        .collect();
    Ok(MetricReport {
        iou,
        miou: mean(views.iter().map(|v| v.miou)),
        ap: mean(views.iter().map(|v| v.ap)),
        pq: mean(views.iter().map(|v| v.pq)),
        sq: mean(views.iter().map(|v| v.sq)),
        rq: mean(views.iter().map(|v| v.rq)),
        pq_class_mean: mean(views.iter().map(|v| v.pq_class_mean)),
        sq_class_mean: mean(views.iter().map(|v| v.sq_class_mean)),
        rq_class_mean: mean(views.iter().map(|v| v.rq_class_mean)),
        per_view: views,
        ..Default::default()
    })
}
