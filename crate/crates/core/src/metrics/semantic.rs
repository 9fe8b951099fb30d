use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::volume::{LabelVolume, SemanticClass};

const N: usize = SemanticClass::ALL.len();

/// Per-class intersection over union.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticIouReport {
    pub classes: Vec<SemanticClass>,
    /// Aligned with `classes`; `None` where the class is absent from both sides.
    pub iou: Vec<Option<f64>>,
    /// IoU of the union of the listed stuff classes, if any are listed.
    pub background: Option<f64>,
    /// Mean over the classes with a defined IoU; 1 if there are none.
    pub miou: f64,
}

impl SemanticIouReport {
    pub fn get(&self, class: SemanticClass) -> Option<f64> {
        self.classes.iter().position(|&c| c == class).and_then(|i| self.iou[i])
    }
}

fn confusion(pred: &[u32], gt: &[u32]) -> Result<[[u64; N]; N]> {
    if pred.len() != gt.len() {
        return Err(Error::shape(format!("{} predicted labels vs {} ground-truth labels", pred.len(), gt.len())));
    }
    if let Some(&bad) = pred.iter().chain(gt).find(|&&c| c as usize >= N) {
        return Err(Error::invalid(format!("unknown semantic code {bad}")));
    }
    let m = pred
        .par_chunks(1 << 16)
        .zip(gt.par_chunks(1 << 16))
        .map(|(p, g)| {
            let mut m = [[0u64; N]; N];
            for (&a, &b) in p.iter().zip(g) {
                m[a as usize][b as usize] += 1;
            }
            m
        })
        .reduce(
            || [[0u64; N]; N],
            |mut a, b| {
                for i in 0..N {
                    for j in 0..N {
                        a[i][j] += b[i][j];
                    }
                }
                a
            },
        );
    Ok(m)
}

fn mask_iou(m: &[[u64; N]; N], set: &[usize]) -> Option<f64> {
    let mut inter = 0u64;
    let mut union = 0u64;
    for i in 0..N {
        for j in 0..N {
            let (p, g) = (set.contains(&i), set.contains(&j));
            if p && g {
                inter += m[i][j];
            }
            if p || g {
                union += m[i][j];
            }
        }
    }
    (union > 0).then(|| inter as f64 / union as f64)
}

/// IoU over per-element semantic codes; see [`semantic_iou`].
pub fn semantic_iou_labels(pred: &[u32], gt: &[u32], classes: &[SemanticClass]) -> Result<SemanticIouReport> {
    let m = confusion(pred, gt)?;
    let iou: Vec<Option<f64>> = classes.iter().map(|&c| mask_iou(&m, &[c as usize])).collect();
    let stuff: Vec<usize> = classes.iter().filter(|c| c.is_stuff()).map(|&c| c as usize).collect();
    let background = if stuff.is_empty() { None } else { mask_iou(&m, &stuff) };
    let defined: Vec<f64> = iou.iter().flatten().copied().collect();
    let miou = if defined.is_empty() { 1.0 } else { defined.iter().sum::<f64>() / defined.len() as f64 };
    Ok(SemanticIouReport { classes: classes.to_vec(), iou, background, miou })
}

/// Voxel-level IoU of each class in `classes` and their mean.
///
/// The background entry pools the stuff classes among `classes`.
pub fn semantic_iou(pred: &LabelVolume, gt: &LabelVolume, classes: &[SemanticClass]) -> Result<SemanticIouReport> {
    if pred.spec != gt.spec {
        return Err(Error::SpecMismatch);
    }
    let p: Vec<u32> = pred.labels.iter().map(|&l| l as u32).collect();
    let g: Vec<u32> = gt.labels.iter().map(|&l| l as u32).collect();
    semantic_iou_labels(&p, &g, classes)
}
