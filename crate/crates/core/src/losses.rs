//! Occupancy training losses: class-balanced cross-entropy with its gradient
//! and the weighted combination of the 3D and 2D terms.
//!
//! Lovasz-softmax and scene-class affinity terms are accepted as precomputed
//! scalars.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{CLASS_WEIGHT_EPSILON, LAMBDA_2D, LAMBDA_AFFINITY, LAMBDA_LOVASZ, LAMBDA_WCE};
use crate::error::{Error, Result};
use crate::volume::LabelVolume;

/// Voxels per partial sum; fixed so sums do not depend on the thread count.
const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub weights: Vec<f64>,
    pub epsilon: f64,
}

impl ClassWeights {
    pub fn uniform(num_classes: usize) -> Self {
        ClassWeights { weights: vec![1.0; num_classes], epsilon: 0.0 }
    }
}

/// `w_c = 1 / ln(f_c + epsilon)` from absolute class counts `f_c`.
///
/// Counts with `f_c + epsilon <= 1` are rejected: their logarithm is not
/// positive.
pub fn class_weights(counts: &[f64], epsilon: f64) -> Result<ClassWeights> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::invalid(format!("epsilon must be finite and non-negative, got {epsilon}")));
    }
    let weights = counts
        .iter()
        .enumerate()
        .map(|(c, &f)| {
            if !(f >= 0.0) || !f.is_finite() {
                return Err(Error::invalid(format!("class {c} count {f} is not a finite non-negative number")));
            }
            if f + epsilon <= 1.0 {
                return Err(Error::invalid(format!(
                    "class {c} count {f} + epsilon {epsilon} <= 1 gives a non-positive log; counts, not fractions, are expected"
                )));
            }
            Ok(1.0 / (f + epsilon).ln())
        })
        .collect::<Result<_>>()?;
    Ok(ClassWeights { weights, epsilon })
}

/// Class weights from the voxel counts of a label volume.
pub fn class_weights_from_volume(vol: &LabelVolume) -> Result<ClassWeights> {
    let counts: Vec<f64> = vol.class_counts().iter().map(|&n| n as f64).collect();
    class_weights(&counts, CLASS_WEIGHT_EPSILON)
}

/// Weighted cross-entropy averaged over elements, with its gradient.
///
/// `logits` holds `C` scores per element, element-major. The value is the
/// mean of `w_y * -ln softmax(z)_y`; the gradient row of an element is
/// `w_y * (softmax(z) - onehot(y)) / N`.
pub fn weighted_ce_codes(logits: &[f64], labels: &[u32], weights: &ClassWeights) -> Result<(f64, Vec<f64>)> {
    let c = weights.weights.len();
    if c == 0 {
        return Err(Error::invalid("no classes"));
    }
    if logits.len() != labels.len() * c {
        return Err(Error::shape(format!("{} logits for {} labels of {c} classes", logits.len(), labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y as usize >= c) {
        return Err(Error::invalid(format!("label {bad} outside {c} classes")));
    }
    let n = labels.len();
    if n == 0 {
        return Ok((0.0, Vec::new()));
    }
    let inv_n = 1.0 / n as f64;
    let mut grad = vec![0.0; logits.len()];
    let partial: Vec<f64> = grad
        .par_chunks_mut(CHUNK * c)
        .zip(logits.par_chunks(CHUNK * c))
        .zip(labels.par_chunks(CHUNK))
        .map(|((g, z), y)| {
            let mut sum = 0.0;
            for ((g, z), &y) in g.chunks_mut(c).zip(z.chunks(c)).zip(y) {
                let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let denom: f64 = z.iter().map(|&v| (v - m).exp()).sum();
                let log_denom = denom.ln();
                let w = weights.weights[y as usize];
                sum += w * (log_denom - (z[y as usize] - m));
                for k in 0..c {
                    let p = (z[k] - m).exp() / denom;
                    g[k] = w * (p - f64::from(u8::from(k == y as usize))) * inv_n;
                }
            }
            sum
        })
        .collect();
    Ok((partial.iter().sum::<f64>() * inv_n, grad))
}

/// [`weighted_ce_codes`] against the semantic labels of a volume.
pub fn weighted_ce(logits: &[f64], labels: &LabelVolume, weights: &ClassWeights) -> Result<(f64, Vec<f64>)> {
    let codes: Vec<u32> = labels.labels.iter().map(|&l| l as u32).collect();
    weighted_ce_codes(logits, &codes, weights)
}

/// Raw loss values; absent 3D terms count as 0.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossTerms {
    pub wce: f64,
    pub lovasz: Option<f64>,
    pub affinity: Option<f64>,
    pub l2d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub wce: f64,
    pub lovasz: f64,
    pub affinity: f64,
    pub l3d: f64,
    pub l2d: f64,
    pub total: f64,
    pub lambda_wce: f64,
    pub lambda_lovasz: f64,
    pub lambda_affinity: f64,
    pub lambda_2d: f64,
}

/// `l3d = 0.4 wce + 0.3 lovasz + 0.3 affinity`, `total = 0.7 l3d + 0.3 l2d`.
pub fn compose_total(terms: &LossTerms) -> Result<LossBreakdown> {
    let lovasz = terms.lovasz.unwrap_or(0.0);
    let affinity = terms.affinity.unwrap_or(0.0);
    for (name, v) in [("wce", terms.wce), ("lovasz", lovasz), ("affinity", affinity), ("l2d", terms.l2d)] {
        if !v.is_finite() {
            return Err(Error::invalid(format!("loss term {name} is not finite ({v})")));
        }
    }
    let l3d = LAMBDA_WCE * terms.wce + LAMBDA_LOVASZ * lovasz + LAMBDA_AFFINITY * affinity;
    let total = (1.0 - LAMBDA_2D) * l3d + LAMBDA_2D * terms.l2d;
    Ok(LossBreakdown {
        wce: terms.wce,
        lovasz,
        affinity,
        l3d,
        l2d: terms.l2d,
        total,
        lambda_wce: LAMBDA_WCE,
        lambda_lovasz: LAMBDA_LOVASZ,
        lambda_affinity: LAMBDA_AFFINITY,
        lambda_2d: LAMBDA_2D,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn weight_examples() {
        let e = std::f64::consts::E;
        let w = class_weights(&[e * e - 0.001, e - 0.001], 1e-3).unwrap();
        assert!((w.weights[0] - 0.5).abs() < 1e-12);
        assert!((w.weights[1] - 1.0).abs() < 1e-12);
        assert!(class_weights(&[0.5], 1e-3).is_err());
        assert!(class_weights(&[0.999], 1e-3).is_err());
        assert!(class_weights(&[-3.0], 1e-3).is_err());
    }

    #[test]
    fn uniform_logits() {
        let w = ClassWeights { weights: vec![0.5, 1.0, 2.0, 1.5, 1.0], epsilon: 0.0 };
        let labels = [2u32, 2, 2];
        let (v, _) = weighted_ce_codes(&[0.3; 15], &labels, &w).unwrap();
        assert!((v - 2.0 * 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_limit() {
        let w = ClassWeights::uniform(3);
        let (v, g) = weighted_ce_codes(&[0.0, 80.0, 0.0], &[1], &w).unwrap();
        assert!(v < 1e-30);
        assert!(g.iter().all(|x| x.abs() < 1e-30));
    }

    #[test]
    fn finite_difference_gradient() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let (n, c) = (7, 5);
        let w = ClassWeights { weights: (0..c).map(|_| rng.gen_range(0.1..2.0)).collect(), epsilon: 0.0 };
        let z: Vec<f64> = (0..n * c).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let y: Vec<u32> = (0..n).map(|_| rng.gen_range(0..c as u32)).collect();
        let (_, g) = weighted_ce_codes(&z, &y, &w).unwrap();
        let h = 1e-5;
        for i in 0..z.len() {
            let mut zp = z.clone();
            zp[i] += h;
            let mut zm = z.clone();
            zm[i] -= h;
            let fd = (weighted_ce_codes(&zp, &y, &w).unwrap().0 - weighted_ce_codes(&zm, &y, &w).unwrap().0) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-4 * g[i].abs().max(1e-3), "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn chunked_sum_is_thread_independent() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 3 * CHUNK + 17;
        let z: Vec<f64> = (0..n * 5).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y: Vec<u32> = (0..n).map(|_| rng.gen_range(0..5)).collect();
        let w = ClassWeights::uniform(5);
        let a = weighted_ce_codes(&z, &y, &w).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| weighted_ce_codes(&z, &y, &w).unwrap());
        assert_eq!(a.0.to_bits(), b.0.to_bits());
    }

    #[test]
    fn shape_checks() {
        let w = ClassWeights::uniform(5);
        assert!(weighted_ce_codes(&[0.0; 9], &[0, 1], &w).is_err());
        assert!(weighted_ce_codes(&[0.0; 5], &[7], &w).is_err());
    }

    #[test]
    fn composition_examples() {
        let b = compose_total(&LossTerms { wce: 1.0, ..Default::default() }).unwrap();
        assert!((b.l3d - 0.4).abs() < 1e-15);
        assert!((b.total - 0.28).abs() < 1e-15);
        let b = compose_total(&LossTerms { wce: 1.0, lovasz: Some(1.0), affinity: Some(1.0), l2d: 1.0 }).unwrap();
        assert!((b.l3d - 1.0).abs() < 1e-15);
        assert!((b.total - 1.0).abs() < 1e-15);
        assert_eq!(compose_total(&LossTerms::default()).unwrap().total, 0.0);
        assert!(compose_total(&LossTerms { l2d: f64::NAN, ..Default::default() }).is_err());
    }

    proptest! {
        #[test]
        fn gradient_rows_sum_to_zero(z in prop::collection::vec(-20.0f64..20.0, 5..=50), y in 0u32..5) {
            let n = z.len() / 5;
            let z = &z[..n * 5];
            let w = ClassWeights { weights: vec![0.3, 1.2, 0.7, 2.0, 0.9], epsilon: 0.0 };
            let (v, g) = weighted_ce_codes(z, &vec![y; n], &w).unwrap();
            prop_assert!(v >= 0.0);
            for row in g.chunks(5) {
                prop_assert!(row.iter().sum::<f64>().abs() < 1e-10);
            }
        }

        #[test]
        fn composition_is_linear(a in 0.0f64..10.0, b in 0.0f64..10.0, c in 0.0f64..10.0, d in 0.0f64..10.0) {
            let one = compose_total(&LossTerms { wce: a, lovasz: Some(b), affinity: Some(c), l2d: d }).unwrap();
            let two = compose_total(&LossTerms { wce: 2.0 * a, lovasz: Some(2.0 * b), affinity: Some(2.0 * c), l2d: 2.0 * d }).unwrap();
            prop_assert!((two.l3d - 2.0 * one.l3d).abs() <= 1e-12 * (1.0 + one.l3d));
            prop_assert!((two.total - 2.0 * one.total).abs() <= 1e-12 * (1.0 + one.total));
        }
    }
}
