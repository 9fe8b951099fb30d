//! Default constants shared by the pipeline stages.
//!
//! [`Defaults::standard`] gathers every tunable in one serializable value so
//! a run can record exactly which settings produced its outputs.

use serde::{Deserialize, Serialize};

/// Edge length of a voxel, meters.
pub const VOXEL_SIZE: f64 = 0.10;
/// Confidence threshold applied to the BEV occupancy map before NMS.
pub const DETECTION_TAU: f64 = 0.5;
/// Planar radius for assigning pedestrian voxels to a location, meters.
pub const GROUPING_RADIUS: f64 = 0.5;
/// Planar distance under which a detection matches a ground-truth location, meters.
pub const MATCH_DISTANCE: f64 = 0.5;
/// Feature maps are one quarter of the image resolution.
pub const FEATURE_SCALE: f64 = 0.25;
/// Gaussian spread of BEV targets, meters (three cells).
pub const SPLAT_SIGMA: f64 = 0.3;
/// Suppression radius of BEV peak extraction, meters.
pub const NMS_RADIUS: f64 = 0.5;

pub const RAY_MIN_HIT_DISTANCE: f64 = 0.10;
pub const RAY_MAX_TRACE_DISTANCE: f64 = 50.0;
/// Step budget quoted for the renderer; only enforced when requested.
pub const RAY_STEP_BUDGET: u32 = 50;

pub const LAMBDA_WCE: f64 = 0.4;
pub const LAMBDA_LOVASZ: f64 = 0.3;
pub const LAMBDA_AFFINITY: f64 = 0.3;
/// Weight of the 2D loss in the total; the 3D loss gets `1 - LAMBDA_2D`.
pub const LAMBDA_2D: f64 = 0.3;
pub const CLASS_WEIGHT_EPSILON: f64 = 1e-3;

/// Number of semantic classes (Free, Pedestrian, Ground, Wall, Others).
pub const NUM_SEMANTIC_CLASSES: usize = 5;
/// Number of stuff classes in panoptic labels.
pub const NUM_STUFF_CLASSES: usize = 3;

/// IoU thresholds `{start, start + 0.05, ..., end}`.
///
/// Built from integer hundredths so every entry is the nearest double to its
/// decimal value.
pub fn iou_thresholds(start_hundredths: u32, end_hundredths: u32) -> Vec<f64> {
    (start_hundredths..=end_hundredths)
        .step_by(5)
        .map(|h| f64::from(h) / 100.0)
        .collect()
}

/// `{0.50, 0.55, ..., 0.95}` for volumetric instance AP.
pub fn volume_ap_thresholds() -> Vec<f64> {
    iou_thresholds(50, 95)
}

/// `{0.25, 0.30, ..., 0.70}` for view-level AP, where occlusion lowers overlaps.
pub fn view_ap_thresholds() -> Vec<f64> {
    iou_thresholds(25, 70)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Defaults {
    pub voxel_size: f64,
    pub feature_scale: f64,
    pub tau: f64,
    pub grouping_radius: f64,
    pub match_distance: f64,
    pub splat_sigma: f64,
    pub nms_radius: f64,
    pub volume_ap_thresholds: Vec<f64>,
    pub view_ap_thresholds: Vec<f64>,
    pub ray_min_hit_distance: f64,
    pub ray_max_trace_distance: f64,
    pub ray_step_budget: u32,
    pub lambda_wce: f64,
    pub lambda_lovasz: f64,
    pub lambda_affinity: f64,
    pub lambda_2d: f64,
    pub class_weight_epsilon: f64,
}

impl Defaults {
    pub fn standard() -> Self {
        Defaults {
            voxel_size: VOXEL_SIZE,
            feature_scale: FEATURE_SCALE,
            tau: DETECTION_TAU,
            grouping_radius: GROUPING_RADIUS,
            match_distance: MATCH_DISTANCE,
            splat_sigma: SPLAT_SIGMA,
            nms_radius: NMS_RADIUS,
            volume_ap_thresholds: volume_ap_thresholds(),
            view_ap_thresholds: view_ap_thresholds(),
            ray_min_hit_distance: RAY_MIN_HIT_DISTANCE,
            ray_max_trace_distance: RAY_MAX_TRACE_DISTANCE,
            ray_step_budget: RAY_STEP_BUDGET,
            lambda_wce: LAMBDA_WCE,
            lambda_lovasz: LAMBDA_LOVASZ,
            lambda_affinity: LAMBDA_AFFINITY,
            lambda_2d: LAMBDA_2D,
            class_weight_epsilon: CLASS_WEIGHT_EPSILON,
        }
    }
}
