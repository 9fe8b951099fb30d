//! Evaluation metrics: 2D detection scores, semantic IoU, set-based instance
//! AP, panoptic quality, and their view-level averages.

mod detection;
mod hungarian;
mod instance;
mod panoptic;
mod report;
mod semantic;
mod view;

pub use detection::{detection_scores, match_detections, DetectionCounts, DetectionScores, MatchReport, MatchedPair};
pub use hungarian::hungarian;
pub use instance::{instance_ap, instance_ap_codes, ApReport};
pub use panoptic::{panoptic_quality, panoptic_quality_codes, ClassPq, PanopticReport};
pub use report::MetricReport;
pub use semantic::{semantic_iou, semantic_iou_labels, SemanticIouReport};
pub use view::{view_level_report, ViewMasks};
