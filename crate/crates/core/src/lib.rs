//! Non-learned machinery for multi-view pedestrian occupancy prediction.
//!
//! The crate covers the geometric and evaluation side of the problem:
//!
//! * [`geometry`]: pinhole cameras, voxel grid indexing, bilinear sampling.
//! * [`fusion`]: occupancy labels from labeled depth maps of many views.
//! * [`view_transform`]: lifting per-view feature maps into a voxel volume.
//! * [`bev`]: ground-plane collapse, Gaussian targets, MSE loss, peak extraction.
//! * [`grouping`]: pedestrian instance grouping and panoptic merge.
//! * [`raymarch`]: first-hit voxel ray marching into per-view label images.
//! * [`metrics`]: MODA/MODP/F1, IoU/mIoU, set-based AP, PQ/SQ/RQ, view-level scores.
//! * [`losses`]: class weights, weighted cross-entropy, loss composition.
//! * [`scenegen`]: analytic procedural scenes used as ground-truth oracles.
//! * [`io`]: grid, image, calibration, point-cloud and CSV formats.
//! * [`cli`]: the `occukit` command-line front-end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bev;
pub mod cli;
pub mod config;
pub mod error;
pub mod fusion;
pub mod geometry;
pub mod grouping;
pub mod image;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod raymarch;
pub mod scenegen;
pub mod view_transform;
pub mod volume;

pub use error::{Error, Result};
pub use geometry::{CameraIntrinsics, CameraModel, CameraPose, Projection, VoxelGridSpec};
pub use volume::{InstanceVolume, LabelVolume, PanopticVolume, SemanticClass, VoxelLabels};
