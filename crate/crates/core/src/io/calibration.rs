//! Camera rigs as JSON: `[{name, width, height, K, R, t}]`, matrices row-major.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{read_text, write_bytes};
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, CameraModel, CameraPose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationEntry {
    pub name: String,
    pub width: u32,
    pub height: u32,
    #[serde(rename = "K")]
    pub k: [f64; 9],
    #[serde(rename = "R")]
    pub r: [f64; 9],
    pub t: [f64; 3],
}

impl CalibrationEntry {
    pub fn from_camera(cam: &CameraModel) -> Self {
        let k = cam.intrinsics;
        let r = cam.pose.rotation;
        CalibrationEntry {
            name: cam.name.clone(),
            width: k.width,
            height: k.height,
            k: [k.fx, 0.0, k.cx, 0.0, k.fy, k.cy, 0.0, 0.0, 1.0],
            r: [r[(0, 0)], r[(0, 1)], r[(0, 2)], r[(1, 0)], r[(1, 1)], r[(1, 2)], r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            t: [cam.pose.translation.x, cam.pose.translation.y, cam.pose.translation.z],
        }
    }

    pub fn to_camera(&self) -> Result<CameraModel> {
        let k = &self.k;
        if k[1] != 0.0 || k[3] != 0.0 || k[6] != 0.0 || k[7] != 0.0 || k[8] != 1.0 {
            return Err(Error::InvalidCamera(format!(
                "camera '{}': K must be [fx 0 cx; 0 fy cy; 0 0 1]",
                self.name
            )));
        }
        let intrinsics = CameraIntrinsics::new(k[0], k[4], k[2], k[5], self.width, self.height)?;
        let rotation = Matrix3::from_row_slice(&self.r);
        let pose = CameraPose::new(rotation, Vector3::from(self.t))
            .map_err(|e| Error::InvalidCamera(format!("camera '{}': {e}", self.name)))?;
        CameraModel::new(self.name.clone(), intrinsics, pose)
    }
}

/// Parses and validates a calibration document.
pub fn parse_calibration(text: &str) -> Result<Vec<CameraModel>> {
    let entries: Vec<CalibrationEntry> = serde_json::from_str(text).map_err(super::FormatError::from)?;
    entries.iter().map(CalibrationEntry::to_camera).collect()
}

pub fn load_calibration(path: &Path) -> Result<Vec<CameraModel>> {
    parse_calibration(&read_text(path)?)
}

pub fn save_calibration(cams: &[CameraModel], path: &Path) -> Result<()> {
    let entries: Vec<CalibrationEntry> = cams.iter().map(CalibrationEntry::from_camera).collect();
    let mut text = serde_json::to_string_pretty(&entries).map_err(super::FormatError::from)?;
    text.push('\n');
    Ok(write_bytes(path, text.as_bytes())?)
}
