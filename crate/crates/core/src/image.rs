//! Row-major per-pixel label and depth images.

use crate::error::{Error, Result};

/// Integer label per pixel (semantic, instance or panoptic codes).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u32>,
}

impl LabelImage {
    pub fn zeros(width: usize, height: usize) -> Self {
        LabelImage { width, height, data: vec![0; width * height] }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<u32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::shape(format!("{width}x{height} image needs {} pixels, got {}", width * height, data.len())));
        }
        Ok(LabelImage { width, height, data })
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.data[y * self.width + x]
    }

    pub fn same_size(&self, other: &LabelImage) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Camera-space depth per pixel, meters; `+inf` where nothing was hit.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl DepthImage {
    pub fn from_data(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::shape(format!("{width}x{height} depth map needs {} pixels, got {}", width * height, data.len())));
        }
        Ok(DepthImage { width, height, data })
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}
