//! Dataset directory layout:
//!
//! ```text
//! <root>/calibration.json
//! <root>/scene.json
//! <root>/frames/NNNN/camNN.{depth.pfm,sem.pgm,inst.pgm}
//! <root>/gt/NNNN.{sem,inst}.mvpo
//! <root>/gt/NNNN.locations.csv
//! ```

use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetLayout {
    pub root: PathBuf,
}

impl DatasetLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DatasetLayout { root: root.into() }
    }

    pub fn calibration(&self) -> PathBuf {
        self.root.join("calibration.json")
    }

    pub fn scene(&self) -> PathBuf {
        self.root.join("scene.json")
    }

    pub fn frame_dir(&self, frame: u32) -> PathBuf {
        self.root.join("frames").join(format!("{frame:04}"))
    }

    pub fn depth(&self, frame: u32, cam: usize) -> PathBuf {
        self.frame_dir(frame).join(format!("cam{cam:02}.depth.pfm"))
    }

    pub fn semantic(&self, frame: u32, cam: usize) -> PathBuf {
        self.frame_dir(frame).join(format!("cam{cam:02}.sem.pgm"))
    }

    pub fn instance(&self, frame: u32, cam: usize) -> PathBuf {
        self.frame_dir(frame).join(format!("cam{cam:02}.inst.pgm"))
    }

    pub fn gt_dir(&self) -> PathBuf {
        self.root.join("gt")
    }

    pub fn gt_semantic(&self, frame: u32) -> PathBuf {
        self.gt_dir().join(format!("{frame:04}.sem.mvpo"))
    }

    pub fn gt_instance(&self, frame: u32) -> PathBuf {
        self.gt_dir().join(format!("{frame:04}.inst.mvpo"))
    }

    pub fn gt_locations(&self, frame: u32) -> PathBuf {
        self.gt_dir().join(format!("{frame:04}.locations.csv"))
    }

    /// Frame numbers present under `frames/`, ascending.
    pub fn frames(&self) -> std::io::Result<Vec<u32>> {
        let mut out: Vec<u32> = std::fs::read_dir(self.root.join("frames"))?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_str().and_then(|n| n.parse().ok()))
            .collect();
        out.sort_unstable();
        Ok(out)
    }
}

impl AsRef<Path> for DatasetLayout {
    fn as_ref(&self) -> &Path {
        &self.root
    }
}
