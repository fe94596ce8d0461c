//! On-disk dataset layout.
//!
//! ```text
//! <root>/index.json
//! <root>/<subject>/rgb/rgb.png
//! <root>/<subject>/depth/depth.pfm          NaN marks missing depth
//! <root>/<subject>/depth/correlation.pfm    four stacked sample planes
//! <root>/<subject>/mask/regions.pgm         region ids 0..=5
//! <root>/<subject>/unary/unary.{pfm,json}   stacked probabilities + labels
//! <root>/<subject>/direction/direction.{pgm,png}
//! <root>/<subject>/features/, analysis/, refine/, eval/   command outputs
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tofhair_core::grid::Grid;
use tofhair_core::io;
use tofhair_core::noisemap::RegionMask;
use tofhair_core::synth::View;
use tofhair_core::{DepthFrame, Plane};

use crate::error::{CliError, CliResult};

pub const INDEX_FILE: &str = "index.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectEntry {
    pub name: String,
    pub width: usize,
    pub height: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view: Option<View>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Pixel count per simulated surface material.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub materials: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub subjects: Vec<SubjectEntry>,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    root: PathBuf,
}

impl Dataset {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn index_path(&self) -> PathBuf {
        self.root.join(INDEX_FILE)
    }

    pub fn load_index(&self) -> CliResult<DatasetIndex> {
        let path = self.index_path();
        if !path.exists() {
            return Err(CliError::Data(tofhair_core::Error::InvalidArgument(
                format!("no dataset index at {}", path.display()),
            )));
        }
        Ok(io::read_json(&path)?)
    }

    pub fn subject(&self, name: &str) -> SubjectPaths {
        SubjectPaths {
            dir: self.root.join(name),
        }
    }
}

/// Paths of one subject's files.
#[derive(Clone, Debug)]
pub struct SubjectPaths {
    pub dir: PathBuf,
}

impl SubjectPaths {
    pub fn rgb(&self) -> PathBuf {
        self.dir.join("rgb/rgb.png")
    }
    pub fn depth(&self) -> PathBuf {
        self.dir.join("depth/depth.pfm")
    }
    pub fn correlation(&self) -> PathBuf {
        self.dir.join("depth/correlation.pfm")
    }
    pub fn mask(&self) -> PathBuf {
        self.dir.join("mask/regions.pgm")
    }
    pub fn unary(&self) -> PathBuf {
        self.dir.join("unary/unary")
    }
    pub fn direction_ids(&self) -> PathBuf {
        self.dir.join("direction/direction.pgm")
    }
    pub fn direction_png(&self) -> PathBuf {
        self.dir.join("direction/direction.png")
    }
    pub fn features(&self, file: &str) -> PathBuf {
        self.dir.join("features").join(file)
    }
    pub fn analysis(&self, file: &str) -> PathBuf {
        self.dir.join("analysis").join(file)
    }
    pub fn refine(&self, file: &str) -> PathBuf {
        self.dir.join("refine").join(file)
    }
    pub fn eval(&self, file: &str) -> PathBuf {
        self.dir.join("eval").join(file)
    }

    pub fn read_depth(&self) -> CliResult<DepthFrame> {
        Ok(nan_grid_to_depth(io::read_pfm_plane(&self.depth())?))
    }

    pub fn read_mask(&self) -> CliResult<RegionMask> {
        Ok(RegionMask::from_ids(&io::read_pgm(&self.mask())?)?)
    }
}

/// Invalid pixels become NaN.
pub fn plane_to_nan_grid(values: &Grid<f64>, valid: &Grid<bool>) -> Grid<f64> {
    Grid::from_fn(values.width(), values.height(), |x, y| {
        if *valid.get(x, y) {
            *values.get(x, y)
        } else {
            f64::NAN
        }
    })
}

pub fn nan_grid_to_depth(grid: Grid<f64>) -> DepthFrame {
    let valid = grid.map(|v| v.is_finite());
    let values = grid.map(|v| if v.is_finite() { *v } else { 0.0 });
    DepthFrame::new(values, valid).expect("same dims")
}

pub fn nan_grid_to_plane(grid: Grid<f64>) -> Plane {
    nan_grid_to_depth(grid).into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nan_roundtrip() {
        let values = Grid::from_fn(2, 2, |x, y| (x + y) as f64);
        let valid = Grid::from_vec(2, 2, vec![true, false, true, true]).unwrap();
        let g = plane_to_nan_grid(&values, &valid);
        assert!(g.get(1, 0).is_nan());
        let d = nan_grid_to_depth(g);
        assert_eq!(d.valid(), &valid);
        assert_eq!(d.at(0, 1), Some(1.0));
    }

    #[test]
    fn missing_index_is_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = Dataset::new(dir.path()).load_index().unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
