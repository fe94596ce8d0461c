use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Per-pixel depth in meters plus a validity mask (`false` marks a hole).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthFrame {
    depth: Grid<f64>,
    valid: Grid<bool>,
}

impl DepthFrame {
    pub fn new(depth: Grid<f64>, valid: Grid<bool>) -> Result<Self> {
        depth.check_dims(&valid, "depth frame")?;
        for (d, v) in depth.iter().zip(valid.iter()) {
            if *v && !(d.is_finite() && *d >= 0.0) {
                return Err(Error::invalid(format!(
                    "valid depth pixel holds {d}, expected a finite value >= 0"
                )));
            }
        }
        Ok(Self { depth, valid })
    }

    /// Every finite, non-negative sample is valid.
    pub fn from_depth(depth: Grid<f64>) -> Self {
        let valid = depth.map(|d| d.is_finite() && *d >= 0.0);
        Self { depth, valid }
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            depth: Grid::filled(width, height, 0.0),
            valid: Grid::filled(width, height, false),
        }
    }

    pub fn width(&self) -> usize {
        self.depth.width()
    }

    pub fn height(&self) -> usize {
        self.depth.height()
    }

    pub fn depth(&self) -> &Grid<f64> {
        &self.depth
    }

    pub fn valid(&self) -> &Grid<bool> {
        &self.valid
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> Option<f64> {
        if *self.valid.get(x, y) {
            Some(*self.depth.get(x, y))
        } else {
            None
        }
    }

    pub fn set(&mut self, x: usize, y: usize, value: Option<f64>) {
        match value {
            Some(d) => {
                self.depth.set(x, y, d);
                self.valid.set(x, y, true);
            }
            None => {
                self.depth.set(x, y, 0.0);
                self.valid.set(x, y, false);
            }
        }
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn into_parts(self) -> (Grid<f64>, Grid<bool>) {
        (self.depth, self.valid)
    }
}

/// The four correlation images of one capture.
///
/// `a1..a4` are taken with the reference waveform delayed by 0, π/2, π and
/// 3π/2 of modulation phase, so that `atan2(a4 - a2, a1 - a3)` yields the
/// phase delay of the returned light.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourPhaseFrame {
    pub a1: Grid<f64>,
    pub a2: Grid<f64>,
    pub a3: Grid<f64>,
    pub a4: Grid<f64>,
}

impl FourPhaseFrame {
    pub fn new(a1: Grid<f64>, a2: Grid<f64>, a3: Grid<f64>, a4: Grid<f64>) -> Result<Self> {
        a1.check_dims(&a2, "four-phase frame")?;
        a1.check_dims(&a3, "four-phase frame")?;
        a1.check_dims(&a4, "four-phase frame")?;
        let all_finite = [&a1, &a2, &a3, &a4]
            .iter()
            .all(|g| g.iter().all(|v| v.is_finite()));
        if !all_finite {
            return Err(Error::invalid("four-phase frame holds non-finite samples"));
        }
        Ok(Self { a1, a2, a3, a4 })
    }

    pub fn width(&self) -> usize {
        self.a1.width()
    }

    pub fn height(&self) -> usize {
        self.a1.height()
    }

    pub fn planes(&self) -> [&Grid<f64>; 4] {
        [&self.a1, &self.a2, &self.a3, &self.a4]
    }
}

/// A real-valued image with a validity mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub values: Grid<f64>,
    pub valid: Grid<bool>,
}

impl Plane {
    pub fn new(values: Grid<f64>, valid: Grid<bool>) -> Result<Self> {
        values.check_dims(&valid, "plane")?;
        Ok(Self { values, valid })
    }

    pub fn width(&self) -> usize {
        self.values.width()
    }

    pub fn height(&self) -> usize {
        self.values.height()
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> Option<f64> {
        self.valid.get(x, y).then(|| *self.values.get(x, y))
    }
}

impl From<DepthFrame> for Plane {
    fn from(d: DepthFrame) -> Self {
        let (values, valid) = d.into_parts();
        Plane { values, valid }
    }
}
