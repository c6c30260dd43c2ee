//! Serializable measurement setup: the grid, the operator kind and the
//! cutoff. Operator matrices are rebuilt from it rather than stored.

use serde::{Deserialize, Serialize};

use qst_core::measure::{build_operators, MeasurementKind, MeasurementSet, PhaseGrid, DEFAULT_PAD_FACTOR};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "snake_case")]
pub enum GridSpec {
    Square { nx: usize, ny: usize, min: f64, max: f64 },
    /// `k` uniform points in the disk of the given radius.
    Scatter { k: usize, radius: f64, seed: u64 },
}

impl GridSpec {
    pub fn square(n: usize, extent: f64) -> Self {
        GridSpec::Square { nx: n, ny: n, min: -extent, max: extent }
    }

    pub fn build(&self) -> Result<PhaseGrid> {
        Ok(match *self {
            GridSpec::Square { nx, ny, min, max } => PhaseGrid::square(min, max, nx, ny)?,
            GridSpec::Scatter { k, radius, seed } => PhaseGrid::scatter(k, radius, seed)?,
        })
    }
}

fn default_pad() -> usize {
    DEFAULT_PAD_FACTOR
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpsSpec {
    pub grid: GridSpec,
    pub kind: MeasurementKind,
    pub cutoff: usize,
    #[serde(default = "default_pad")]
    pub pad: usize,
}

impl OpsSpec {
    pub fn husimi(grid: GridSpec, cutoff: usize) -> Self {
        Self { grid, kind: MeasurementKind::HusimiProjector, cutoff, pad: DEFAULT_PAD_FACTOR }
    }

    pub fn build(&self) -> Result<MeasurementSet> {
        Ok(build_operators(&self.grid.build()?, self.kind, self.cutoff, self.pad)?)
    }
}
