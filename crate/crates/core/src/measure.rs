//! Phase-space grids, measurement operators and quasi-probability data.
//!
//! Square grids are stored row-major with the imaginary part as the outer
//! (slow) index and the real part as the inner index, endpoints included.
//! Displaced operators are evaluated at a padded cutoff `pad · N` and then
//! restricted to the `N`-dimensional state space, which keeps truncation
//! artifacts away from the data at large displacements.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{QstError, Result};
use crate::fock::{trace_product, DensityMatrix, Displacer, C64};
use crate::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "snake_case")]
pub enum GridLayout {
    Square { nx: usize, ny: usize, min: f64, max: f64 },
    Scatter { radius: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    layout: GridLayout,
    points: Vec<C64>,
}

impl PhaseGrid {
    /// `nx × ny` points with real and imaginary parts evenly spaced over
    /// `[min, max]`.
    pub fn square(min: f64, max: f64, nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(QstError::InvalidGrid(format!("grid {nx}x{ny} needs at least 2 points per axis")));
        }
        if !(max > min) || !min.is_finite() || !max.is_finite() {
            return Err(QstError::InvalidGrid(format!("degenerate extent [{min}, {max}]")));
        }
        let axis = |k: usize, n: usize| min + (max - min) * k as f64 / (n - 1) as f64;
        let points = (0..ny)
            .flat_map(|j| (0..nx).map(move |i| C64::new(axis(i, nx), axis(j, ny))))
            .collect();
        Ok(Self { layout: GridLayout::Square { nx, ny, min, max }, points })
    }

    /// `k` uniform points in the disk `|β| ≤ radius`.
    pub fn scatter(k: usize, radius: f64, seed: u64) -> Result<Self> {
        if k == 0 || !(radius > 0.0) || !radius.is_finite() {
            return Err(QstError::InvalidGrid(format!("{k} points in radius {radius}")));
        }
        let mut rng = rng_from_seed(seed);
        let mut points = Vec::with_capacity(k);
        while points.len() < k {
            let re = rng.random_range(-radius..=radius);
            let im = rng.random_range(-radius..=radius);
            if re * re + im * im <= radius * radius {
                points.push(C64::new(re, im));
            }
        }
        Ok(Self { layout: GridLayout::Scatter { radius, seed }, points })
    }

    pub fn layout(&self) -> GridLayout {
        self.layout
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `(nx, ny)` for square grids.
    pub fn shape(&self) -> Option<(usize, usize)> {
        match self.layout {
            GridLayout::Square { nx, ny, .. } => Some((nx, ny)),
            GridLayout::Scatter { .. } => None,
        }
    }

    /// `(Δre, Δim)` for square grids.
    pub fn spacing(&self) -> Option<(f64, f64)> {
        match self.layout {
            GridLayout::Square { nx, ny, min, max } => {
                Some(((max - min) / (nx - 1) as f64, (max - min) / (ny - 1) as f64))
            }
            GridLayout::Scatter { .. } => None,
        }
    }
}

/// The default 32 × 32 grid over `[−5, 5]²`.
pub fn make_square_grid(min: f64, max: f64, nx: usize, ny: usize) -> Result<PhaseGrid> {
    PhaseGrid::square(min, max, nx, ny)
}

pub fn sample_scatter(k: usize, radius: f64, seed: u64) -> Result<PhaseGrid> {
    PhaseGrid::scatter(k, radius, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasurementKind {
    /// `D(β)|0⟩⟨0|D(β)†`.
    HusimiProjector,
    /// `D(β)|n⟩⟨n|D(β)†`.
    GeneralizedQ { n: usize },
    /// `D(β) P D(β)†` with the photon parity `P`.
    DisplacedParity,
}

impl MeasurementKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "husimi" | "husimi_projector" => Ok(Self::HusimiProjector),
            "wigner" | "displaced_parity" => Ok(Self::DisplacedParity),
            other => match other.strip_prefix("generalized_q") {
                Some(rest) => rest
                    .trim_start_matches([':', '('])
                    .trim_end_matches(')')
                    .parse()
                    .map(|n| Self::GeneralizedQ { n })
                    .map_err(|_| QstError::InvalidArgument(format!("bad photon index in {other:?}"))),
                None => Err(QstError::InvalidArgument(format!("unknown measurement kind {other:?}"))),
            },
        }
    }
}

pub const DEFAULT_PAD_FACTOR: usize = 2;

fn check_pad(pad: usize) -> Result<()> {
    if pad == 0 {
        Err(QstError::InvalidArgument("pad factor must be >= 1".into()))
    } else {
        Ok(())
    }
}

/// One Hermitian operator per grid point.
#[derive(Debug, Clone)]
pub struct MeasurementSet {
    kind: MeasurementKind,
    cutoff: usize,
    grid: PhaseGrid,
    operators: Vec<DMatrix<C64>>,
}

fn displaced_projector(disp: &Displacer, beta: C64, n: usize, cutoff: usize) -> DMatrix<C64> {
    let v: DVector<C64> = disp.displaced_fock(beta, n).rows(0, cutoff).into_owned();
    &v * v.adjoint()
}

/// Restriction of `D(β)PD(β)†` to the first `cutoff` levels; in the padded
/// space this equals `D(2β)P` exactly.
fn displaced_parity(disp: &Displacer, beta: C64, cutoff: usize) -> DMatrix<C64> {
    let mut m = disp.block(beta * 2.0, cutoff);
    for k in (1..cutoff).step_by(2) {
        m.column_mut(k).neg_mut();
    }
    m
}

/// Builds the operators for `kind` on `grid`, using a displacement at
/// cutoff `pad · cutoff`.
pub fn build_operators(grid: &PhaseGrid, kind: MeasurementKind, cutoff: usize, pad: usize) -> Result<MeasurementSet> {
    check_pad(pad)?;
    if cutoff < 2 {
        return Err(QstError::InvalidDimension(cutoff));
    }
    if let MeasurementKind::GeneralizedQ { n } = kind {
        if n >= cutoff {
            return Err(QstError::OutOfSpace { index: n, cutoff });
        }
    }
    let disp = Displacer::new(cutoff * pad)?;
    let operators = grid
        .points()
        .iter()
        .map(|&beta| match kind {
            MeasurementKind::HusimiProjector => displaced_projector(&disp, beta, 0, cutoff),
            MeasurementKind::GeneralizedQ { n } => displaced_projector(&disp, beta, n, cutoff),
            MeasurementKind::DisplacedParity => displaced_parity(&disp, beta, cutoff),
        })
        .collect();
    Ok(MeasurementSet { kind, cutoff, grid: grid.clone(), operators })
}

impl MeasurementSet {
    pub fn kind(&self) -> MeasurementKind {
        self.kind
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn operators(&self) -> &[DMatrix<C64>] {
        &self.operators
    }

    /// `Re tr(O_i ρ)` for every operator.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        if rho.dim() != self.cutoff {
            return Err(QstError::DimensionMismatch { expected: self.cutoff, got: rho.dim() });
        }
        Ok(self.operators.iter().map(|o| trace_product(o, rho.matrix()).re).collect())
    }

    /// Real sensing matrix, one row per operator, laid out as
    /// `[Re O (row-major N²) | Im O (row-major N²)]`. For Hermitian `O` and
    /// `ρ`, `Re tr(Oρ)` is the dot product of a row with `[Re ρ | Im ρ]`.
    pub fn sensing_rows(&self) -> Vec<f64> {
        let n2 = self.cutoff * self.cutoff;
        let mut out = vec![0.0; self.len() * 2 * n2];
        for (row, o) in out.chunks_exact_mut(2 * n2).zip(&self.operators) {
            let (re, im) = row.split_at_mut(n2);
            for i in 0..self.cutoff {
                for j in 0..self.cutoff {
                    re[i * self.cutoff + j] = o[(i, j)].re;
                    im[i * self.cutoff + j] = o[(i, j)].im;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    Raw,
    UnitMax,
}

/// Measurement statistics aligned with grid points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataVector {
    pub values: Vec<f64>,
    pub normalization: Normalization,
    /// Maximum of the raw data, recorded when normalized.
    pub max_value: Option<f64>,
}

impl DataVector {
    pub fn raw(values: Vec<f64>) -> Self {
        Self { values, normalization: Normalization::Raw, max_value: None }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        Self { values, normalization: self.normalization, max_value: self.max_value }
    }
}

fn check_grid_dim(rho: &DensityMatrix, pad: usize) -> Result<()> {
    check_pad(pad)?;
    if rho.dim() < 2 {
        return Err(QstError::InvalidDimension(rho.dim()));
    }
    Ok(())
}

/// `Q_n(β) = ⟨n|D(β)†ρD(β)|n⟩` at every grid point.
pub fn generalized_q(rho: &DensityMatrix, grid: &PhaseGrid, n: usize, pad: usize) -> Result<DataVector> {
    check_grid_dim(rho, pad)?;
    let cutoff = rho.dim();
    let padded = cutoff * pad;
    if n >= padded {
        return Err(QstError::OutOfSpace { index: n, cutoff: padded });
    }
    let disp = Displacer::new(padded)?;
    let values = grid
        .points()
        .iter()
        .map(|&beta| {
            let v = disp.displaced_fock(beta, n);
            let v = v.rows(0, cutoff);
            (v.adjoint() * rho.matrix() * v)[(0, 0)].re
        })
        .collect();
    Ok(DataVector::raw(values))
}

/// Husimi function `Q(β) = ⟨β|ρ|β⟩/π`.
pub fn husimi(rho: &DensityMatrix, grid: &PhaseGrid, pad: usize) -> Result<DataVector> {
    let mut q = generalized_q(rho, grid, 0, pad)?;
    q.values.iter_mut().for_each(|v| *v /= PI);
    Ok(q)
}

/// Wigner function `W(β) = (2/π) tr[ρ D(β) P D(β)†]` with `ρ` embedded in a
/// space `pad` times larger.
pub fn wigner(rho: &DensityMatrix, grid: &PhaseGrid, pad: usize) -> Result<DataVector> {
    check_grid_dim(rho, pad)?;
    let cutoff = rho.dim();
    let disp = Displacer::new(cutoff * pad)?;
    let values = grid
        .points()
        .iter()
        .map(|&beta| 2.0 / PI * trace_product(&displaced_parity(&disp, beta, cutoff), rho.matrix()).re)
        .collect();
    Ok(DataVector::raw(values))
}

/// Divides by the maximum value and records it.
pub fn normalize_unit_max(data: &DataVector) -> Result<DataVector> {
    let max = data.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) || !max.is_finite() {
        return Err(QstError::DegenerateNormalization(max));
    }
    let scale = data.max_value.unwrap_or(1.0) * max;
    Ok(DataVector {
        values: data.values.iter().map(|v| v / max).collect(),
        normalization: Normalization::UnitMax,
        max_value: Some(scale),
    })
}

/// Inverse of [`normalize_unit_max`].
pub fn denormalize(data: &DataVector) -> DataVector {
    match (data.normalization, data.max_value) {
        (Normalization::UnitMax, Some(m)) => DataVector::raw(data.values.iter().map(|v| v * m).collect()),
        _ => DataVector::raw(data.values.clone()),
    }
}

/// CSV with header `re,im,value`, one line per grid point.
pub fn to_csv(grid: &PhaseGrid, data: &DataVector) -> Result<String> {
    if grid.len() != data.len() {
        return Err(QstError::DimensionMismatch { expected: grid.len(), got: data.len() });
    }
    let mut out = String::from("re,im,value\n");
    for (b, v) in grid.points().iter().zip(&data.values) {
        writeln!(out, "{},{},{}", b.re, b.im, v).expect("writing to a String cannot fail");
    }
    Ok(out)
}

/// Affine map from data values to 8-bit gray levels, stored next to a PGM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgmMapping {
    pub width: usize,
    pub height: usize,
    /// Data value shown as gray level 0.
    pub value_at_0: f64,
    /// Data value shown as gray level 255.
    pub value_at_255: f64,
    /// The first image row holds the smallest imaginary part.
    pub first_row_im: f64,
    pub last_row_im: f64,
}

/// Binary 8-bit PGM of square-grid data plus the value mapping.
pub fn to_pgm(grid: &PhaseGrid, data: &DataVector) -> Result<(Vec<u8>, PgmMapping)> {
    let GridLayout::Square { nx, ny, min, max } = grid.layout() else {
        return Err(QstError::InvalidGrid("heatmaps need a square grid".into()));
    };
    if data.len() != nx * ny {
        return Err(QstError::DimensionMismatch { expected: nx * ny, got: data.len() });
    }
    let lo = data.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut bytes = format!("P5\n{nx} {ny}\n255\n").into_bytes();
    bytes.extend(data.values.iter().map(|v| (255.0 * (v - lo) / span).round().clamp(0.0, 255.0) as u8));
    let mapping = PgmMapping {
        width: nx,
        height: ny,
        value_at_0: lo,
        value_at_255: lo + span,
        first_row_im: min,
        last_row_im: max,
    };
    Ok((bytes, mapping))
}
