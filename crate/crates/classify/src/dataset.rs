//! Labeled Husimi-image datasets.
//!
//! Each sample draws in-range parameters for its class, mixes the state
//! with a random density matrix (weight σ ~ U[0, σ_max]), evaluates the
//! Husimi function on a square grid and scales it to unit maximum.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use qst_core::measure::{husimi, normalize_unit_max, DataVector, PhaseGrid};
use qst_core::noise::{additive_gaussian, mix_random};
use qst_core::states::{sample_spec, StateSpec};
use qst_core::rng_from_seed;

use crate::{ClassifyError, Result};

/// The seven state families, in label order.
pub const CLASS_NAMES: [&str; 7] = ["fock", "coherent", "thermal", "num", "binomial", "cat", "gkp"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub classes: Vec<String>,
    pub per_class: usize,
    pub cutoff: usize,
    /// Grid points per axis.
    pub grid: usize,
    /// The grid spans `[-extent, extent]` on both axes.
    pub extent: f64,
    pub mix_sigma_max: f64,
    pub mix_density: f64,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            classes: CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
            per_class: 600,
            cutoff: 32,
            grid: 16,
            extent: 5.0,
            mix_sigma_max: 0.5,
            mix_density: 0.8,
            seed: 0,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes.len() < 2 {
            return Err(ClassifyError::Config("need at least two classes".into()));
        }
        for c in &self.classes {
            if !CLASS_NAMES.contains(&c.as_str()) {
                return Err(ClassifyError::Config(format!("unknown class {c:?}")));
            }
        }
        if self.per_class == 0 {
            return Err(ClassifyError::EmptyDataset);
        }
        if !(0.0..=0.5).contains(&self.mix_sigma_max) {
            return Err(ClassifyError::Config(format!("mix_sigma_max {} outside [0, 0.5]", self.mix_sigma_max)));
        }
        if self.grid < 2 || !(self.extent > 0.0) {
            return Err(ClassifyError::Config("grid needs at least 2 points and a positive extent".into()));
        }
        Ok(())
    }

    pub fn phase_grid(&self) -> Result<PhaseGrid> {
        Ok(PhaseGrid::square(-self.extent, self.extent, self.grid, self.grid)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub label: usize,
    pub spec: StateSpec,
    pub mix_sigma: f64,
    pub mix_seed: u64,
    /// Row-major `grid × grid`, imaginary axis outer.
    pub image: Vec<f64>,
}

impl LabeledSample {
    pub fn one_hot(&self, n_classes: usize) -> Vec<f64> {
        (0..n_classes).map(|i| if i == self.label { 1.0 } else { 0.0 }).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub classes: Vec<String>,
    pub width: usize,
    pub height: usize,
    pub samples: Vec<LabeledSample>,
}

impl Dataset {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    /// Copy with `N(0, σ²)` added to every pixel (no clipping or
    /// renormalization), sample `i` using seed `seed + i`.
    pub fn with_additive_noise(&self, sigma: f64, seed: u64) -> Result<Self> {
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let noisy = additive_gaussian(&DataVector::raw(s.image.clone()), sigma, seed.wrapping_add(i as u64))?;
                Ok(LabeledSample { image: noisy.values, ..s.clone() })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { samples, ..self.clone() })
    }
}

/// Renders one state to a unit-max Husimi image.
pub fn render(spec: &StateSpec, mix_sigma: f64, mix_density: f64, mix_seed: u64, grid: &PhaseGrid) -> Result<Vec<f64>> {
    let rho = mix_random(&spec.build()?, mix_sigma, mix_density, mix_seed)?;
    Ok(normalize_unit_max(&husimi(&rho, grid, 2)?)?.values)
}

/// Class-balanced dataset, byte-identical for a given config. Parameter
/// draws are sequential; rendering runs in parallel.
pub fn generate_dataset(cfg: &DatasetConfig) -> Result<Dataset> {
    cfg.validate()?;
    let grid = cfg.phase_grid()?;
    let mut rng = rng_from_seed(cfg.seed);
    let mut plan = Vec::with_capacity(cfg.classes.len() * cfg.per_class);
    for (label, class) in cfg.classes.iter().enumerate() {
        for _ in 0..cfg.per_class {
            let spec = sample_spec(class, cfg.cutoff, &mut rng)?;
            let sigma = if cfg.mix_sigma_max > 0.0 { rng.random_range(0.0..=cfg.mix_sigma_max) } else { 0.0 };
            plan.push((label, spec, sigma, rng.random::<u64>()));
        }
    }
    let samples = plan
        .into_par_iter()
        .map(|(label, spec, mix_sigma, mix_seed)| {
            let image = render(&spec, mix_sigma, cfg.mix_density, mix_seed, &grid)?;
            Ok(LabeledSample { label, spec, mix_sigma, mix_seed, image })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { classes: cfg.classes.clone(), width: cfg.grid, height: cfg.grid, samples })
}
