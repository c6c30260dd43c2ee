//! Classification datasets on disk: one CSV per sample plus a manifest.

use std::path::Path;

use serde::{Deserialize, Serialize};

use qst_classify::{generate_dataset, Dataset, DatasetConfig, LabeledSample};
use qst_core::measure::{to_csv, DataVector};
use qst_core::noise::NoiseSpec;
use qst_core::states::StateSpec;

use crate::error::{CliError, Result};
use crate::io::{parse_data_csv, read_bytes, read_json, sha256_hex, write_bytes, write_json};
use crate::ops::GridSpec;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileRecord {
    /// Relative to the manifest's directory, `/`-separated.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub label: String,
    pub label_index: usize,
    pub state: StateSpec,
    /// Corruptions applied in order.
    pub noise: Vec<NoiseSpec>,
    pub grid: GridSpec,
    /// Seed of the parameter draws; per-step seeds sit in `noise`.
    pub seed: u64,
    pub files: Vec<FileRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub config: DatasetConfig,
    pub classes: Vec<String>,
    pub width: usize,
    pub height: usize,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        read_json(&dir.join(MANIFEST_FILE))
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for e in &self.entries {
            counts[e.label_index] += 1;
        }
        counts
    }

    /// Checks that every referenced file exists with the recorded digest.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for file in self.entries.iter().flat_map(|e| &e.files) {
            let bytes = read_bytes(&dir.join(&file.path))?;
            if sha256_hex(&bytes) != file.sha256 {
                return Err(CliError::config(format!("{}: digest does not match the manifest", file.path)));
            }
        }
        Ok(())
    }

    /// Reads the samples back, verifying digests on the way.
    pub fn load_dataset(&self, dir: &Path) -> Result<Dataset> {
        let mut samples = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            let file = e.files.first().ok_or_else(|| CliError::config(format!("entry {} has no file", e.label)))?;
            let bytes = read_bytes(&dir.join(&file.path))?;
            if sha256_hex(&bytes) != file.sha256 {
                return Err(CliError::config(format!("{}: digest does not match the manifest", file.path)));
            }
            let text = String::from_utf8(bytes).map_err(|_| CliError::config(format!("{}: not UTF-8", file.path)))?;
            let image = parse_data_csv(&text)?;
            if image.len() != self.width * self.height {
                return Err(CliError::config(format!("{}: {} values, expected {}", file.path, image.len(), self.width * self.height)));
            }
            let (mix_sigma, mix_seed) = match e.noise.first() {
                Some(NoiseSpec::MixRandom { sigma, seed, .. }) => (*sigma, *seed),
                _ => (0.0, 0),
            };
            samples.push(LabeledSample { label: e.label_index, spec: e.state.clone(), mix_sigma, mix_seed, image });
        }
        Ok(Dataset { classes: self.classes.clone(), width: self.width, height: self.height, samples })
    }
}

/// Writes `samples/<class>_<index>.csv` for every sample and the manifest
/// into `dir`. Output bytes depend only on `cfg`.
pub fn write_dataset(cfg: &DatasetConfig, dir: &Path) -> Result<Manifest> {
    let data = generate_dataset(cfg)?;
    let grid_spec = GridSpec::square(cfg.grid, cfg.extent);
    let grid = grid_spec.build()?;
    let mut entries = Vec::with_capacity(data.samples.len());
    let mut per_class = vec![0usize; data.classes.len()];
    for s in &data.samples {
        let class = &data.classes[s.label];
        let path = format!("samples/{class}_{:05}.csv", per_class[s.label]);
        per_class[s.label] += 1;
        let csv = to_csv(&grid, &DataVector::raw(s.image.clone()))?;
        let sha256 = write_bytes(&dir.join(&path), csv.as_bytes())?;
        entries.push(ManifestEntry {
            label: class.clone(),
            label_index: s.label,
            state: s.spec.clone(),
            noise: vec![NoiseSpec::MixRandom { sigma: s.mix_sigma, density: cfg.mix_density, seed: s.mix_seed }],
            grid: grid_spec,
            seed: cfg.seed,
            files: vec![FileRecord { path, sha256 }],
        });
    }
    let manifest =
        Manifest { config: cfg.clone(), classes: data.classes, width: data.width, height: data.height, entries };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}
