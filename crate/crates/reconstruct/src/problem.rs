//! Measurement data plus the operators that produced it.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use qst_core::measure::{normalize_unit_max, DataVector, MeasurementSet};
use qst_core::noise::gaussian_convolve;
use qst_core::{root_fidelity, DensityMatrix};
use qst_nn::LayerSpec;

use crate::{ReconstructError, Result};

/// Corruption of the data that the network backends model explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KnownNoise {
    /// `N(0, σ²)` added after unit-max normalization.
    Additive { sigma: f64 },
    /// Thermal-kernel convolution before normalization.
    Convolution { n_th: f64 },
}

/// How generated statistics are brought to the scale of the unit-max data
/// before they are compared with it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// Rescale to the same total as the data. Smooth in the statistics.
    #[default]
    MatchSum,
    /// Divide by the maximum, like the data. Its gradient runs through a
    /// single entry, which slows the network fits considerably.
    UnitMax,
}

#[derive(Debug, Clone)]
pub struct ReconstructionProblem {
    data: Vec<f64>,
    scaling: Scaling,
    ops: MeasurementSet,
    rows: Arc<Vec<f64>>,
    known_noise: Option<KnownNoise>,
    truth: Option<DensityMatrix>,
}

impl ReconstructionProblem {
    /// Data are scaled to unit maximum; one value per operator.
    pub fn new(data: &[f64], ops: MeasurementSet) -> Result<Self> {
        if data.len() != ops.len() {
            return Err(ReconstructError::Problem(format!("{} data values for {} operators", data.len(), ops.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(ReconstructError::Problem("data contain non-finite values".into()));
        }
        let data = normalize_unit_max(&DataVector::raw(data.to_vec()))?.values;
        if !(data.iter().sum::<f64>() > 0.0) {
            return Err(ReconstructError::Problem("data sum to a non-positive total".into()));
        }
        let rows = Arc::new(ops.sensing_rows());
        Ok(Self { data, scaling: Scaling::default(), ops, rows, known_noise: None, truth: None })
    }

    /// Noise-free data of `rho` under `ops`.
    pub fn from_state(rho: &DensityMatrix, ops: MeasurementSet) -> Result<Self> {
        let data = ops.apply(rho)?;
        Self::new(&data, ops)?.with_truth(rho.clone())
    }

    pub fn with_known_noise(mut self, noise: KnownNoise) -> Result<Self> {
        match noise {
            KnownNoise::Additive { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                return Err(ReconstructError::Problem(format!("additive noise sigma {sigma}")));
            }
            KnownNoise::Convolution { n_th } => {
                if !(n_th > 0.0) {
                    return Err(ReconstructError::Problem(format!("convolution n_th {n_th} must be > 0")));
                }
                if self.ops.grid().shape().is_none() {
                    return Err(ReconstructError::Problem("convolution noise needs a square grid".into()));
                }
            }
            _ => {}
        }
        self.known_noise = Some(noise);
        Ok(self)
    }

    pub fn with_scaling(mut self, scaling: Scaling) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn scaling(&self) -> Scaling {
        self.scaling
    }

    /// Attaches the true state so fits can report fidelity traces.
    pub fn with_truth(mut self, rho: DensityMatrix) -> Result<Self> {
        if rho.dim() != self.cutoff() {
            return Err(ReconstructError::Problem(format!(
                "true state has dimension {}, problem cutoff is {}",
                rho.dim(),
                self.cutoff()
            )));
        }
        self.truth = Some(rho);
        Ok(self)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn ops(&self) -> &MeasurementSet {
        &self.ops
    }

    pub fn sensing_rows(&self) -> Arc<Vec<f64>> {
        self.rows.clone()
    }

    pub fn cutoff(&self) -> usize {
        self.ops.cutoff()
    }

    pub fn n_ops(&self) -> usize {
        self.ops.len()
    }

    pub fn known_noise(&self) -> Option<KnownNoise> {
        self.known_noise
    }

    pub fn truth(&self) -> Option<&DensityMatrix> {
        self.truth.as_ref()
    }

    /// Squared fidelity with the true state, when one is attached.
    pub fn fidelity(&self, rho: &DensityMatrix) -> Result<Option<f64>> {
        match &self.truth {
            Some(t) => Ok(Some(root_fidelity(t, rho)?.powi(2))),
            None => Ok(None),
        }
    }

    fn data_total(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Noise-free statistics of `rho` as the data would look: convolved when
    /// convolution noise is known, then scaled per [`Scaling`].
    pub fn predict(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        let mut stats = DataVector::raw(self.ops.apply(rho)?);
        if let Some(KnownNoise::Convolution { n_th }) = self.known_noise {
            stats = gaussian_convolve(&stats, self.ops.grid(), n_th)?;
        }
        match self.scaling {
            Scaling::UnitMax => Ok(normalize_unit_max(&stats)?.values),
            Scaling::MatchSum => {
                let sum: f64 = stats.values.iter().sum();
                if !(sum > 0.0) {
                    return Err(ReconstructError::Problem(format!("statistics sum to {sum}")));
                }
                let s = self.data_total() / sum;
                Ok(stats.values.iter().map(|v| v * s).collect())
            }
        }
    }

    /// Layers mapping a raw `[2, N, N]` tensor to scaled statistics:
    /// density matrix, expectation, the known convolution, the scaling and,
    /// if `with_additive` is set, the known additive noise.
    pub(crate) fn forward_model(&self, with_additive: bool) -> Vec<LayerSpec> {
        let n = self.cutoff();
        let mut specs = vec![
            LayerSpec::DensityMatrix,
            LayerSpec::Expectation { n_ops: self.n_ops(), dim: n, rows: Some(self.rows.clone()) },
        ];
        if let Some(KnownNoise::Convolution { n_th }) = self.known_noise {
            let (nx, ny) = self.ops.grid().shape().expect("checked when the noise was attached");
            let (spacing_x, spacing_y) = self.ops.grid().spacing().expect("square grid");
            specs.push(LayerSpec::GaussianConv { n_th, nx, ny, spacing_x, spacing_y });
        }
        specs.push(match self.scaling {
            Scaling::UnitMax => LayerSpec::UnitMax,
            Scaling::MatchSum => LayerSpec::SumScale { total: self.data_total() },
        });
        if let (true, Some(KnownNoise::Additive { sigma })) = (with_additive, self.known_noise) {
            if sigma > 0.0 {
                specs.push(LayerSpec::GaussianNoise { sigma });
            }
        }
        specs
    }

    /// Mean absolute difference between predicted statistics and data.
    pub fn residual(&self, rho: &DensityMatrix) -> Result<f64> {
        let p = self.predict(rho)?;
        Ok(p.iter().zip(&self.data).map(|(a, b)| (a - b).abs()).sum::<f64>() / p.len() as f64)
    }
}
