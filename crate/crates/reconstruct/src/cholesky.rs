//! Direct gradient descent on a raw `[2, N, N]` tensor mapped to a
//! physical state by the density-matrix layer, under a fixed loss.

use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use qst_core::rng_from_seed;
use qst_nn::losses::{cross_entropy, kl_divergence, l1, l2};
use qst_nn::quantum::tensor_to_density;
use qst_nn::{Adam, AdamConfig, LrSchedule, Mode, Network, Tensor};

use crate::monitor::ConvergenceMonitor;
use crate::problem::ReconstructionProblem;
use crate::report::{FitReport, Progress};
use crate::{ReconstructError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    L1,
    L2,
    /// Cross-entropy between sum-normalized data and prediction.
    #[serde(rename = "ce")]
    CrossEntropy,
    /// `KL(d ‖ d′)` of the sum-normalized vectors.
    Kl,
}

impl Loss {
    pub const ALL: [Loss; 4] = [Loss::L1, Loss::L2, Loss::CrossEntropy, Loss::Kl];

    pub fn name(self) -> &'static str {
        match self {
            Loss::L1 => "l1",
            Loss::L2 => "l2",
            Loss::CrossEntropy => "ce",
            Loss::Kl => "kl",
        }
    }

    /// `(value, ∂value/∂pred)`.
    pub fn eval(self, pred: &[f64], data: &[f64]) -> (f64, Vec<f64>) {
        match self {
            Loss::L1 => l1(pred, data),
            Loss::L2 => l2(pred, data),
            Loss::CrossEntropy => cross_entropy(pred, data),
            Loss::Kl => kl_divergence(pred, data),
        }
    }
}

impl FromStr for Loss {
    type Err = ReconstructError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Loss::L1),
            "l2" => Ok(Loss::L2),
            "ce" | "cross_entropy" | "cross-entropy" => Ok(Loss::CrossEntropy),
            "kl" => Ok(Loss::Kl),
            other => Err(ReconstructError::Config(format!("unknown loss {other:?}; expected l1, l2, ce or kl"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CholeskyConfig {
    pub loss: Loss,
    pub max_iters: usize,
    pub adam: AdamConfig,
    /// Standard deviation of the random initial raw tensor.
    pub init_scale: f64,
    pub seed: u64,
    pub monitor: Option<ConvergenceMonitor>,
}

impl Default for CholeskyConfig {
    fn default() -> Self {
        Self::new(Loss::L2)
    }
}

impl CholeskyConfig {
    /// Tuned defaults for `loss`. The sign-like L1 gradient needs the
    /// slower-moving moment estimates; the other losses converge faster
    /// with β₁ = β₂ = 0.5.
    pub fn new(loss: Loss) -> Self {
        let adam = match loss {
            Loss::L1 => AdamConfig {
                beta1: 0.9,
                beta2: 0.999,
                schedule: LrSchedule { initial: 0.03, ..LrSchedule::default() },
                ..AdamConfig::default()
            },
            _ => AdamConfig { schedule: LrSchedule { initial: 0.01, ..LrSchedule::default() }, ..AdamConfig::default() },
        };
        Self { loss, max_iters: 2000, adam, init_scale: 1.0, seed: 0, monitor: Some(ConvergenceMonitor::default()) }
    }
}

pub fn cholesky_fit(problem: &ReconstructionProblem, cfg: &CholeskyConfig) -> Result<FitReport> {
    if cfg.max_iters == 0 {
        return Err(ReconstructError::Config("max_iters must be positive".into()));
    }
    let n = problem.cutoff();
    let mut report = FitReport::start(&format!("cholesky:{}", cfg.loss.name()), n)?;
    let mut data = problem.data().to_vec();
    if matches!(cfg.loss, Loss::CrossEntropy | Loss::Kl) && data.iter().any(|d| *d < 0.0) {
        report.flag("negative data clipped to 0");
        data.iter_mut().for_each(|d| *d = d.max(0.0));
    }

    let mut net = Network::new(&[vec![2, n, n]], problem.forward_model(false), cfg.seed)?;
    let mut rng = rng_from_seed(cfg.seed);
    let init: Vec<f64> = (0..2 * n * n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            cfg.init_scale * z
        })
        .collect();
    let mut raw = Tensor::new(vec![2, n, n], init)?;
    let mut adam = Adam::new(cfg.adam);
    let mut progress = Progress::new(problem, cfg.monitor);
    let name = cfg.loss.name();
    for it in 0..cfg.max_iters {
        let numerical = |e: qst_nn::NnError| ReconstructError::Numerical { iteration: it, msg: e.to_string() };
        let (pred, rho) = net.forward_tap(&[&raw], Mode::Train, 0).map_err(numerical)?;
        let (loss, grad) = cfg.loss.eval(pred.data(), &data);
        report.push_loss(name, loss);
        let grads = net.backward(&Tensor::vector(grad)).map_err(numerical)?;
        adam.update(raw.data_mut(), grads[0].data()).map_err(numerical)?;
        if progress.record(&mut report, tensor_to_density(&rho)?)? {
            break;
        }
    }
    Ok(report)
}
