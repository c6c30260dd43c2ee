//! Conditional-GAN reconstruction.
//!
//! The generator maps the data vector `d` to a raw tensor, then through the
//! density-matrix and expectation layers to generated statistics `d′`. The
//! discriminator scores pairs `(d, x)` with the mean of elementwise
//! sigmoids. Each iteration takes one Adam step on the discriminator
//!
//! `L_D = −log D(d, d) − log(1 − D(d, d′)) + λ_Δ (‖∇ₓD‖ − 1)²`
//!
//! followed by one step on the generator against the updated discriminator
//!
//! `L_G = log(1 − D(d, d′)) + λ_L1 · mean|d′ − d|`.

use serde::{Deserialize, Serialize};

use qst_core::rng_from_seed;
use qst_nn::losses::l1;
use qst_nn::penalty::{gradient_penalty, mean_sigmoid};
use qst_nn::quantum::tensor_to_density;
use qst_nn::{Adam, AdamConfig, LayerSpec, Mode, Network, Padding, Tensor};
use rand::Rng;

use crate::monitor::ConvergenceMonitor;
use crate::problem::ReconstructionProblem;
use crate::report::{FitReport, Progress};
use crate::{ReconstructError, Result};

/// Scores are clamped to `[SCORE_CLAMP, 1 − SCORE_CLAMP]` inside logarithms.
pub const SCORE_CLAMP: f64 = 1e-12;
/// Fake-pair scores below this are reported as discriminator saturation.
pub const SATURATION: f64 = 1e-6;
pub const LEAKY_SLOPE: f64 = 0.3;

/// Where the gradient penalty is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyPoint {
    /// At the generated pair `(d, d′)`.
    Fake,
    /// At `(d, εd + (1 − ε)d′)` with `ε ~ U[0, 1]`.
    Interpolated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CganConfig {
    pub lambda_l1: f64,
    pub lambda_gp: f64,
    pub adam_g: AdamConfig,
    pub adam_d: AdamConfig,
    pub penalty_point: PenaltyPoint,
    pub max_iters: usize,
    pub monitor: Option<ConvergenceMonitor>,
    pub seed: u64,
}

impl Default for CganConfig {
    fn default() -> Self {
        Self {
            lambda_l1: 1.0,
            lambda_gp: 10.0,
            adam_g: AdamConfig::default(),
            adam_d: AdamConfig::default(),
            penalty_point: PenaltyPoint::Fake,
            max_iters: 2000,
            monitor: Some(ConvergenceMonitor::default()),
            seed: 0,
        }
    }
}

impl CganConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_l1 >= 0.0 && self.lambda_l1.is_finite()) || !(self.lambda_gp >= 0.0 && self.lambda_gp.is_finite())
        {
            return Err(ReconstructError::Config(format!(
                "loss weights must be non-negative (lambda_l1 {}, lambda_gp {})",
                self.lambda_l1, self.lambda_gp
            )));
        }
        if self.max_iters == 0 {
            return Err(ReconstructError::Config("max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// Generator layers up to the raw `[2, N, N]` tensor, followed by `tail`.
/// The input is the data vector; the single stride-2 upsampling needs an
/// even cutoff.
pub fn generator_specs(cutoff: usize, tail: Vec<LayerSpec>) -> Result<Vec<LayerSpec>> {
    if cutoff < 2 || !cutoff.is_multiple_of(2) {
        return Err(ReconstructError::Config(format!(
            "generator cutoff {cutoff} must be even and at least 2 (one stride-2 upsampling from cutoff/2)"
        )));
    }
    let h = cutoff / 2;
    let lrelu = LayerSpec::LeakyRelu { slope: LEAKY_SLOPE };
    let convt = |filters, stride| LayerSpec::Conv2dTranspose { filters, kernel: 4, stride, padding: Padding::Same, bias: false };
    let mut specs = vec![
        LayerSpec::Dense { units: h * h * 2, bias: false },
        lrelu.clone(),
        LayerSpec::Reshape { shape: vec![2, h, h] },
        convt(64, 2),
        LayerSpec::InstanceNorm,
        lrelu.clone(),
        convt(64, 1),
        LayerSpec::InstanceNorm,
        lrelu.clone(),
        convt(32, 1),
        lrelu,
        convt(2, 1),
    ];
    specs.extend(tail);
    Ok(specs)
}

/// Generator for `problem`, including its known-noise layers.
pub fn build_generator(problem: &ReconstructionProblem, seed: u64) -> Result<Network> {
    let specs = generator_specs(problem.cutoff(), problem.forward_model(true))?;
    Ok(Network::new(&[vec![problem.n_ops()]], specs, seed)?)
}

pub fn discriminator_specs() -> Vec<LayerSpec> {
    let lrelu = LayerSpec::LeakyRelu { slope: LEAKY_SLOPE };
    vec![
        LayerSpec::Concat { parts: 2 },
        LayerSpec::Dense { units: 128, bias: true },
        lrelu.clone(),
        LayerSpec::Dense { units: 128, bias: true },
        lrelu.clone(),
        LayerSpec::Dense { units: 64, bias: true },
        lrelu,
        LayerSpec::Dense { units: 64, bias: true },
    ]
}

/// Discriminator over `(d, x)` pairs of length `n_ops` each; its raw
/// output is 64 logits.
pub fn build_discriminator(n_ops: usize, seed: u64) -> Result<Network> {
    Ok(Network::new(&[vec![n_ops], vec![n_ops]], discriminator_specs(), seed)?)
}

fn clamp(d: f64) -> f64 {
    d.clamp(SCORE_CLAMP, 1.0 - SCORE_CLAMP)
}

pub fn qst_cgan_fit(problem: &ReconstructionProblem, cfg: &CganConfig) -> Result<FitReport> {
    cfg.validate()?;
    let n_ops = problem.n_ops();
    let mut report = FitReport::start("cgan", problem.cutoff())?;
    let mut gen = build_generator(problem, cfg.seed)?;
    let mut disc = build_discriminator(n_ops, cfg.seed.wrapping_add(1))?;
    let tap = gen
        .specs()
        .iter()
        .position(|s| matches!(s, LayerSpec::DensityMatrix))
        .expect("generator has a density-matrix layer");
    let mut adam_g = Adam::new(cfg.adam_g);
    let mut adam_d = Adam::new(cfg.adam_d);
    let mut rng = rng_from_seed(cfg.seed ^ 0x6A09_E667_F3BC_C908);
    let d = Tensor::vector(problem.data().to_vec());
    let mut progress = Progress::new(problem, cfg.monitor);

    for it in 0..cfg.max_iters {
        let numerical = |e: qst_nn::NnError| ReconstructError::Numerical { iteration: it, msg: e.to_string() };
        let (fake, rho) = gen.forward_tap(&[&d], Mode::Train, tap).map_err(numerical)?;

        // discriminator step
        disc.zero_grad();
        let z = disc.forward(&[&d, &d], Mode::Train).map_err(numerical)?;
        let (d_real, dz) = mean_sigmoid(z.data());
        let c = clamp(d_real);
        let s = if c == d_real { -1.0 / c } else { 0.0 };
        disc.backward(&Tensor::vector(dz.iter().map(|v| s * v).collect())).map_err(numerical)?;
        let z = disc.forward(&[&d, &fake], Mode::Train).map_err(numerical)?;
        let (d_fake, dz) = mean_sigmoid(z.data());
        let c_fake = clamp(d_fake);
        let s = if c_fake == d_fake { 1.0 / (1.0 - c_fake) } else { 0.0 };
        disc.backward(&Tensor::vector(dz.iter().map(|v| s * v).collect())).map_err(numerical)?;
        let point = match cfg.penalty_point {
            PenaltyPoint::Fake => fake.clone(),
            PenaltyPoint::Interpolated => {
                let eps: f64 = rng.random();
                Tensor::vector(d.data().iter().zip(fake.data()).map(|(a, b)| eps * a + (1.0 - eps) * b).collect())
            }
        };
        let penalty = gradient_penalty(&mut disc, &[&d, &point], cfg.lambda_gp).map_err(numerical)?;
        adam_d.step(&mut disc).map_err(numerical)?;
        let loss_d = -c.ln() - (1.0 - c_fake).ln() + cfg.lambda_gp * penalty.value;
        if d_fake < SATURATION {
            report.flag("discriminator saturated (fake score below 1e-6)");
        }

        // generator step against the updated discriminator
        let z = disc.forward(&[&d, &fake], Mode::Train).map_err(numerical)?;
        let (d_gen, dz) = mean_sigmoid(z.data());
        let c_gen = clamp(d_gen);
        let s = if c_gen == d_gen { -1.0 / (1.0 - c_gen) } else { 0.0 };
        let grads = disc.backward(&Tensor::vector(dz.iter().map(|v| s * v).collect())).map_err(numerical)?;
        disc.zero_grad();
        let (l1_loss, l1_grad) = l1(fake.data(), d.data());
        let g: Vec<f64> =
            grads[1].data().iter().zip(&l1_grad).map(|(a, b)| a + cfg.lambda_l1 * b).collect();
        gen.zero_grad();
        gen.backward(&Tensor::vector(g)).map_err(numerical)?;
        adam_g.step(&mut gen).map_err(numerical)?;
        let loss_g = (1.0 - c_gen).ln() + cfg.lambda_l1 * l1_loss;

        report.push_loss("generator", loss_g);
        report.push_loss("discriminator", loss_d);
        report.push_loss("l1", l1_loss);
        report.push_loss("penalty", penalty.value);
        report.push_loss("score_real", d_real);
        report.push_loss("score_fake", d_fake);
        let state = tensor_to_density(&rho).map_err(numerical)?;
        if progress.record(&mut report, state)? {
            break;
        }
    }
    Ok(report)
}
