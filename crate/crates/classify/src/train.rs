//! Mini-batch training with on-the-fly augmentation.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use qst_core::noise::{additive_gaussian, affine_augment, AffineRanges};
use qst_core::measure::DataVector;
use qst_core::{rng_from_seed, Rng};
use qst_nn::losses::softmax_cross_entropy;
use qst_nn::{Adam, AdamConfig, LrSchedule, Mode, Network, Tensor};

use crate::dataset::Dataset;
use crate::model::argmax;
use crate::{ClassifyError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Random affine distortion of every training image.
    pub affine: Option<AffineRanges>,
    /// Additive Gaussian noise with σ ~ U[0, noise_max] per image.
    pub noise_max: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 32,
            adam: AdamConfig { schedule: LrSchedule::constant(2e-4), ..AdamConfig::default() },
            affine: Some(AffineRanges::default()),
            noise_max: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean cross-entropy over the epoch's (augmented) training samples.
    pub loss: f64,
    pub accuracy: f64,
}

fn augment(image: &[f64], width: usize, height: usize, cfg: &TrainConfig, rng: &mut Rng) -> Result<Vec<f64>> {
    let mut out = match &cfg.affine {
        Some(ranges) => affine_augment(image, width, height, &ranges.sample(rng))?,
        None => image.to_vec(),
    };
    if cfg.noise_max > 0.0 {
        let sigma = rng.random_range(0.0..=cfg.noise_max);
        out = additive_gaussian(&DataVector::raw(out), sigma, rng.random())?.values;
    }
    Ok(out)
}

/// Trains `net` in place. `on_epoch` sees each epoch's statistics as they
/// are produced.
pub fn train_classifier(
    net: &mut Network,
    data: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<Vec<EpochStats>> {
    if data.samples.is_empty() {
        return Err(ClassifyError::EmptyDataset);
    }
    if cfg.batch_size == 0 {
        return Err(ClassifyError::Config("batch_size must be positive".into()));
    }
    let shape = vec![1, data.height, data.width];
    if net.input_shapes() != [shape.clone()] || net.output_shape() != [data.n_classes()] {
        return Err(ClassifyError::Config(format!(
            "network {:?} → {:?} does not fit {}x{} images with {} classes",
            net.input_shapes(),
            net.output_shape(),
            data.height,
            data.width,
            data.n_classes()
        )));
    }
    let mut rng = rng_from_seed(cfg.seed);
    net.reseed_runtime(rng.random());
    let mut adam = Adam::new(cfg.adam);
    let mut order: Vec<usize> = (0..data.samples.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            net.zero_grad();
            for &i in batch {
                let sample = &data.samples[i];
                let image = augment(&sample.image, data.width, data.height, cfg, &mut rng)?;
                let x = Tensor::new(shape.clone(), image)?;
                let logits = net.forward(&[&x], Mode::Train)?;
                let (loss, grad) = softmax_cross_entropy(logits.data(), sample.label);
                if !loss.is_finite() {
                    return Err(ClassifyError::Diverged { epoch, msg: format!("loss {loss} on sample {i}") });
                }
                loss_sum += loss;
                correct += usize::from(argmax(logits.data()) == sample.label);
                net.backward(&Tensor::vector(grad))?;
            }
            net.scale_grads(1.0 / batch.len() as f64);
            adam.step(net).map_err(|e| ClassifyError::Diverged { epoch, msg: e.to_string() })?;
        }
        let n = data.samples.len() as f64;
        let stats = EpochStats { epoch, loss: loss_sum / n, accuracy: correct as f64 / n };
        log::info!("epoch {epoch}: loss {:.4}, accuracy {:.3}", stats.loss, stats.accuracy);
        on_epoch(&stats);
        history.push(stats);
    }
    Ok(history)
}
