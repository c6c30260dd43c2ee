//! Classifier architecture and prediction.

use serde::{Deserialize, Serialize};

use qst_nn::layers::{conv_output_size, softmax};
use qst_nn::{LayerSpec, Mode, Network, Padding, Tensor};

use crate::{ClassifyError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    pub dropout: f64,
    /// σ of the additive noise layers inside the conv stack.
    pub internal_noise: f64,
    pub slope: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self { dropout: 0.4, internal_noise: 0.005, slope: 0.3 }
    }
}

/// (filters, kernel, stride) of the six conv layers; stride-1 layers use
/// valid padding, stride-2 layers same padding.
const CONV_STACK: [(usize, usize, usize); 6] = [(32, 3, 1), (32, 3, 1), (32, 5, 2), (64, 3, 1), (64, 3, 1), (64, 5, 2)];

/// Layer list for a `height × width` single-channel input. The network
/// outputs logits; apply [`softmax`] for probabilities.
pub fn classifier_specs(height: usize, width: usize, n_classes: usize, cfg: &ClassifierConfig) -> Result<Vec<LayerSpec>> {
    if n_classes < 2 {
        return Err(ClassifyError::Config(format!("need at least two classes, got {n_classes}")));
    }
    let (mut h, mut w) = (height, width);
    let lrelu = || LayerSpec::LeakyRelu { slope: cfg.slope };
    let mut specs = Vec::new();
    for (i, &(filters, kernel, stride)) in CONV_STACK.iter().enumerate() {
        let padding = if stride == 1 { Padding::Valid } else { Padding::Same };
        h = conv_output_size(h, kernel, stride, padding)
            .ok_or_else(|| ClassifyError::Config(format!("input {height}x{width} too small for the conv stack")))?;
        w = conv_output_size(w, kernel, stride, padding)
            .ok_or_else(|| ClassifyError::Config(format!("input {height}x{width} too small for the conv stack")))?;
        specs.push(LayerSpec::Conv2d { filters, kernel, stride, padding, bias: false });
        specs.push(lrelu());
        // regularization after conv layers 2, 4 and 6; noise after 2 and 4
        if i % 2 == 1 {
            specs.push(LayerSpec::Dropout { rate: cfg.dropout });
            if i < 5 {
                specs.push(LayerSpec::GaussianNoise { sigma: cfg.internal_noise });
            }
        }
    }
    specs.extend([
        LayerSpec::Flatten,
        LayerSpec::Dense { units: 512, bias: true },
        lrelu(),
        LayerSpec::Dropout { rate: cfg.dropout },
        LayerSpec::Dense { units: 256, bias: true },
        lrelu(),
        LayerSpec::Dense { units: n_classes, bias: true },
    ]);
    Ok(specs)
}

pub fn build_classifier(height: usize, width: usize, n_classes: usize, cfg: &ClassifierConfig, seed: u64) -> Result<Network> {
    let specs = classifier_specs(height, width, n_classes, cfg)?;
    Ok(Network::new(&[vec![1, height, width]], specs, seed)?)
}

/// Class probabilities for one row-major image.
pub fn predict(net: &mut Network, image: &[f64]) -> Result<Vec<f64>> {
    let shape = net.input_shapes()[0].clone();
    let x = Tensor::new(shape, image.to_vec())?;
    let logits = net.forward(&[&x], Mode::Eval)?;
    Ok(softmax(logits.data()))
}

/// Index of the largest entry.
pub fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().fold(0, |best, (i, x)| if *x > v[best] { i } else { best })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_output_sizes() {
        let net = build_classifier(32, 32, 7, &ClassifierConfig::default(), 0).unwrap();
        let last_conv = net.specs().iter().rposition(|s| matches!(s, LayerSpec::Conv2d { .. })).unwrap();
        assert_eq!(net.layer_shapes()[last_conv + 1], vec![64, 5, 5]);
        let net = build_classifier(16, 16, 3, &ClassifierConfig::default(), 0).unwrap();
        assert_eq!(net.layer_shapes()[last_conv + 1], vec![64, 1, 1]);
        assert!(build_classifier(12, 12, 3, &ClassifierConfig::default(), 0).is_err());
    }

    #[test]
    fn parameter_counts() {
        let net = build_classifier(32, 32, 7, &ClassifierConfig::default(), 0).unwrap();
        let counts: Vec<usize> = net.layer_param_counts().into_iter().filter(|c| *c > 0).collect();
        assert_eq!(counts[0], 288);
        // dense 256 after the 1600 → 512 layer
        assert_eq!(counts[7], 512 * 256 + 256);
        assert_eq!(counts[6], 1600 * 512 + 512);
    }
}
