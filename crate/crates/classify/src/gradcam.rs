//! Grad-CAM attribution maps.

use serde::{Deserialize, Serialize};

use qst_nn::{LayerSpec, Mode, Network, Tensor};

use crate::{ClassifyError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCam {
    pub width: usize,
    pub height: usize,
    /// Row-major heatmap in `[0, 1]` at input resolution.
    pub values: Vec<f64>,
    /// Set when the rectified map vanished everywhere.
    pub degenerate: bool,
}

/// Index of the layer whose output is the last convolutional feature map
/// (after its activation, when one follows).
fn feature_layer(net: &Network) -> Result<usize> {
    let specs = net.specs();
    let conv = specs
        .iter()
        .rposition(|s| matches!(s, LayerSpec::Conv2d { .. }))
        .ok_or_else(|| ClassifyError::Config("network has no convolution layer".into()))?;
    Ok(match specs.get(conv + 1) {
        Some(LayerSpec::LeakyRelu { .. }) => conv + 1,
        _ => conv,
    })
}

/// Bilinear resampling with pixel-centre alignment, clamped at the edges.
fn upsample(src: &[f64], h: usize, w: usize, out_h: usize, out_w: usize) -> Vec<f64> {
    let coord = |i: usize, n_out: usize, n_in: usize| -> (usize, usize, f64) {
        let y = ((i as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5).clamp(0.0, (n_in - 1) as f64);
        let y0 = y.floor() as usize;
        let y1 = (y0 + 1).min(n_in - 1);
        (y0, y1, y - y0 as f64)
    };
    let mut out = Vec::with_capacity(out_h * out_w);
    for i in 0..out_h {
        let (y0, y1, fy) = coord(i, out_h, h);
        for j in 0..out_w {
            let (x0, x1, fx) = coord(j, out_w, w);
            let top = (1.0 - fx) * src[y0 * w + x0] + fx * src[y0 * w + x1];
            let bottom = (1.0 - fx) * src[y1 * w + x0] + fx * src[y1 * w + x1];
            out.push((1.0 - fy) * top + fy * bottom);
        }
    }
    out
}

/// Heatmap of the evidence for `target` (a logit index): channel weights
/// are spatially averaged gradients of the logit with respect to the last
/// conv feature map; the rectified weighted sum is upsampled and min-max
/// normalized. A spatially constant positive map normalizes to all ones.
pub fn grad_cam(net: &mut Network, image: &[f64], target: usize) -> Result<GradCam> {
    let shape = net.input_shapes()[0].clone();
    let (height, width) = match shape.as_slice() {
        [1, h, w] => (*h, *w),
        s => return Err(ClassifyError::Config(format!("expects a [1,H,W] input, got {s:?}"))),
    };
    let n_classes = net.output_shape()[0];
    if target >= n_classes {
        return Err(ClassifyError::Config(format!("class {target} out of range for {n_classes} classes")));
    }
    let layer = feature_layer(net)?;
    let x = Tensor::new(shape, image.to_vec())?;
    let outs = net.forward_all(&[&x], Mode::Eval)?;
    let mut seed = vec![0.0; n_classes];
    seed[target] = 1.0;
    net.zero_grad();
    let grad = net.backward_to(&Tensor::vector(seed), layer)?;
    net.zero_grad();

    let features = &outs[layer];
    let (k, h, w) = match features.shape() {
        [k, h, w] => (*k, *h, *w),
        s => return Err(ClassifyError::Config(format!("feature map shape {s:?}"))),
    };
    let plane = h * w;
    let mut cam = vec![0.0; plane];
    for c in 0..k {
        let g = &grad.data()[c * plane..(c + 1) * plane];
        let alpha = g.iter().sum::<f64>() / plane as f64;
        for (m, a) in cam.iter_mut().zip(&features.data()[c * plane..(c + 1) * plane]) {
            *m += alpha * a;
        }
    }
    cam.iter_mut().for_each(|v| *v = v.max(0.0));
    let mut values = upsample(&cam, h, w, height, width);
    let max = values.iter().copied().fold(0.0, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if max <= 0.0 {
        return Ok(GradCam { width, height, values: vec![0.0; height * width], degenerate: true });
    }
    if max - min <= 1e-12 * max {
        values.iter_mut().for_each(|v| *v = 1.0);
    } else {
        values.iter_mut().for_each(|v| *v = (*v - min) / (max - min));
    }
    Ok(GradCam { width, height, values, degenerate: false })
}

/// Keeps `image` where the heatmap exceeds `threshold`, zero elsewhere.
pub fn mask_image(image: &[f64], cam: &GradCam, threshold: f64) -> Vec<f64> {
    image.iter().zip(&cam.values).map(|(v, h)| if *h > threshold { *v } else { 0.0 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upsample_preserves_constants_and_corners() {
        let src = [1.0, 2.0, 3.0, 4.0];
        let up = upsample(&src, 2, 2, 8, 8);
        assert_eq!(up[0], 1.0);
        assert_eq!(up[63], 4.0);
        assert!(upsample(&[0.7; 9], 3, 3, 10, 10).iter().all(|v| (*v - 0.7).abs() < 1e-15));
    }
}
