//! Scalar losses returning `(value, ∂value/∂prediction)`.

use crate::layers::softmax;

/// Probability floor inside logarithms.
pub const LOG_FLOOR: f64 = 1e-12;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Cross-entropy of softmax(logits) against a class index.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let p = softmax(logits);
    let loss = -p[label].max(f64::MIN_POSITIVE).ln();
    let mut g = p;
    g[label] -= 1.0;
    (loss, g)
}

/// Mean absolute error; the subgradient at zero is zero.
pub fn l1(pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let n = pred.len() as f64;
    let loss = pred.iter().zip(target).map(|(p, t)| (p - t).abs()).sum::<f64>() / n;
    let g = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d = p - t;
            if d > 0.0 {
                1.0 / n
            } else if d < 0.0 {
                -1.0 / n
            } else {
                0.0
            }
        })
        .collect();
    (loss, g)
}

/// Mean squared error.
pub fn l2(pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let n = pred.len() as f64;
    let loss = pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n;
    let g = pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect();
    (loss, g)
}

fn normalized(v: &[f64]) -> (Vec<f64>, f64) {
    let s: f64 = v.iter().sum();
    (v.iter().map(|x| x / s).collect(), s)
}

/// `−Σ p log q̂` between sum-normalized target `p` and prediction `q̂`.
/// Entries with `q̂ < 1e-12` are floored and pass no gradient.
pub fn cross_entropy(pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let (p, _) = normalized(target);
    let (q, s) = normalized(pred);
    let mut loss = 0.0;
    let mut g = vec![1.0 / s; pred.len()];
    for ((pi, qi), gi) in p.iter().zip(&q).zip(&mut g) {
        if *qi < LOG_FLOOR {
            loss -= pi * LOG_FLOOR.ln();
        } else {
            loss -= pi * qi.ln();
            *gi -= pi / (qi * s);
        }
    }
    (loss, g)
}

/// `KL(p ‖ q̂) = Σ p log(p/q̂)`; equals [`cross_entropy`] minus the entropy
/// of `p`, so the gradients coincide.
pub fn kl_divergence(pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let (p, _) = normalized(target);
    let entropy: f64 = -p.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum::<f64>();
    let (ce, g) = cross_entropy(pred, target);
    (ce - entropy, g)
}
