//! Mean-sigmoid similarity score and the input-gradient penalty of a
//! dense discriminator.
//!
//! The penalty `(‖∇ₓD‖ − 1)²` needs second derivatives. For a stack of
//! dense and leaky-ReLU layers the input gradient is
//! `g₀ = W₁ᵀ(s₁ ⊙ W₂ᵀ(… s_{L−1} ⊙ W_Lᵀ δ_L))` with `δ_L = σ'(z_L)/m` and
//! piecewise-constant slopes `s_k`, so its parameter gradient follows from
//! one adjoint sweep through that chain plus an ordinary backward pass
//! seeded with `δ̄_L ⊙ σ''(z_L)/m`.

use crate::losses::sigmoid;
use crate::network::{Mode, Network};
use crate::tensor::Tensor;
use crate::{NnError, Result};

/// `D = mean σ(z)` and `∂D/∂z`.
pub fn mean_sigmoid(z: &[f64]) -> (f64, Vec<f64>) {
    let m = z.len() as f64;
    let s: Vec<f64> = z.iter().map(|v| sigmoid(*v)).collect();
    let d = s.iter().sum::<f64>() / m;
    (d, s.iter().map(|v| v * (1.0 - v) / m).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalty {
    /// `(‖∇ₓD‖ − 1)²`.
    pub value: f64,
    pub grad_norm: f64,
    /// `D` at the evaluation point.
    pub score: f64,
}

enum Stage {
    Dense(usize),
    Slope(usize, f64),
}

/// Evaluates the penalty at `inputs` and accumulates `weight · ∂P/∂θ` into
/// the network's gradients. Only reshape/concat, dense and leaky-ReLU
/// layers are supported, and the last layer must be dense.
pub fn gradient_penalty(net: &mut Network, inputs: &[&Tensor], weight: f64) -> Result<Penalty> {
    let mut stages = Vec::new();
    for (i, op) in net.ops_mut().iter_mut().enumerate() {
        if let Some(slope) = op.leaky_slope() {
            stages.push(Stage::Slope(i, slope));
        } else if op.as_dense_mut().is_some() {
            stages.push(Stage::Dense(i));
        } else if !op.is_reshape() {
            return Err(NnError::Unsupported(format!("gradient penalty through layer {i}")));
        }
    }
    if !matches!(stages.last(), Some(Stage::Dense(i)) if *i + 1 == net.ops().len()) {
        return Err(NnError::Unsupported("gradient penalty needs a final dense layer".into()));
    }

    let z = net.forward(inputs, Mode::Train)?;
    let m = z.len() as f64;
    let sig: Vec<f64> = z.data().iter().map(|v| sigmoid(*v)).collect();
    let score = sig.iter().sum::<f64>() / m;

    // input gradient, keeping the δ seen by each dense layer
    let slopes_of = |net: &Network, i: usize, slope: f64| -> Vec<f64> {
        net.ops()[i].cached_input().iter().map(|&v| if v > 0.0 { 1.0 } else { slope }).collect()
    };
    let mut deltas: Vec<Vec<f64>> = vec![Vec::new(); stages.len()];
    let mut g: Vec<f64> = sig.iter().map(|s| s * (1.0 - s) / m).collect();
    for (k, stage) in stages.iter().enumerate().rev() {
        match *stage {
            Stage::Dense(i) => {
                let dense = net.ops_mut()[i].as_dense_mut().expect("dense stage");
                let (n_in, n_out) = (dense.n_in, dense.n_out);
                let w = dense.weights();
                let mut next = vec![0.0; n_in];
                for (r, row) in w.chunks_exact(n_in).enumerate().take(n_out) {
                    let d = g[r];
                    for (acc, wv) in next.iter_mut().zip(row) {
                        *acc += wv * d;
                    }
                }
                deltas[k] = std::mem::replace(&mut g, next);
            }
            Stage::Slope(i, slope) => {
                for (gv, s) in g.iter_mut().zip(slopes_of(net, i, slope)) {
                    *gv *= s;
                }
            }
        }
    }
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let value = (norm - 1.0).powi(2);
    if norm == 0.0 {
        return Ok(Penalty { value, grad_norm: 0.0, score });
    }

    // adjoint sweep in forward order
    let mut adj: Vec<f64> = g.iter().map(|v| weight * 2.0 * (norm - 1.0) * v / norm).collect();
    for (k, stage) in stages.iter().enumerate() {
        match *stage {
            Stage::Dense(i) => {
                let dense = net.ops_mut()[i].as_dense_mut().expect("dense stage");
                let (n_in, n_out) = (dense.n_in, dense.n_out);
                let mut next = vec![0.0; n_out];
                for (r, row) in dense.weights().chunks_exact(n_in).enumerate() {
                    next[r] = row.iter().zip(&adj).map(|(a, b)| a * b).sum();
                }
                let delta = &deltas[k];
                for (r, row) in dense.weight_grads_mut().chunks_exact_mut(n_in).enumerate() {
                    let d = delta[r];
                    for (acc, a) in row.iter_mut().zip(&adj) {
                        *acc += d * a;
                    }
                }
                adj = next;
            }
            Stage::Slope(i, slope) => {
                for (a, s) in adj.iter_mut().zip(slopes_of(net, i, slope)) {
                    *a *= s;
                }
            }
        }
    }
    let seed: Vec<f64> = adj.iter().zip(&sig).map(|(a, s)| a * s * (1.0 - s) * (1.0 - 2.0 * s) / m).collect();
    net.backward(&Tensor::vector(seed))?;
    Ok(Penalty { value, grad_norm: norm, score })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_of_zero_logits_is_half() {
        let (d, g) = mean_sigmoid(&[0.0; 4]);
        assert_eq!(d, 0.5);
        assert!(g.iter().all(|v| (*v - 0.0625).abs() < 1e-15));
    }
}
