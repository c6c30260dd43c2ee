//! Sequential networks built from [`LayerSpec`]s.

use qst_core::{rng_from_seed, Rng};

use crate::layers::{Ctx, LayerSpec, Op};
use crate::tensor::Tensor;
use crate::{NnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// An ordered layer stack. Parameters are initialized from `seed`; dropout
/// and noise layers draw from a separate stream derived from the same seed.
pub struct Network {
    specs: Vec<LayerSpec>,
    input_shapes: Vec<Vec<usize>>,
    ops: Vec<Box<dyn Op>>,
    shapes: Vec<Vec<usize>>,
    rng: Rng,
}

impl std::fmt::Debug for Network {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Network")
            .field("input_shapes", &self.input_shapes)
            .field("specs", &self.specs)
            .field("params", &self.param_count())
            .finish()
    }
}

impl Network {
    /// Builds a network for the given input shapes. Several inputs are only
    /// allowed when the first layer is a `Concat` with matching `parts`.
    pub fn new(input_shapes: &[Vec<usize>], specs: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        if specs.is_empty() || input_shapes.is_empty() {
            return Err(NnError::Unsupported("network needs at least one layer and one input".into()));
        }
        for (i, spec) in specs.iter().enumerate() {
            if let LayerSpec::Concat { parts } = spec {
                if i != 0 || *parts != input_shapes.len() {
                    return Err(NnError::Shape {
                        layer: i,
                        kind: "concat",
                        msg: format!("concat of {parts} parts must be first and match {} inputs", input_shapes.len()),
                    });
                }
            }
        }
        let mut shape = if input_shapes.len() > 1 {
            if !matches!(specs[0], LayerSpec::Concat { .. }) {
                return Err(NnError::Shape {
                    layer: 0,
                    kind: specs[0].kind(),
                    msg: format!("{} inputs need a leading concat", input_shapes.len()),
                });
            }
            vec![input_shapes.iter().map(|s| s.iter().product::<usize>()).sum()]
        } else {
            input_shapes[0].clone()
        };
        let mut init = rng_from_seed(seed);
        let mut ops = Vec::with_capacity(specs.len());
        let mut shapes = vec![shape.clone()];
        for (i, spec) in specs.iter().enumerate() {
            let op = spec.build(i, &shape, &mut init)?;
            shape = op.out_shape();
            shapes.push(shape.clone());
            ops.push(op);
        }
        Ok(Self {
            specs,
            input_shapes: input_shapes.to_vec(),
            ops,
            shapes,
            rng: rng_from_seed(seed ^ 0x5DEE_CE66_D1CE_5EED),
        })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn input_shapes(&self) -> &[Vec<usize>] {
        &self.input_shapes
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().expect("at least one layer")
    }

    /// Shape after each layer, starting with the (concatenated) input.
    pub fn layer_shapes(&self) -> &[Vec<usize>] {
        &self.shapes
    }

    pub fn param_count(&self) -> usize {
        self.ops.iter().map(|op| op.params().len()).sum()
    }

    pub fn layer_param_counts(&self) -> Vec<usize> {
        self.ops.iter().map(|op| op.params().len()).collect()
    }

    pub fn reseed_runtime(&mut self, seed: u64) {
        self.rng = rng_from_seed(seed);
    }

    pub fn forward(&mut self, inputs: &[&Tensor], mode: Mode) -> Result<Tensor> {
        let mut x = self.join_inputs(inputs)?;
        let mut ctx = Ctx { train: mode == Mode::Train, rng: &mut self.rng };
        for (i, op) in self.ops.iter_mut().enumerate() {
            x = op.forward(&x, &mut ctx).map_err(|e| relabel(e, i, self.specs[i].kind()))?;
        }
        Ok(x)
    }

    fn join_inputs(&self, inputs: &[&Tensor]) -> Result<Tensor> {
        if inputs.len() != self.input_shapes.len() {
            return Err(NnError::Shape {
                layer: 0,
                kind: self.specs[0].kind(),
                msg: format!("expected {} inputs, got {}", self.input_shapes.len(), inputs.len()),
            });
        }
        for (x, shape) in inputs.iter().zip(&self.input_shapes) {
            if x.shape() != shape.as_slice() {
                return Err(NnError::Shape {
                    layer: 0,
                    kind: self.specs[0].kind(),
                    msg: format!("input shape {:?}, expected {shape:?}", x.shape()),
                });
            }
        }
        Ok(if inputs.len() > 1 {
            Tensor::vector(inputs.iter().flat_map(|t| t.data().iter().copied()).collect())
        } else {
            inputs[0].clone()
        })
    }

    /// Forward pass that also returns a copy of layer `tap`'s output.
    pub fn forward_tap(&mut self, inputs: &[&Tensor], mode: Mode, tap: usize) -> Result<(Tensor, Tensor)> {
        let mut x = self.join_inputs(inputs)?;
        let mut tapped = None;
        let mut ctx = Ctx { train: mode == Mode::Train, rng: &mut self.rng };
        for (i, op) in self.ops.iter_mut().enumerate() {
            x = op.forward(&x, &mut ctx).map_err(|e| relabel(e, i, self.specs[i].kind()))?;
            if i == tap {
                tapped = Some(x.clone());
            }
        }
        let tapped = tapped.ok_or_else(|| NnError::Unsupported(format!("no layer {tap} to tap")))?;
        Ok((x, tapped))
    }

    /// Forward pass that also returns the output of every layer.
    pub fn forward_all(&mut self, inputs: &[&Tensor], mode: Mode) -> Result<Vec<Tensor>> {
        let x = self.join_inputs(inputs)?;
        let mut outs = Vec::with_capacity(self.ops.len());
        let mut ctx = Ctx { train: mode == Mode::Train, rng: &mut self.rng };
        let mut cur = x;
        for (i, op) in self.ops.iter_mut().enumerate() {
            cur = op.forward(&cur, &mut ctx).map_err(|e| relabel(e, i, self.specs[i].kind()))?;
            outs.push(cur.clone());
        }
        Ok(outs)
    }

    /// Backpropagates `grad` from the output down to the output of layer
    /// `stop`, returning the gradient there. Parameter gradients of the
    /// layers passed through are accumulated.
    pub fn backward_to(&mut self, grad: &Tensor, stop: usize) -> Result<Tensor> {
        let mut g = grad.clone();
        for i in (stop + 1..self.ops.len()).rev() {
            g = self.ops[i].backward(&g).map_err(|e| relabel(e, i, self.specs[i].kind()))?;
        }
        Ok(g)
    }

    /// Backpropagates `grad` through the last forward pass, accumulating
    /// parameter gradients, and returns the gradient for each input.
    pub fn backward(&mut self, grad: &Tensor) -> Result<Vec<Tensor>> {
        if grad.shape() != self.output_shape() {
            return Err(NnError::Shape {
                layer: self.ops.len() - 1,
                kind: "output",
                msg: format!("gradient shape {:?}, expected {:?}", grad.shape(), self.output_shape()),
            });
        }
        let mut g = grad.clone();
        for (i, op) in self.ops.iter_mut().enumerate().rev() {
            g = op.backward(&g).map_err(|e| relabel(e, i, self.specs[i].kind()))?;
        }
        if self.input_shapes.len() == 1 {
            return Ok(vec![g.reshaped(&self.input_shapes[0])?]);
        }
        let mut out = Vec::with_capacity(self.input_shapes.len());
        let mut offset = 0;
        for shape in &self.input_shapes {
            let n: usize = shape.iter().product();
            out.push(Tensor::new(shape.clone(), g.data()[offset..offset + n].to_vec())?);
            offset += n;
        }
        Ok(out)
    }

    pub fn zero_grad(&mut self) {
        for op in &mut self.ops {
            op.params_and_grads().1.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn scale_grads(&mut self, s: f64) {
        for op in &mut self.ops {
            op.params_and_grads().1.iter_mut().for_each(|g| *g *= s);
        }
    }

    /// All parameters, layer by layer.
    pub fn params(&self) -> Vec<f64> {
        self.ops.iter().flat_map(|op| op.params().iter().copied()).collect()
    }

    /// All accumulated gradients, in the order of [`Self::params`].
    pub fn grads(&mut self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for op in &mut self.ops {
            out.extend_from_slice(op.params_and_grads().1);
        }
        out
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(NnError::Shape {
                layer: 0,
                kind: "params",
                msg: format!("expected {} parameters, got {}", self.param_count(), values.len()),
            });
        }
        let mut offset = 0;
        for op in &mut self.ops {
            let p = op.params_and_grads().0;
            p.copy_from_slice(&values[offset..offset + p.len()]);
            offset += p.len();
        }
        Ok(())
    }

    /// Adds `values` to the accumulated gradients.
    pub fn add_grads(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(NnError::Shape {
                layer: 0,
                kind: "grads",
                msg: format!("expected {} gradients, got {}", self.param_count(), values.len()),
            });
        }
        let mut offset = 0;
        for op in &mut self.ops {
            let g = op.params_and_grads().1;
            for (a, b) in g.iter_mut().zip(&values[offset..]) {
                *a += b;
            }
            offset += g.len();
        }
        Ok(())
    }

    pub(crate) fn ops_mut(&mut self) -> &mut [Box<dyn Op>] {
        &mut self.ops
    }

    pub(crate) fn ops(&self) -> &[Box<dyn Op>] {
        &self.ops
    }
}

fn relabel(e: NnError, layer: usize, kind: &'static str) -> NnError {
    match e {
        NnError::Shape { msg, .. } => NnError::Shape { layer, kind, msg },
        NnError::NonFinite(msg) => NnError::NonFinite(format!("layer {layer} ({kind}): {msg}")),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::Padding;

    #[test]
    fn shapes_propagate() {
        let specs = vec![
            LayerSpec::Conv2d { filters: 4, kernel: 3, stride: 1, padding: Padding::Valid, bias: false },
            LayerSpec::Conv2d { filters: 4, kernel: 5, stride: 2, padding: Padding::Same, bias: false },
            LayerSpec::Flatten,
            LayerSpec::Dense { units: 3, bias: true },
        ];
        let net = Network::new(&[vec![1, 16, 16]], specs, 0).unwrap();
        assert_eq!(net.layer_shapes()[1], vec![4, 14, 14]);
        assert_eq!(net.layer_shapes()[2], vec![4, 7, 7]);
        assert_eq!(net.output_shape(), &[3]);
        assert_eq!(net.param_count(), 36 + 400 + 196 * 3 + 3);
    }

    #[test]
    fn bad_input_is_reported() {
        let mut net = Network::new(&[vec![4]], vec![LayerSpec::Dense { units: 2, bias: true }], 0).unwrap();
        assert!(net.forward(&[&Tensor::vector(vec![0.0; 3])], Mode::Eval).is_err());
        assert!(Network::new(&[vec![4], vec![4]], vec![LayerSpec::Dense { units: 2, bias: true }], 0).is_err());
    }
}
