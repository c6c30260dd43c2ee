//! Layers with a physical meaning: density-matrix parametrization,
//! measurement expectations and unit-max normalization.

use std::sync::Arc;

use qst_core::{CMatrix, DensityMatrix, C64};

use crate::gemm::gemm;
use crate::layers::{Ctx, Op};
use crate::tensor::Tensor;
use crate::{NnError, Result};

/// Diagonal regularizer added to `T†T` before normalizing.
pub const DENSITY_EPS: f64 = 1e-12;

/// Maps a raw `[2, N, N]` tensor to a density matrix. The real channel's
/// lower triangle (with diagonal) and the imaginary channel's strict lower
/// triangle form `T`; the result is `(T†T + εI) / tr(T†T + εI)`.
pub(crate) struct DensityMatrixOp {
    n: usize,
    t: Vec<C64>,
    m: Vec<C64>,
    trace: f64,
}

impl DensityMatrixOp {
    pub fn new(n: usize) -> Self {
        Self { n, t: vec![], m: vec![], trace: 0.0 }
    }
}

/// Lower-triangular factor read from a raw `[2, N, N]` buffer.
fn lower_factor(x: &[f64], n: usize) -> Vec<C64> {
    let mut t = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..=i {
            let im = if i > j { x[n * n + i * n + j] } else { 0.0 };
            t[i * n + j] = C64::new(x[i * n + j], im);
        }
    }
    t
}

/// `T†T` for a row-major lower-triangular `T`.
fn gram(t: &[C64], n: usize) -> Vec<C64> {
    let mut m = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for k in i.max(j)..n {
                acc += t[k * n + i].conj() * t[k * n + j];
            }
            m[i * n + j] = acc;
        }
    }
    m
}

impl Op for DensityMatrixOp {
    fn out_shape(&self) -> Vec<usize> {
        vec![2, self.n, self.n]
    }

    fn forward(&mut self, x: &Tensor, _: &mut Ctx) -> Result<Tensor> {
        let n = self.n;
        self.t = lower_factor(x.data(), n);
        self.m = gram(&self.t, n);
        for i in 0..n {
            self.m[i * n + i] += DENSITY_EPS;
        }
        self.trace = (0..n).map(|i| self.m[i * n + i].re).sum();
        if !(self.trace.is_finite() && self.trace > 0.0) {
            return Err(NnError::NonFinite(format!("density matrix trace {}", self.trace)));
        }
        let mut out = vec![0.0; 2 * n * n];
        for (k, v) in self.m.iter().enumerate() {
            out[k] = v.re / self.trace;
            out[n * n + k] = v.im / self.trace;
        }
        Tensor::new(self.out_shape(), out)
    }

    fn backward(&mut self, g: &Tensor) -> Result<Tensor> {
        let n = self.n;
        let g = g.data();
        let t = self.trace;
        let coupling: f64 =
            (0..n * n).map(|k| g[k] * self.m[k].re + g[n * n + k] * self.m[k].im).sum::<f64>() / (t * t);
        // symmetrized adjoint S = M̄ + M̄†
        let mut s = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let a = C64::new(g[i * n + j], g[n * n + i * n + j]) / t;
                let b = C64::new(g[j * n + i], g[n * n + j * n + i]).conj() / t;
                s[i * n + j] = a + b;
            }
            s[i * n + i] -= 2.0 * coupling;
        }
        let mut dx = vec![0.0; 2 * n * n];
        for i in 0..n {
            for j in 0..=i {
                // (T S)_ij with T lower triangular
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..=i {
                    acc += self.t[i * n + k] * s[k * n + j];
                }
                dx[i * n + j] = acc.re;
                if i > j {
                    dx[n * n + i * n + j] = acc.im;
                }
            }
        }
        Tensor::new(vec![2, n, n], dx)
    }
}

/// Re/Im planes of a `[2, N, N]` tensor as a density matrix.
pub fn tensor_to_density(x: &Tensor) -> Result<DensityMatrix> {
    let n = match x.shape() {
        [2, a, b] if a == b => *a,
        s => {
            return Err(NnError::Shape { layer: 0, kind: "density_matrix", msg: format!("expects [2,N,N], got {s:?}") })
        }
    };
    let d = x.data();
    let m = CMatrix::from_fn(n, |i, j| C64::new(d[i * n + j], d[n * n + i * n + j]))?;
    Ok(DensityMatrix::new(m.into_inner())?)
}

/// Linear map `x ↦ A x` onto `Re tr(O_i ρ)` for each measurement operator.
pub(crate) struct ExpectationOp {
    n_ops: usize,
    numel: usize,
    rows: Arc<Vec<f64>>,
}

impl ExpectationOp {
    pub fn new(n_ops: usize, numel: usize, rows: Arc<Vec<f64>>) -> Self {
        Self { n_ops, numel, rows }
    }
}

impl Op for ExpectationOp {
    fn out_shape(&self) -> Vec<usize> {
        vec![self.n_ops]
    }

    fn forward(&mut self, x: &Tensor, _: &mut Ctx) -> Result<Tensor> {
        let mut y = vec![0.0; self.n_ops];
        gemm(self.n_ops, self.numel, 1, 1.0, &self.rows, false, x.data(), false, 0.0, &mut y);
        Ok(Tensor::vector(y))
    }

    fn backward(&mut self, g: &Tensor) -> Result<Tensor> {
        let mut dx = vec![0.0; self.numel];
        gemm(self.numel, self.n_ops, 1, 1.0, &self.rows, true, g.data(), false, 0.0, &mut dx);
        let n = ((self.numel / 2) as f64).sqrt().round() as usize;
        Tensor::new(vec![2, n, n], dx)
    }
}

/// `y = x / max(x)`; the maximum must be positive.
pub(crate) struct UnitMaxOp {
    shape: Vec<usize>,
    x: Vec<f64>,
    argmax: usize,
    max: f64,
}

impl UnitMaxOp {
    pub fn new(shape: &[usize]) -> Self {
        Self { shape: shape.to_vec(), x: vec![], argmax: 0, max: 1.0 }
    }
}

impl Op for UnitMaxOp {
    fn out_shape(&self) -> Vec<usize> {
        self.shape.clone()
    }

    fn forward(&mut self, x: &Tensor, _: &mut Ctx) -> Result<Tensor> {
        let (argmax, max) = x
            .data()
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
        if !(max > 0.0 && max.is_finite()) {
            return Err(NnError::NonFinite(format!("unit-max normalization by {max}")));
        }
        self.x = x.data().to_vec();
        self.argmax = argmax;
        self.max = max;
        Tensor::new(self.shape.clone(), x.data().iter().map(|v| v / max).collect())
    }

    fn backward(&mut self, g: &Tensor) -> Result<Tensor> {
        let m = self.max;
        let dot: f64 = g.data().iter().zip(&self.x).map(|(a, b)| a * b).sum();
        let mut dx: Vec<f64> = g.data().iter().map(|v| v / m).collect();
        dx[self.argmax] -= dot / (m * m);
        Tensor::new(self.shape.clone(), dx)
    }
}

/// `y = total · x / Σx`; the sum must be positive.
pub(crate) struct SumScaleOp {
    shape: Vec<usize>,
    total: f64,
    y: Vec<f64>,
    sum: f64,
}

impl SumScaleOp {
    pub fn new(shape: &[usize], total: f64) -> Self {
        Self { shape: shape.to_vec(), total, y: vec![], sum: 1.0 }
    }
}

impl Op for SumScaleOp {
    fn out_shape(&self) -> Vec<usize> {
        self.shape.clone()
    }

    fn forward(&mut self, x: &Tensor, _: &mut Ctx) -> Result<Tensor> {
        let sum: f64 = x.data().iter().sum();
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(NnError::NonFinite(format!("sum scaling by {sum}")));
        }
        self.sum = sum;
        self.y = x.data().iter().map(|v| self.total * v / sum).collect();
        Tensor::new(self.shape.clone(), self.y.clone())
    }

    fn backward(&mut self, g: &Tensor) -> Result<Tensor> {
        let dot: f64 = g.data().iter().zip(&self.y).map(|(a, b)| a * b).sum::<f64>() / self.total;
        let s = self.total / self.sum;
        Tensor::new(self.shape.clone(), g.data().iter().map(|v| s * (v - dot)).collect())
    }
}
