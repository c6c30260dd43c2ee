//! Layer specifications and their forward/backward implementations.
//!
//! Image tensors are laid out channels-first, `[C, H, W]`.

use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use qst_core::noise::{convolve_separable, thermal_kernel_axis};
use qst_core::Rng;

use crate::gemm::gemm;
use crate::quantum::{DensityMatrixOp, ExpectationOp, SumScaleOp, UnitMaxOp};
use crate::tensor::Tensor;
use crate::{NnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    Valid,
    Same,
}

/// Serializable description of one layer. Shapes of trainable parameters
/// follow from these fields and the input shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense { units: usize, bias: bool },
    Conv2d { filters: usize, kernel: usize, stride: usize, padding: Padding, bias: bool },
    Conv2dTranspose { filters: usize, kernel: usize, stride: usize, padding: Padding, bias: bool },
    InstanceNorm,
    LeakyRelu { slope: f64 },
    Softmax,
    Dropout { rate: f64 },
    Reshape { shape: Vec<usize> },
    Flatten,
    /// Joins the network's inputs into one vector; only valid first.
    Concat { parts: usize },
    /// `[2, N, N]` raw tensor → `[2, N, N]` (Re ρ, Im ρ) of `T†T/tr`.
    DensityMatrix,
    /// `[2, N, N]` density matrix → `[n_ops]` values `Re tr(O_i ρ)`.
    Expectation {
        n_ops: usize,
        dim: usize,
        #[serde(skip)]
        rows: Option<Arc<Vec<f64>>>,
    },
    /// Divides by the maximum entry.
    UnitMax,
    /// Rescales to the given positive sum.
    SumScale { total: f64 },
    /// Additive `N(0, σ²)` noise in training mode, identity in evaluation.
    GaussianNoise { sigma: f64 },
    /// Fixed thermal-kernel convolution of a flattened `ny × nx` grid.
    GaussianConv { n_th: f64, nx: usize, ny: usize, spacing_x: f64, spacing_y: f64 },
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::Conv2dTranspose { .. } => "conv2d_transpose",
            LayerSpec::InstanceNorm => "instance_norm",
            LayerSpec::LeakyRelu { .. } => "leaky_relu",
            LayerSpec::Softmax => "softmax",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Reshape { .. } => "reshape",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Concat { .. } => "concat",
            LayerSpec::DensityMatrix => "density_matrix",
            LayerSpec::Expectation { .. } => "expectation",
            LayerSpec::UnitMax => "unit_max",
            LayerSpec::SumScale { .. } => "sum_scale",
            LayerSpec::GaussianNoise { .. } => "gaussian_noise",
            LayerSpec::GaussianConv { .. } => "gaussian_conv",
        }
    }

    /// Expectation layer over a real sensing matrix with rows
    /// `[Re O_i | Im O_i]`, each block row-major `dim × dim`.
    pub fn expectation(rows: Vec<f64>, dim: usize) -> Self {
        let n_ops = rows.len() / (2 * dim * dim);
        LayerSpec::Expectation { n_ops, dim, rows: Some(Arc::new(rows)) }
    }

    pub(crate) fn build(&self, index: usize, input: &[usize], rng: &mut Rng) -> Result<Box<dyn Op>> {
        let kind = self.kind();
        let err = |msg: String| NnError::Shape { layer: index, kind, msg };
        let numel: usize = input.iter().product();
        Ok(match self {
            LayerSpec::Dense { units, bias } => Box::new(Dense::new(numel, *units, *bias, rng)),
            LayerSpec::Conv2d { filters, kernel, stride, padding, bias } => {
                let [c, h, w] = image_shape(input).ok_or_else(|| err(format!("expects [C,H,W], got {input:?}")))?;
                let geo = ConvGeometry::forward(h, w, *kernel, *stride, *padding)
                    .ok_or_else(|| err(format!("kernel {kernel} stride {stride} does not fit {h}x{w}")))?;
                Box::new(Conv2d::new(c, *filters, geo, *bias, rng))
            }
            LayerSpec::Conv2dTranspose { filters, kernel, stride, padding, bias } => {
                let [c, h, w] = image_shape(input).ok_or_else(|| err(format!("expects [C,H,W], got {input:?}")))?;
                let geo = ConvGeometry::transpose(h, w, *kernel, *stride, *padding)
                    .ok_or_else(|| err(format!("kernel {kernel} stride {stride} does not fit {h}x{w}")))?;
                Box::new(Conv2dTranspose::new(c, *filters, geo, *bias, rng))
            }
            LayerSpec::InstanceNorm => {
                let [c, h, w] = image_shape(input).ok_or_else(|| err(format!("expects [C,H,W], got {input:?}")))?;
                if h * w < 2 {
                    return Err(err("needs at least two spatial positions".into()));
                }
                Box::new(InstanceNorm::new(c, h * w, input))
            }
            LayerSpec::LeakyRelu { slope } => Box::new(LeakyRelu { slope: *slope, shape: input.to_vec(), x: vec![] }),
            LayerSpec::Softmax => {
                if input.len() != 1 {
                    return Err(err(format!("expects a vector, got {input:?}")));
                }
                Box::new(Softmax { y: vec![] , n: numel })
            }
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(rate) {
                    return Err(err(format!("rate {rate} outside [0, 1)")));
                }
                Box::new(Dropout { rate: *rate, shape: input.to_vec(), mask: None })
            }
            LayerSpec::Reshape { shape } => {
                if shape.iter().product::<usize>() != numel {
                    return Err(err(format!("cannot reshape {input:?} to {shape:?}")));
                }
                Box::new(Reshape { input: input.to_vec(), output: shape.clone() })
            }
            LayerSpec::Flatten | LayerSpec::Concat { .. } => {
                Box::new(Reshape { input: input.to_vec(), output: vec![numel] })
            }
            LayerSpec::DensityMatrix => {
                let [two, n, m] = image_shape(input).ok_or_else(|| err(format!("expects [2,N,N], got {input:?}")))?;
                if two != 2 || n != m || n < 2 {
                    return Err(err(format!("expects [2,N,N], got {input:?}")));
                }
                Box::new(DensityMatrixOp::new(n))
            }
            LayerSpec::Expectation { n_ops, dim, rows } => {
                let rows = rows.clone().ok_or_else(|| err("measurement operators were not supplied".into()))?;
                if numel != 2 * dim * dim || rows.len() != n_ops * numel {
                    return Err(err(format!(
                        "{n_ops} operators of dim {dim} do not match input {input:?}"
                    )));
                }
                Box::new(ExpectationOp::new(*n_ops, numel, rows))
            }
            LayerSpec::UnitMax => Box::new(UnitMaxOp::new(input)),
            LayerSpec::SumScale { total } => {
                if !(*total > 0.0 && total.is_finite()) {
                    return Err(err(format!("total {total} must be positive")));
                }
                Box::new(SumScaleOp::new(input, *total))
            }
            LayerSpec::GaussianNoise { sigma } => {
                if !(*sigma >= 0.0) {
                    return Err(err(format!("sigma {sigma} must be >= 0")));
                }
                Box::new(GaussianNoise { sigma: *sigma, shape: input.to_vec() })
            }
            LayerSpec::GaussianConv { n_th, nx, ny, spacing_x, spacing_y } => {
                if numel != nx * ny || !(*n_th > 0.0) {
                    return Err(err(format!("grid {nx}x{ny} with n_th {n_th} does not fit input {input:?}")));
                }
                Box::new(GaussianConv {
                    shape: input.to_vec(),
                    nx: *nx,
                    ny: *ny,
                    kx: thermal_kernel_axis(*nx, *spacing_x, *n_th),
                    ky: thermal_kernel_axis(*ny, *spacing_y, *n_th),
                })
            }
        })
    }
}

fn image_shape(shape: &[usize]) -> Option<[usize; 3]> {
    match shape {
        [c, h, w] => Some([*c, *h, *w]),
        _ => None,
    }
}

/// Per-call state shared with the layers.
pub(crate) struct Ctx<'a> {
    pub train: bool,
    pub rng: &'a mut Rng,
}

pub(crate) trait Op: Send {
    fn out_shape(&self) -> Vec<usize>;
    fn forward(&mut self, x: &Tensor, ctx: &mut Ctx) -> Result<Tensor>;
    /// Returns the input gradient and accumulates parameter gradients.
    fn backward(&mut self, g: &Tensor) -> Result<Tensor>;
    fn params(&self) -> &[f64] {
        &[]
    }
    fn params_and_grads(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut [], &mut [])
    }
    /// Cached pre-activation input, used by the gradient penalty.
    fn cached_input(&self) -> &[f64] {
        &[]
    }
    fn as_dense_mut(&mut self) -> Option<&mut Dense> {
        None
    }
    fn leaky_slope(&self) -> Option<f64> {
        None
    }
    fn is_reshape(&self) -> bool {
        false
    }
}

fn glorot(fan_in: usize, fan_out: usize, n: usize, rng: &mut Rng) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| rng.random_range(-limit..=limit)).collect()
}

pub(crate) struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    pub bias: bool,
    params: Vec<f64>,
    grads: Vec<f64>,
    x: Vec<f64>,
}

impl Dense {
    fn new(n_in: usize, n_out: usize, bias: bool, rng: &mut Rng) -> Self {
        let mut params = glorot(n_in, n_out, n_in * n_out, rng);
        if bias {
            params.extend(std::iter::repeat_n(0.0, n_out));
        }
        let grads = vec![0.0; params.len()];
        Self { n_in, n_out, bias, params, grads, x: vec![] }
    }

    pub fn weights(&self) -> &[f64] {
        &self.params[..self.n_in * self.n_out]
    }

    pub fn weight_grads_mut(&mut self) -> &mut [f64] {
        &mut self.grads[..self.n_in * self.n_out]
    }
}

impl Op for Dense {
    fn out_shape(&self) -> Vec<usize> {
        vec![self.n_out]
    }

    fn forward(&mut self, x: &Tensor, _: &mut Ctx) -> Result<Tensor> {
        self.x.clear();
        self.x.extend_from_slice(x.data());
        let mut y = if self.bias { self.params[self.n_in * self.n_out..].to_vec() } else { vec![0.0; self.n_out] };
        gemm(self.n_out, self.n_in, 1, 1.0, self.weights(), false, x.data(), false, 1.0, &mut y);
        Ok(Tensor::vector(y))
    }

    fn backward(&mut self, g: &Tensor) -> Result<Tensor> {
        let (n_in, n_out) = (self.n_in, self.n_out);
        let g = g.data();
        gemm(n_out, 1, n_in, 1.0, g, false, &self.x, false, 1.0, &mut self.grads[..n_in * n_out]);
        if self.bias {
            for (b, gi) in self.grads[n_in * n_out..].iter_mut().zip(g) {
                *b += gi;
            }
        }
        let mut dx = vec![0.0; n_in];
        gemm(n_in, n_out, 1, 1.0, &self.params[..n_in * n_out], true, g, false, 0.0, &mut dx);
        Ok(Tensor::vector(dx))
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_and_grads(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.params, &mut self.grads)
    }

    fn cached_input(&self) -> &[f64] {
        &self.x
    }

    fn as_dense_mut(&mut self) -> Option<&mut Dense> {
        Some(self)
    }
}

/// Geometry of a strided 2-D correlation from an `h × w` image (the "big"
/// side) to an `oh × ow` grid of kernel positions.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeometry {
    k: usize,
    s: usize,
    pad_top: usize,
    pad_left: usize,
    /// Image side.
    h: usize,
    w: usize,
    /// Kernel-position side.
    oh: usize,
    ow: usize,
}

/// Output extent and leading padding of one axis.
fn axis(inp: usize, k: usize, s: usize, padding: Padding) -> Option<(usize, usize)> {
    if s == 0 || k == 0 {
        return None;
    }
    match padding {
        Padding::Valid => (inp >= k).then(|| ((inp - k) / s + 1, 0)),
        Padding::Same => {
            let out = inp.div_ceil(s);
            let total = ((out - 1) * s + k).saturating_sub(inp);
            Some((out, total / 2))
        }
    }
}

impl ConvGeometry {
    pub fn forward(h: usize, w: usize, k: usize, s: usize, padding: Padding) -> Option<Self> {
        let (oh, pad_top) = axis(h, k, s, padding)?;
        let (ow, pad_left) = axis(w, k, s, padding)?;
        (oh > 0 && ow > 0).then_some(Self { k, s, pad_top, pad_left, h, w, oh, ow })
    }

    /// Transposed convolution from an `h × w` input: the image side is the
    /// output, the kernel-position side is the input.
    pub fn transpose(h: usize, w: usize, k: usize, s: usize, padding: Padding) -> Option<Self> {
        if s == 0 || k == 0 || h == 0 || w == 0 {
            return None;
        }
        let (big_h, big_w, pad_top, pad_left) = match padding {
            Padding::Valid => ((h - 1) * s + k, (w - 1) * s + k, 0, 0),
            Padding::Same => {
                let total = k.saturating_sub(s);
                (h * s, w * s, total / 2, total / 2)
            }
        };
        Some(Self { k, s, pad_top, pad_left, h: big_h, w: big_w, oh: h, ow: w })
    }

    fn positions(&self) -> usize {
        self.oh * self.ow
    }

    /// `cols[(c·k + i)·k + j][p]` = image value seen by kernel tap `(i, j)`
    /// at position `p`.
    fn im2col(&self, img: &[f64], channels: usize, cols: &mut Vec<f64>) {
        let (k, np) = (self.k, self.positions());
        cols.clear();
        cols.resize(channels * k * k * np, 0.0);
        for c in 0..channels {
            let plane = &img[c * self.h * self.w..(c + 1) * self.h * self.w];
            for i in 0..k {
                for j in 0..k {
                    let row = &mut cols[((c * k + i) * k + j) * np..][..np];
                    for oy in 0..self.oh {
                        let y = (oy * self.s + i) as isize - self.pad_top as isize;
                        if y < 0 || y >= self.h as isize {
                            continue;
                        }
                        let src = &plane[y as usize * self.w..][..self.w];
                        for ox in 0..self.ow {
                            let x = (ox * self.s + j) as isize - self.pad_left as isize;
                            if x >= 0 && x < self.w as isize {
                                row[oy * self.ow + ox] = src[x as usize];
                            }
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of [`Self::im2col`]: scatters columns back into an image.
    fn col2im(&self, cols: &[f64], channels: usize, img: &mut [f64]) {
        let (k, np) = (self.k, self.positions());
        img.iter_mut().for_each(|v| *v = 0.0);
        for c in 0..channels {
            let plane = &mut img[c * self.h * self.w..(c + 1) * self.h * self.w];
            for i in 0..k {
                for j in 0..k {
                    let row = &cols[((c * k + i) * k + j) * np..][..np];
                    for oy in 0..self.oh {
                        let y = (oy * self.s + i) as isize - self.pad_top as isize;
                        if y < 0 || y >= self.h as isize {
                            continue;
                        }
                        for ox in 0..self.ow {
                            let x = (ox * self.s + j) as isize - self.pad_left as isize;
                            if x >= 0 && x < self.w as isize {
                                plane[y as usize * self.w + x as usize] += row[oy * self.ow + ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

pub(crate) struct Conv2d {
    c: usize,
    f: usize,
    geo: ConvGeometry,
    bias: bool,
    params: Vec<f64>,
    grads: Vec<f64>,
    cols: Vec<f64>,
}

impl Conv2d {
    fn new(c: usize, f: usize, geo: ConvGeometry, bias: bool, rng: &mut Rng) -> Self {
        let kk = geo.k * geo.k;
        let mut params = glorot(c * kk, f * kk, f * c * kk, rng);
        if bias {
            params.extend(std::iter::repeat_n(0.0, f));
        }
        let grads = vec![0.0; params.len()];
        Self { c, f, geo, bias, params, grads, cols: vec![] }
    }

    fn taps(&self) -> usize {
        self.c * self.geo.k * self.geo.k
    }
}

impl Op for Conv2d {
    fn out_shape(&self) -> Vec<usize> {
        vec![self.f, self.geo.oh, self.geo.ow]
    }

    fn forward(&mut self, x: &Tensor, _: &mut Ctx) -> Result<Tensor> {
        let np = self.geo.positions();
        let taps = self.taps();
        self.geo.im2col(x.data(), self.c, &mut self.cols);
        let mut y = vec![0.0; self.f * np];
        if self.bias {
            for (o, b) in y.chunks_exact_mut(np).zip(&self.params[self.f * taps..]) {
                o.iter_mut().for_each(|v| *v = *b);
            }
        }
        gemm(self.f, taps, np, 1.0, &self.params[..self.f * taps], false, &self.cols, false, 1.0, &mut y);
        Tensor::new(self.out_shape(), y)
    }

    fn backward(&mut self, g: &Tensor) -> Result<Tensor> {
        let np = self.geo.positions();
        let taps = self.taps();
        let g = g.data();
        gemm(self.f, np, taps, 1.0, g, false, &self.cols, true, 1.0, &mut self.grads[..self.f * taps]);
        if self.bias {
            for (b, row) in self.grads[self.f * taps..].iter_mut().zip(g.chunks_exact(np)) {
                *b += row.iter().sum::<f64>();
            }
        }
        let mut dcols = vec![0.0; taps * np];
        gemm(taps, self.f, np, 1.0, &self.params[..self.f * taps], true, g, false, 0.0, &mut dcols);
        let mut dx = vec![0.0; self.c * self.geo.h * self.geo.w];
        self.geo.col2im(&dcols, self.c, &mut dx);
        Tensor::new(vec![self.c, self.geo.h, self.geo.w], dx)
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_and_grads(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.params, &mut self.grads)
    }
}

/// Transposed convolution: the adjoint of a strided convolution from
/// `[F, H', W']` to `[C, H, W]`, with weights stored `[C, F·k·k]`.
pub(crate) struct Conv2dTranspose {
    c: usize,
    f: usize,
    geo: ConvGeometry,
    bias: bool,
    params: Vec<f64>,
    grads: Vec<f64>,
    x: Vec<f64>,
    gcols: Vec<f64>,
}

impl Conv2dTranspose {
    fn new(c: usize, f: usize, geo: ConvGeometry, bias: bool, rng: &mut Rng) -> Self {
        let kk = geo.k * geo.k;
        let mut params = glorot(f * kk, c * kk, c * f * kk, rng);
        if bias {
            params.extend(std::iter::repeat_n(0.0, f));
        }
        let grads = vec![0.0; params.len()];
        Self { c, f, geo, bias, params, grads, x: vec![], gcols: vec![] }
    }

    fn taps(&self) -> usize {
        self.f * self.geo.k * self.geo.k
    }
}

impl Op for Conv2dTranspose {
    fn out_shape(&self) -> Vec<usize> {
        vec![self.f, self.geo.h, self.geo.w]
    }

    fn forward(&mut self, x: &Tensor, _: &mut Ctx) -> Result<Tensor> {
        let np = self.geo.positions();
        let taps = self.taps();
        self.x.clear();
        self.x.extend_from_slice(x.data());
        let mut cols = vec![0.0; taps * np];
        gemm(taps, self.c, np, 1.0, &self.params[..self.c * taps], true, x.data(), false, 0.0, &mut cols);
        let plane = self.geo.h * self.geo.w;
        let mut y = vec![0.0; self.f * plane];
        self.geo.col2im(&cols, self.f, &mut y);
        if self.bias {
            for (o, b) in y.chunks_exact_mut(plane).zip(&self.params[self.c * taps..]) {
                o.iter_mut().for_each(|v| *v += *b);
            }
        }
        Tensor::new(self.out_shape(), y)
    }

    fn backward(&mut self, g: &Tensor) -> Result<Tensor> {
        let np = self.geo.positions();
        let taps = self.taps();
        self.geo.im2col(g.data(), self.f, &mut self.gcols);
        gemm(self.c, np, taps, 1.0, &self.x, false, &self.gcols, true, 1.0, &mut self.grads[..self.c * taps]);
        if self.bias {
            let plane = self.geo.h * self.geo.w;
            for (b, row) in self.grads[self.c * taps..].iter_mut().zip(g.data().chunks_exact(plane)) {
                *b += row.iter().sum::<f64>();
            }
        }
        let mut dx = vec![0.0; self.c * np];
        gemm(self.c, taps, np, 1.0, &self.params[..self.c * taps], false, &self.gcols, false, 0.0, &mut dx);
        Tensor::new(vec![self.c, self.geo.oh, self.geo.ow], dx)
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_and_grads(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.params, &mut self.grads)
    }
}

pub(crate) const INSTANCE_NORM_EPS: f64 = 1e-5;

/// Per-channel normalization over spatial positions with a learned scale
/// and shift (`[γ…, β…]`).
pub(crate) struct InstanceNorm {
    c: usize,
    n: usize,
    shape: Vec<usize>,
    params: Vec<f64>,
    grads: Vec<f64>,
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
}

impl InstanceNorm {
    fn new(c: usize, n: usize, shape: &[usize]) -> Self {
        let mut params = vec![1.0; c];
        params.extend(std::iter::repeat_n(0.0, c));
        Self { c, n, shape: shape.to_vec(), grads: vec![0.0; 2 * c], params, xhat: vec![], inv_std: vec![] }
    }
}

impl Op for InstanceNorm {
    fn out_shape(&self) -> Vec<usize> {
        self.shape.clone()
    }

    fn forward(&mut self, x: &Tensor, _: &mut Ctx) -> Result<Tensor> {
        let n = self.n as f64;
        self.xhat.clear();
        self.inv_std.clear();
        let mut y = Vec::with_capacity(x.len());
        for (ch, plane) in x.data().chunks_exact(self.n).enumerate() {
            let mean = plane.iter().sum::<f64>() / n;
            let var = plane.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let inv = 1.0 / (var + INSTANCE_NORM_EPS).sqrt();
            self.inv_std.push(inv);
            let (gamma, beta) = (self.params[ch], self.params[self.c + ch]);
            for v in plane {
                let h = (v - mean) * inv;
                self.xhat.push(h);
                y.push(gamma * h + beta);
            }
        }
        Tensor::new(self.shape.clone(), y)
    }

    fn backward(&mut self, g: &Tensor) -> Result<Tensor> {
        let n = self.n as f64;
        let mut dx = Vec::with_capacity(g.len());
        for (ch, gp) in g.data().chunks_exact(self.n).enumerate() {
            let xh = &self.xhat[ch * self.n..(ch + 1) * self.n];
            let gamma = self.params[ch];
            let mut sum_g = 0.0;
            let mut sum_gx = 0.0;
            for (gi, hi) in gp.iter().zip(xh) {
                sum_g += gi;
                sum_gx += gi * hi;
            }
            self.grads[ch] += sum_gx;
            self.grads[self.c + ch] += sum_g;
            let scale = gamma * self.inv_std[ch] / n;
            for (gi, hi) in gp.iter().zip(xh) {
                dx.push(scale * (n * gi - sum_g - hi * sum_gx));
            }
        }
        Tensor::new(self.shape.clone(), dx)
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_and_grads(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.params, &mut self.grads)
    }
}

pub(crate) struct LeakyRelu {
    pub slope: f64,
    shape: Vec<usize>,
    x: Vec<f64>,
}

impl Op for LeakyRelu {
    fn out_shape(&self) -> Vec<usize> {
        self.shape.clone()
    }

    fn forward(&mut self, x: &Tensor, _: &mut Ctx) -> Result<Tensor> {
        self.x.clear();
        self.x.extend_from_slice(x.data());
        let y = x.data().iter().map(|&v| if v > 0.0 { v } else { self.slope * v }).collect();
        Tensor::new(self.shape.clone(), y)
    }

    fn backward(&mut self, g: &Tensor) -> Result<Tensor> {
        let dx = g.data().iter().zip(&self.x).map(|(gi, &v)| if v > 0.0 { *gi } else { self.slope * gi }).collect();
        Tensor::new(self.shape.clone(), dx)
    }

    fn cached_input(&self) -> &[f64] {
        &self.x
    }

    fn leaky_slope(&self) -> Option<f64> {
        Some(self.slope)
    }
}

pub(crate) struct Softmax {
    n: usize,
    y: Vec<f64>,
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

impl Op for Softmax {
    fn out_shape(&self) -> Vec<usize> {
        vec![self.n]
    }

    fn forward(&mut self, x: &Tensor, _: &mut Ctx) -> Result<Tensor> {
        self.y = softmax(x.data());
        Ok(Tensor::vector(self.y.clone()))
    }

    fn backward(&mut self, g: &Tensor) -> Result<Tensor> {
        let dot: f64 = g.data().iter().zip(&self.y).map(|(a, b)| a * b).sum();
        Ok(Tensor::vector(g.data().iter().zip(&self.y).map(|(gi, yi)| yi * (gi - dot)).collect()))
    }
}

/// Inverted dropout: kept units are scaled by `1/(1 − rate)` in training.
pub(crate) struct Dropout {
    rate: f64,
    shape: Vec<usize>,
    mask: Option<Vec<f64>>,
}

impl Op for Dropout {
    fn out_shape(&self) -> Vec<usize> {
        self.shape.clone()
    }

    fn forward(&mut self, x: &Tensor, ctx: &mut Ctx) -> Result<Tensor> {
        if !ctx.train || self.rate == 0.0 {
            self.mask = None;
            return Ok(x.clone());
        }
        let keep = 1.0 - self.rate;
        let mask: Vec<f64> =
            (0..x.len()).map(|_| if ctx.rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect();
        let y = x.data().iter().zip(&mask).map(|(a, m)| a * m).collect();
        self.mask = Some(mask);
        Tensor::new(self.shape.clone(), y)
    }

    fn backward(&mut self, g: &Tensor) -> Result<Tensor> {
        match &self.mask {
            None => Ok(g.clone()),
            Some(mask) => Tensor::new(self.shape.clone(), g.data().iter().zip(mask).map(|(a, m)| a * m).collect()),
        }
    }
}

pub(crate) struct Reshape {
    input: Vec<usize>,
    output: Vec<usize>,
}

impl Op for Reshape {
    fn out_shape(&self) -> Vec<usize> {
        self.output.clone()
    }

    fn forward(&mut self, x: &Tensor, _: &mut Ctx) -> Result<Tensor> {
        x.clone().reshaped(&self.output)
    }

    fn backward(&mut self, g: &Tensor) -> Result<Tensor> {
        g.clone().reshaped(&self.input)
    }

    fn is_reshape(&self) -> bool {
        true
    }
}

pub(crate) struct GaussianNoise {
    sigma: f64,
    shape: Vec<usize>,
}

impl Op for GaussianNoise {
    fn out_shape(&self) -> Vec<usize> {
        self.shape.clone()
    }

    fn forward(&mut self, x: &Tensor, ctx: &mut Ctx) -> Result<Tensor> {
        if !ctx.train || self.sigma == 0.0 {
            return Ok(x.clone());
        }
        let normal = Normal::new(0.0, self.sigma).expect("sigma is finite and positive");
        let y = x.data().iter().map(|v| v + normal.sample(ctx.rng)).collect();
        Tensor::new(self.shape.clone(), y)
    }

    fn backward(&mut self, g: &Tensor) -> Result<Tensor> {
        Ok(g.clone())
    }
}

/// The sampled thermal kernel is symmetric, so its adjoint (correlation) is
/// the same convolution.
pub(crate) struct GaussianConv {
    shape: Vec<usize>,
    nx: usize,
    ny: usize,
    kx: Vec<f64>,
    ky: Vec<f64>,
}

impl Op for GaussianConv {
    fn out_shape(&self) -> Vec<usize> {
        self.shape.clone()
    }

    fn forward(&mut self, x: &Tensor, _: &mut Ctx) -> Result<Tensor> {
        Tensor::new(self.shape.clone(), convolve_separable(x.data(), self.nx, self.ny, &self.kx, &self.ky))
    }

    fn backward(&mut self, g: &Tensor) -> Result<Tensor> {
        Tensor::new(self.shape.clone(), convolve_separable(g.data(), self.nx, self.ny, &self.kx, &self.ky))
    }
}

/// `(out, pad_before)` along one axis of a forward convolution.
pub fn conv_output_size(inp: usize, k: usize, s: usize, padding: Padding) -> Option<usize> {
    axis(inp, k, s, padding).map(|(o, _)| o).filter(|&o| o > 0)
}

/// Output extent along one axis of a transposed convolution.
pub fn conv_transpose_output_size(inp: usize, k: usize, s: usize, padding: Padding) -> Option<usize> {
    ConvGeometry::transpose(inp, inp, k, s, padding).map(|g| g.h)
}
