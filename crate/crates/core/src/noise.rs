//! Corruption channels, acting either on states (mixing, photon loss) or on
//! measured data arrays (convolution, affine distortion, additive Gaussian
//! noise, pepper noise).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{QstError, Result};
use crate::fock::{DensityMatrix, C64};
use crate::measure::{DataVector, PhaseGrid};
use crate::states::make_random_density;
use crate::{rng_from_seed, Rng};

/// `(1 − σ)ρ + σρ_random` with a seeded random state of the given density.
pub fn mix_random(rho: &DensityMatrix, sigma: f64, density: f64, seed: u64) -> Result<DensityMatrix> {
    if !(0.0..=0.5).contains(&sigma) {
        return Err(QstError::OutOfRange { field: "sigma", value: sigma, range: "[0, 0.5]" });
    }
    if sigma == 0.0 {
        return Ok(rho.clone());
    }
    let random = make_random_density(density, rho.dim(), seed)?;
    rho.mix(&random, sigma)
}

/// Amplitude damping that removes a fraction `loss_fraction` of the mean
/// photon number. Kraus operators
/// `A_k = Σ_n √C(n,k) η^{(n−k)/2} (1−η)^{k/2} |n−k⟩⟨n|` with `η = 1 − loss_fraction`.
pub fn photon_loss(rho: &DensityMatrix, loss_fraction: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&loss_fraction) {
        return Err(QstError::OutOfRange { field: "loss_fraction", value: loss_fraction, range: "[0, 1]" });
    }
    let dim = rho.dim();
    let eta = 1.0 - loss_fraction;
    // amp[n][k] = ⟨n−k|A_k|n⟩
    let mut amp = vec![vec![0.0; dim]; dim];
    for (n, row) in amp.iter_mut().enumerate() {
        let mut binom = 1.0;
        for (k, a) in row.iter_mut().enumerate().take(n + 1) {
            if k > 0 {
                binom *= (n - k + 1) as f64 / k as f64;
            }
            *a = (binom * eta.powi((n - k) as i32) * loss_fraction.powi(k as i32)).sqrt();
        }
    }
    let src = rho.matrix();
    let out = DMatrix::from_fn(dim, dim, |m, mp| {
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..dim - m.max(mp) {
            acc += src[(m + k, mp + k)] * (amp[m + k][k] * amp[mp + k][k]);
        }
        acc
    });
    DensityMatrix::normalize(out)
}

/// Photon loss parameterized by the damping time `γτ`, i.e. `η = e^{−γτ}`.
pub fn photon_loss_time(rho: &DensityMatrix, gamma_tau: f64) -> Result<DensityMatrix> {
    if !(gamma_tau >= 0.0) {
        return Err(QstError::OutOfRange { field: "gamma_tau", value: gamma_tau, range: "[0, inf)" });
    }
    photon_loss(rho, 1.0 - (-gamma_tau).exp())
}

fn square_shape(grid: &PhaseGrid, len: usize) -> Result<(usize, usize)> {
    let (nx, ny) = grid
        .shape()
        .ok_or_else(|| QstError::InvalidGrid("operation needs a square grid".into()))?;
    if nx * ny != len {
        return Err(QstError::DimensionMismatch { expected: nx * ny, got: len });
    }
    Ok((nx, ny))
}

/// One axis of the sampled thermal kernel `exp(−x²/n_th)` over offsets
/// `−(n−1)…(n−1)` grid steps, normalized to unit sum. The 2-D kernel is the
/// outer product of the two axes, and normalizing each axis normalizes the
/// product.
pub fn thermal_kernel_axis(n: usize, spacing: f64, n_th: f64) -> Vec<f64> {
    let mut k: Vec<f64> = (0..2 * n - 1)
        .map(|i| {
            let x = (i as f64 - (n - 1) as f64) * spacing;
            (-x * x / n_th).exp()
        })
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

/// Zero-padded "same" convolution of a row-major `ny × nx` image with the
/// separable kernel `ky ⊗ kx`, each axis of length `2n − 1` and centered.
pub fn convolve_separable(image: &[f64], nx: usize, ny: usize, kx: &[f64], ky: &[f64]) -> Vec<f64> {
    debug_assert_eq!(kx.len(), 2 * nx - 1);
    debug_assert_eq!(ky.len(), 2 * ny - 1);
    let mut tmp = vec![0.0; nx * ny];
    for r in 0..ny {
        let row = &image[r * nx..(r + 1) * nx];
        for c in 0..nx {
            // out[c] = Σ_s row[s] kx[c − s + nx − 1]
            tmp[r * nx + c] = row.iter().enumerate().map(|(s, v)| v * kx[c + nx - 1 - s]).sum();
        }
    }
    let mut out = vec![0.0; nx * ny];
    for r in 0..ny {
        for s in 0..ny {
            let w = ky[r + ny - 1 - s];
            if w == 0.0 {
                continue;
            }
            for c in 0..nx {
                out[r * nx + c] += w * tmp[s * nx + c];
            }
        }
    }
    out
}

/// Convolves square-grid data with the thermal kernel
/// `P(β) = exp(−|β|²/n_th)/(π n_th)` sampled on the grid and normalized to
/// unit discrete mass.
pub fn gaussian_convolve(data: &DataVector, grid: &PhaseGrid, n_th: f64) -> Result<DataVector> {
    if !(n_th > 0.0) || !n_th.is_finite() {
        return Err(QstError::OutOfRange { field: "n_th", value: n_th, range: "(0, inf)" });
    }
    let (nx, ny) = square_shape(grid, data.len())?;
    let (hx, hy) = grid.spacing().expect("square grid has spacing");
    let kx = thermal_kernel_axis(nx, hx, n_th);
    let ky = thermal_kernel_axis(ny, hy, n_th);
    Ok(data.with_values(convolve_separable(&data.values, nx, ny, &kx, &ky)))
}

/// Parameters of one affine distortion. Angles are in radians and shifts
/// are fractions of the image size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineParams {
    pub theta: f64,
    pub shear: f64,
    pub shift_x: f64,
    pub shift_p: f64,
    pub scale_x: f64,
    pub scale_p: f64,
    pub flip_x: bool,
    pub flip_p: bool,
}

impl Default for AffineParams {
    fn default() -> Self {
        Self { theta: 0.0, shear: 0.0, shift_x: 0.0, shift_p: 0.0, scale_x: 1.0, scale_p: 1.0, flip_x: false, flip_p: false }
    }
}

/// Sampling ranges for random affine augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineRanges {
    pub theta_max: f64,
    pub shear_max: f64,
    pub shift_max: f64,
    pub zoom_min: f64,
    pub zoom_max: f64,
    pub flips: bool,
}

impl Default for AffineRanges {
    fn default() -> Self {
        Self { theta_max: PI, shear_max: 5f64.to_radians(), shift_max: 0.2, zoom_min: 0.8, zoom_max: 1.2, flips: true }
    }
}

impl AffineRanges {
    pub fn sample(&self, rng: &mut Rng) -> AffineParams {
        AffineParams {
            theta: rng.random_range(0.0..=self.theta_max),
            shear: rng.random_range(0.0..=self.shear_max),
            shift_x: rng.random_range(-self.shift_max..=self.shift_max),
            shift_p: rng.random_range(-self.shift_max..=self.shift_max),
            scale_x: rng.random_range(self.zoom_min..=self.zoom_max),
            scale_p: rng.random_range(self.zoom_min..=self.zoom_max),
            flip_x: self.flips && rng.random_bool(0.5),
            flip_p: self.flips && rng.random_bool(0.5),
        }
    }
}

/// Resamples a row-major `height × width` image. Output pixel at centered
/// coordinates `(x, p)` reads the input at
/// `X = s_x x cosθ − s_p p sin(θ+Ω) + Δx`, `Y = s_x x sinθ + s_p p cos(θ+Ω) + Δp`
/// with bilinear interpolation; points outside the image read 0.
pub fn affine_augment(image: &[f64], width: usize, height: usize, params: &AffineParams) -> Result<Vec<f64>> {
    if image.len() != width * height {
        return Err(QstError::DimensionMismatch { expected: width * height, got: image.len() });
    }
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let (st, ct) = params.theta.sin_cos();
    let (ss, cs) = (params.theta + params.shear).sin_cos();
    let dx = params.shift_x * width as f64;
    let dp = params.shift_p * height as f64;
    let pixel = |r: i64, c: i64| -> f64 {
        if r < 0 || c < 0 || r >= height as i64 || c >= width as i64 {
            0.0
        } else {
            image[r as usize * width + c as usize]
        }
    };
    let mut out = vec![0.0; image.len()];
    for i in 0..height {
        for j in 0..width {
            let mut x = j as f64 - cx;
            let mut p = i as f64 - cy;
            if params.flip_x {
                x = -x;
            }
            if params.flip_p {
                p = -p;
            }
            let sx = params.scale_x * x;
            let sp = params.scale_p * p;
            let col = sx * ct - sp * ss + dx + cx;
            let row = sx * st + sp * cs + dp + cy;
            let (c0, r0) = (col.floor(), row.floor());
            let (fc, fr) = (col - c0, row - r0);
            let (c0, r0) = (c0 as i64, r0 as i64);
            out[i * width + j] = (1.0 - fr) * ((1.0 - fc) * pixel(r0, c0) + fc * pixel(r0, c0 + 1))
                + fr * ((1.0 - fc) * pixel(r0 + 1, c0) + fc * pixel(r0 + 1, c0 + 1));
        }
    }
    Ok(out)
}

/// `d + N(0, σ_G²)` elementwise, without clipping.
pub fn additive_gaussian(data: &DataVector, sigma: f64, seed: u64) -> Result<DataVector> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(QstError::OutOfRange { field: "sigma_G", value: sigma, range: "[0, inf)" });
    }
    if sigma == 0.0 {
        return Ok(data.clone());
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
    let mut rng = rng_from_seed(seed);
    Ok(data.with_values(data.values.iter().map(|v| v + normal.sample(&mut rng)).collect()))
}

/// Zeroes exactly `round(fraction · len)` distinct positions.
pub fn pepper(data: &DataVector, fraction: f64, seed: u64) -> Result<DataVector> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(QstError::OutOfRange { field: "fraction", value: fraction, range: "[0, 1]" });
    }
    let count = (fraction * data.len() as f64).round() as usize;
    let mut rng = rng_from_seed(seed);
    let mut values = data.values.clone();
    for i in rand::seq::index::sample(&mut rng, data.len(), count) {
        values[i] = 0.0;
    }
    Ok(data.with_values(values))
}

/// Serializable description of one corruption step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    MixRandom { sigma: f64, density: f64, seed: u64 },
    PhotonLoss { fraction: f64 },
    GaussianConv { n_th: f64 },
    Affine { params: AffineParams },
    AdditiveGaussian { sigma: f64, seed: u64 },
    Pepper { fraction: f64, seed: u64 },
}

impl NoiseSpec {
    pub fn acts_on_state(&self) -> bool {
        matches!(self, NoiseSpec::MixRandom { .. } | NoiseSpec::PhotonLoss { .. })
    }

    pub fn apply_to_state(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        match *self {
            NoiseSpec::MixRandom { sigma, density, seed } => mix_random(rho, sigma, density, seed),
            NoiseSpec::PhotonLoss { fraction } => photon_loss(rho, fraction),
            _ => Err(QstError::InvalidArgument(format!("{self:?} acts on data, not states"))),
        }
    }

    pub fn apply_to_data(&self, data: &DataVector, grid: &PhaseGrid) -> Result<DataVector> {
        match self {
            NoiseSpec::GaussianConv { n_th } => gaussian_convolve(data, grid, *n_th),
            NoiseSpec::Affine { params } => {
                let (nx, ny) = square_shape(grid, data.len())?;
                Ok(data.with_values(affine_augment(&data.values, nx, ny, params)?))
            }
            NoiseSpec::AdditiveGaussian { sigma, seed } => additive_gaussian(data, *sigma, *seed),
            NoiseSpec::Pepper { fraction, seed } => pepper(data, *fraction, *seed),
            _ => Err(QstError::InvalidArgument(format!("{self:?} acts on states, not data"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::husimi;
    use crate::states::{make_cat, make_coherent, make_fock, make_random_density, mean_photon};
    use crate::{fidelity, root_fidelity, trace_distance};
    use approx::assert_abs_diff_eq;

    /// RK4 integration of `dρ/dt = aρa† − ½{a†a, ρ}` up to `t = −ln η`.
    fn lindblad_decay(rho: &DensityMatrix, loss: f64, steps: usize) -> DMatrix<C64> {
        let dim = rho.dim();
        let a = crate::annihilation(dim).unwrap().into_inner();
        let ad = a.adjoint();
        let n = &ad * &a;
        let rhs = |r: &DMatrix<C64>| &a * r * &ad - (&n * r + r * &n) * C64::from(0.5);
        let t = -(1.0 - loss).ln();
        let h = C64::from(t / steps as f64);
        let mut r = rho.matrix().clone();
        for _ in 0..steps {
            let k1 = rhs(&r);
            let k2 = rhs(&(&r + &k1 * (h * 0.5)));
            let k3 = rhs(&(&r + &k2 * (h * 0.5)));
            let k4 = rhs(&(&r + &k3 * h));
            r += (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * (h / 6.0);
        }
        r
    }

    #[test]
    fn mix_examples() {
        let rho = make_cat(C64::from(1.5), 0, 0, 16).unwrap();
        assert_eq!(mix_random(&rho, 0.0, 0.8, 1).unwrap(), rho);
        let mixed = mix_random(&rho, 0.5, 0.8, 1).unwrap();
        assert!(fidelity(&mixed, &rho).unwrap() >= 0.5 - 1e-12);
        for seed in 0..50 {
            assert_abs_diff_eq!(mix_random(&rho, 0.3, 0.8, seed).unwrap().trace(), 1.0, epsilon = 1e-12);
        }
        assert!(mix_random(&rho, 0.6, 0.8, 1).is_err());
    }

    #[test]
    fn loss_identity_and_full_decay() {
        let rho = make_random_density(1.0, 8, 2).unwrap();
        assert!(photon_loss(&rho, 0.0).unwrap().max_abs_diff(&rho) < 1e-15);
        let vac = photon_loss(&rho, 1.0).unwrap();
        assert_abs_diff_eq!(vac.populations()[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn loss_keeps_coherent_states_coherent() {
        let out = photon_loss(&make_coherent(C64::from(2.0), 32).unwrap(), 0.5).unwrap();
        let target = make_coherent(C64::from(2.0 * 0.5f64.sqrt()), 32).unwrap();
        assert!(fidelity(&out, &target).unwrap() > 1.0 - 1e-6);
    }

    #[test]
    fn loss_scales_mean_photon_number() {
        let rho = make_random_density(0.8, 10, 5).unwrap();
        for f in [0.1, 0.35, 0.8] {
            let out = photon_loss(&rho, f).unwrap();
            assert_abs_diff_eq!(mean_photon(&out), (1.0 - f) * mean_photon(&rho), epsilon = 1e-12);
        }
    }

    #[test]
    fn cat_loss_fidelities() {
        let cat = make_cat(C64::from(2.0), 0, 0, 32).unwrap();
        let f20 = root_fidelity(&cat, &photon_loss(&cat, 0.2).unwrap()).unwrap();
        let f100 = root_fidelity(&cat, &photon_loss(&cat, 1.0).unwrap()).unwrap();
        assert!((f20 - 0.76).abs() < 0.02, "{f20}");
        assert!((f100 - 0.19).abs() < 0.02, "{f100}");
    }

    #[test]
    fn kraus_matches_master_equation() {
        for seed in 0..5 {
            let rho = make_random_density(1.0, 8, 100 + seed).unwrap();
            for loss in [0.2, 0.5] {
                let kraus = photon_loss(&rho, loss).unwrap();
                let ode = DensityMatrix::normalize(lindblad_decay(&rho, loss, 2000)).unwrap();
                assert!(trace_distance(&kraus, &ode).unwrap() < 1e-6);
            }
        }
    }

    #[test]
    fn loss_semigroup() {
        let rho = make_random_density(0.7, 12, 9).unwrap();
        let (f1, f2) = (0.3, 0.45);
        let two = photon_loss(&photon_loss(&rho, f1).unwrap(), f2).unwrap();
        let one = photon_loss(&rho, 1.0 - (1.0 - f1) * (1.0 - f2)).unwrap();
        assert!(two.max_abs_diff(&one) < 1e-12);
    }

    #[test]
    fn loss_time_parameterization() {
        let rho = make_fock(3, 8).unwrap();
        let a = photon_loss_time(&rho, 0.7).unwrap();
        let b = photon_loss(&rho, 1.0 - (-0.7f64).exp()).unwrap();
        assert_eq!(a, b);
    }

    fn vacuum_husimi(n: usize) -> (PhaseGrid, DataVector) {
        let g = PhaseGrid::square(-5.0, 5.0, n, n).unwrap();
        let q = husimi(&make_fock(0, 16).unwrap(), &g, 2).unwrap();
        (g, q)
    }

    #[test]
    fn convolution_delta_limit() {
        let (g, q) = vacuum_husimi(33);
        let h = g.spacing().unwrap().0;
        let out = gaussian_convolve(&q, &g, 1e-3 * h * h).unwrap();
        for (a, b) in out.values.iter().zip(&q.values) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
    }

    #[test]
    fn convolved_vacuum_matches_thermal_broadening() {
        let (g, q) = vacuum_husimi(81);
        let out = gaussian_convolve(&q, &g, 3.0).unwrap();
        for (b, v) in g.points().iter().zip(&out.values) {
            let expected = (-b.norm_sqr() / 4.0).exp() / (4.0 * PI);
            assert_abs_diff_eq!(*v, expected, epsilon = 2e-3);
        }
    }

    #[test]
    fn convolution_preserves_interior_mass() {
        let (g, _) = vacuum_husimi(41);
        let mut img = vec![0.0; 41 * 41];
        img[20 * 41 + 20] = 1.0;
        img[18 * 41 + 22] = 0.5;
        let d = DataVector::raw(img);
        let out = gaussian_convolve(&d, &g, 0.5).unwrap();
        assert_abs_diff_eq!(out.values.iter().sum::<f64>(), 1.5, epsilon = 1e-10);
        assert!(out.values.iter().all(|v| *v >= 0.0));
        let scatter = PhaseGrid::scatter(41 * 41, 5.0, 1).unwrap();
        assert!(gaussian_convolve(&d, &scatter, 0.5).is_err());
    }

    #[test]
    fn separable_matches_direct_2d() {
        let (nx, ny) = (5, 4);
        let img: Vec<f64> = (0..nx * ny).map(|i| ((i * 7) % 11) as f64).collect();
        let kx = thermal_kernel_axis(nx, 0.5, 0.8);
        let ky = thermal_kernel_axis(ny, 0.3, 0.8);
        let fast = convolve_separable(&img, nx, ny, &kx, &ky);
        for r in 0..ny {
            for c in 0..nx {
                let mut acc = 0.0;
                for s in 0..ny {
                    for t in 0..nx {
                        acc += img[s * nx + t] * ky[r + ny - 1 - s] * kx[c + nx - 1 - t];
                    }
                }
                assert_abs_diff_eq!(fast[r * nx + c], acc, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn affine_identity_and_half_turn() {
        let (w, h) = (6, 6);
        let img: Vec<f64> = (0..w * h).map(|i| (i as f64).sin()).collect();
        let same = affine_augment(&img, w, h, &AffineParams::default()).unwrap();
        for (a, b) in same.iter().zip(&img) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        let turned = affine_augment(&img, w, h, &AffineParams { theta: PI, ..Default::default() }).unwrap();
        for i in 0..h {
            for j in 0..w {
                assert_abs_diff_eq!(turned[i * w + j], img[(h - 1 - i) * w + (w - 1 - j)], epsilon = 1e-10);
            }
        }
        let flipped = affine_augment(&img, w, h, &AffineParams { flip_x: true, ..Default::default() }).unwrap();
        assert_abs_diff_eq!(flipped[0], img[w - 1], epsilon = 1e-12);
    }

    #[test]
    fn affine_sampling_is_seeded() {
        let ranges = AffineRanges::default();
        let a = ranges.sample(&mut rng_from_seed(4));
        let b = ranges.sample(&mut rng_from_seed(4));
        assert_eq!(a, b);
        assert!(a.theta <= PI && a.shift_x.abs() <= 0.2 && (0.8..=1.2).contains(&a.scale_x));
    }

    #[test]
    fn additive_noise_statistics() {
        let d = DataVector::raw(vec![0.25; 1_000_000]);
        assert_eq!(additive_gaussian(&d, 0.0, 1).unwrap(), d);
        let out = additive_gaussian(&d, 1.0, 1).unwrap();
        let diffs: Vec<f64> = out.values.iter().map(|v| v - 0.25).collect();
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let sd = (diffs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / diffs.len() as f64).sqrt();
        assert!(mean.abs() < 5e-3);
        assert!((sd - 1.0).abs() < 0.01);
        assert_eq!(out, additive_gaussian(&d, 1.0, 1).unwrap());
    }

    #[test]
    fn pepper_counts() {
        let d = DataVector::raw(vec![1.0; 1024]);
        assert_eq!(pepper(&d, 0.0, 3).unwrap(), d);
        assert!(pepper(&d, 1.0, 3).unwrap().values.iter().all(|v| *v == 0.0));
        let half = pepper(&d, 0.5, 3).unwrap();
        assert_eq!(half.values.iter().filter(|v| **v == 0.0).count(), 512);
    }

    #[test]
    fn noise_spec_dispatch() {
        let spec: NoiseSpec = serde_json::from_str(r#"{"kind":"photon_loss","fraction":0.5}"#).unwrap();
        assert!(spec.acts_on_state());
        let rho = make_fock(2, 6).unwrap();
        let out = spec.apply_to_state(&rho).unwrap();
        assert_abs_diff_eq!(out.populations()[1], 0.5, epsilon = 1e-12);
        let g = PhaseGrid::square(-1.0, 1.0, 2, 2).unwrap();
        assert!(spec.apply_to_data(&DataVector::raw(vec![0.0; 4]), &g).is_err());
        let pep = NoiseSpec::Pepper { fraction: 0.5, seed: 1 };
        let v = pep.apply_to_data(&DataVector::raw(vec![1.0; 4]), &g).unwrap();
        assert_eq!(v.values.iter().sum::<f64>(), 2.0);
    }
}
