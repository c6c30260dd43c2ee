//! Complex linear algebra and bosonic operators in a truncated Fock space.
//!
//! Every matrix here lives in the span of `|0⟩ … |N−1⟩` for a cutoff `N`.
//! Operators such as the displacement `D(α) = exp(αa† − α*a)` are formed
//! from the *truncated* ladder operators, so they carry the usual
//! truncation artifacts near the cutoff.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{QstError, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Numerical thresholds used when validating states and observables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub hermitian: f64,
    pub trace: f64,
    pub min_eigenvalue: f64,
    pub observable_hermitian: f64,
    pub ket_norm: f64,
    pub degenerate_trace: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hermitian: 1e-10,
            trace: 1e-10,
            min_eigenvalue: -1e-9,
            observable_hermitian: 1e-8,
            ket_norm: 1e-10,
            degenerate_trace: 1e-30,
        }
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        Err(QstError::InvalidDimension(dim))
    } else {
        Ok(())
    }
}

fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn hermitian_defect(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Square complex matrix over a truncated Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix(DMatrix<C64>);

impl CMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(QstError::InvalidArgument(format!(
                "matrix is {}x{}, expected square",
                m.nrows(),
                m.ncols()
            )));
        }
        check_dim(m.nrows())?;
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(QstError::InvalidArgument("non-finite matrix entry".into()));
        }
        Ok(Self(m))
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Result<Self> {
        check_dim(dim)?;
        Self::new(DMatrix::from_fn(dim, dim, f))
    }

    pub fn identity(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self(DMatrix::identity(dim, dim)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }

    pub fn dagger(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        hermitian_defect(&self.0) <= tol
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        max_abs_diff(&self.0, &other.0)
    }

    /// Real linear combination `x·self + y·other`.
    pub fn combine(&self, x: f64, other: &CMatrix, y: f64) -> Result<Self> {
        same_dim(self.dim(), other.dim())?;
        Ok(Self(self.0.map(|z| z * x) + other.0.map(|z| z * y)))
    }

    pub fn mul(&self, other: &CMatrix) -> Result<Self> {
        same_dim(self.dim(), other.dim())?;
        Ok(Self(&self.0 * &other.0))
    }

    /// Copy into a larger cutoff, padding with zeros.
    pub fn embed(&self, dim: usize) -> Result<Self> {
        if dim < self.dim() {
            return Err(QstError::DimensionMismatch { expected: self.dim(), got: dim });
        }
        let mut m = DMatrix::from_element(dim, dim, ZERO);
        m.view_mut((0, 0), (self.dim(), self.dim())).copy_from(&self.0);
        Ok(Self(m))
    }
}

fn same_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(QstError::DimensionMismatch { expected, got })
    }
}

/// Normalized state vector in the Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket(DVector<C64>);

impl Ket {
    /// Accepts amplitudes that are already normalized.
    pub fn new(amps: DVector<C64>) -> Result<Self> {
        check_dim(amps.len())?;
        let norm2: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        if (norm2 - 1.0).abs() > Tolerances::default().ket_norm {
            return Err(QstError::InvalidState(format!("ket norm² = {norm2}")));
        }
        Ok(Self(amps))
    }

    /// Rescales arbitrary amplitudes to unit norm.
    pub fn normalized(amps: DVector<C64>) -> Result<Self> {
        check_dim(amps.len())?;
        let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 1e-150) || !norm.is_finite() {
            return Err(QstError::DegenerateState);
        }
        Ok(Self(amps / C64::from(norm)))
    }

    pub fn basis(n: usize, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        if n >= dim {
            return Err(QstError::OutOfSpace { index: n, cutoff: dim });
        }
        let mut v = DVector::from_element(dim, ZERO);
        v[n] = ONE;
        Ok(Self(v))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.0
    }

    pub fn overlap(&self, other: &Ket) -> Result<C64> {
        same_dim(self.dim(), other.dim())?;
        Ok(self.0.dotc(&other.0))
    }

    pub fn to_density(&self) -> DensityMatrix {
        let m = &self.0 * self.0.adjoint();
        DensityMatrix(symmetrize(m))
    }
}

fn symmetrize(m: DMatrix<C64>) -> DMatrix<C64> {
    let adj = m.adjoint();
    (m + adj) * C64::from(0.5)
}

/// Hermitian, positive semidefinite, unit-trace operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(DMatrix<C64>);

impl DensityMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        Self::with_tolerances(m, &Tolerances::default())
    }

    pub fn with_tolerances(m: DMatrix<C64>, tol: &Tolerances) -> Result<Self> {
        let m = CMatrix::new(m)?.into_inner();
        let defect = hermitian_defect(&m);
        if defect > tol.hermitian {
            return Err(QstError::InvalidState(format!("not Hermitian (defect {defect:e})")));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > tol.trace || tr.im.abs() > tol.trace {
            return Err(QstError::InvalidState(format!("trace = {tr}")));
        }
        let rho = Self(m);
        let min = rho.min_eigenvalue();
        if min < tol.min_eigenvalue {
            return Err(QstError::InvalidState(format!("minimum eigenvalue {min:e}")));
        }
        Ok(rho)
    }

    /// Hermitian-symmetrizes and divides by the trace. Positivity is checked.
    pub fn normalize(m: DMatrix<C64>) -> Result<Self> {
        let m = symmetrize(CMatrix::new(m)?.into_inner());
        let tr = m.trace().re;
        if !(tr > Tolerances::default().degenerate_trace) {
            return Err(QstError::InvalidState(format!("trace {tr:e} is not positive")));
        }
        Self::new(m / C64::from(tr))
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self(DMatrix::identity(dim, dim) / C64::from(dim as f64)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn purity(&self) -> f64 {
        // tr(ρ²) = Σ |ρ_ij|² for Hermitian ρ
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Photon-number distribution ⟨n|ρ|n⟩.
    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|n| self.0[(n, n)].re).collect()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = hermitian_eigen(&self.0).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        hermitian_defect(&self.0) <= tol
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        max_abs_diff(&self.0, &other.0)
    }

    /// Zero-pads into a larger Hilbert space.
    pub fn embed(&self, dim: usize) -> Result<Self> {
        if dim < self.dim() {
            return Err(QstError::DimensionMismatch { expected: self.dim(), got: dim });
        }
        let mut m = DMatrix::from_element(dim, dim, ZERO);
        m.view_mut((0, 0), (self.dim(), self.dim())).copy_from(&self.0);
        Ok(Self(m))
    }

    /// Convex combination `(1−s)·self + s·other`.
    pub fn mix(&self, other: &DensityMatrix, s: f64) -> Result<Self> {
        same_dim(self.dim(), other.dim())?;
        if !(0.0..=1.0).contains(&s) {
            return Err(QstError::InvalidArgument(format!("mixing weight {s} outside [0, 1]")));
        }
        Ok(Self(self.0.map(|z| z * (1.0 - s)) + other.0.map(|z| z * s)))
    }

    /// Weighted mixture of states; the weights are renormalized.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let first = parts.first().ok_or(QstError::DegenerateState)?;
        let dim = first.1.dim();
        let total: f64 = parts.iter().map(|(w, _)| *w).sum();
        if parts.iter().any(|(w, _)| *w < 0.0) || !(total > 0.0) {
            return Err(QstError::InvalidArgument("mixture weights must be nonnegative".into()));
        }
        let mut m = DMatrix::from_element(dim, dim, ZERO);
        for (w, rho) in parts {
            same_dim(dim, rho.dim())?;
            m += rho.0.map(|z| z * (*w / total));
        }
        Ok(Self(m))
    }
}

impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DensityJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = DensityJson::deserialize(d)?;
        raw.into_density().map_err(serde::de::Error::custom)
    }
}

/// Wire format `{"dim": N, "re": [[...]], "im": [[...]]}`, row-major.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DensityJson {
    dim: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl From<&DensityMatrix> for DensityJson {
    fn from(rho: &DensityMatrix) -> Self {
        let n = rho.dim();
        let m = rho.matrix();
        Self {
            dim: n,
            re: (0..n).map(|i| (0..n).map(|j| m[(i, j)].re).collect()).collect(),
            im: (0..n).map(|i| (0..n).map(|j| m[(i, j)].im).collect()).collect(),
        }
    }
}

impl DensityJson {
    fn into_density(self) -> Result<DensityMatrix> {
        let n = self.dim;
        let rows_ok = |rows: &Vec<Vec<f64>>| rows.len() == n && rows.iter().all(|r| r.len() == n);
        if !rows_ok(&self.re) || !rows_ok(&self.im) {
            return Err(QstError::InvalidArgument(format!("expected {n}x{n} re/im arrays")));
        }
        DensityMatrix::new(DMatrix::from_fn(n, n, |i, j| C64::new(self.re[i][j], self.im[i][j])))
    }
}

/// Lower-triangular factor `T` with a real diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor(DMatrix<C64>);

impl CholeskyFactor {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        let m = CMatrix::new(m)?.into_inner();
        let n = m.nrows();
        for i in 0..n {
            if m[(i, i)].im != 0.0 {
                return Err(QstError::InvalidArgument(format!("diagonal entry {i} is not real")));
            }
            for j in i + 1..n {
                if m[(i, j)] != ZERO {
                    return Err(QstError::InvalidArgument(format!(
                        "entry ({i},{j}) above the diagonal is nonzero"
                    )));
                }
            }
        }
        Ok(Self(m))
    }

    /// Projects an arbitrary matrix onto the factor form by zeroing the strict
    /// upper triangle and the imaginary part of the diagonal.
    pub fn project(m: &DMatrix<C64>) -> Result<Self> {
        let n = m.nrows();
        let t = DMatrix::from_fn(n, m.ncols(), |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Greater => m[(i, j)],
            std::cmp::Ordering::Equal => C64::from(m[(i, j)].re),
            std::cmp::Ordering::Less => ZERO,
        });
        Self::new(t)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }
}

/// Truncated annihilation operator with `⟨n−1|a|n⟩ = √n`.
pub fn annihilation(dim: usize) -> Result<CMatrix> {
    CMatrix::from_fn(dim, |i, j| if j == i + 1 { C64::from((j as f64).sqrt()) } else { ZERO })
}

pub fn creation(dim: usize) -> Result<CMatrix> {
    Ok(annihilation(dim)?.dagger())
}

/// Number operator `a†a`.
pub fn number(dim: usize) -> Result<CMatrix> {
    CMatrix::from_fn(dim, |i, j| if i == j { C64::from(i as f64) } else { ZERO })
}

/// Photon parity `(−1)^{a†a}`.
pub fn parity(dim: usize) -> Result<CMatrix> {
    CMatrix::from_fn(dim, |i, j| match (i == j, i % 2) {
        (true, 0) => ONE,
        (true, _) => -ONE,
        _ => ZERO,
    })
}

/// Displacement operator `D(α) = exp(αa† − α*a)` evaluated with a scaling
/// and squaring Padé approximant.
pub fn displacement(alpha: C64, dim: usize) -> Result<CMatrix> {
    check_dim(dim)?;
    if !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(QstError::InvalidArgument(format!("non-finite displacement {alpha}")));
    }
    if alpha == ZERO {
        return CMatrix::identity(dim);
    }
    let a = annihilation(dim)?.into_inner();
    let gen = a.adjoint() * alpha - a * alpha.conj();
    CMatrix::new(expm(&gen))
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
pub fn expm(a: &DMatrix<C64>) -> DMatrix<C64> {
    const THETA13: f64 = 5.371920351148152;
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if norm1 > THETA13 { (norm1 / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a / C64::from(2f64.powi(s));
    let b = |k: usize| C64::from(PADE13[k]);
    let id = DMatrix::<C64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9))
        + &a6 * b(7)
        + &a4 * b(5)
        + &a2 * b(3)
        + &id * b(1);
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8))
        + &a6 * b(6)
        + &a4 * b(4)
        + &a2 * b(2)
        + &id * b(0);
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).expect("Padé denominator is nonsingular for scaled input");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Displacement operators for one cutoff via a single spectral decomposition.
///
/// `αa† − α*a = |α| R(φ)(a† − a)R(φ)†` with `R(φ) = e^{iφa†a}`, and
/// `i(a† − a) = R(π/2)(a + a†)R(π/2)†`, so every `D(α)` follows from the
/// eigenvectors of the real tridiagonal matrix `a + a†`. This is the same
/// truncated operator that [`displacement`] computes, without a matrix
/// exponential per point.
#[derive(Debug, Clone)]
pub struct Displacer {
    dim: usize,
    vectors: DMatrix<f64>,
    values: DVector<f64>,
}

impl Displacer {
    pub fn new(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        let x = DMatrix::from_fn(dim, dim, |i, j| {
            if j == i + 1 {
                (j as f64).sqrt()
            } else if i == j + 1 {
                (i as f64).sqrt()
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(x);
        Ok(Self { dim, vectors: eig.eigenvectors, values: eig.eigenvalues })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn operator(&self, alpha: C64) -> DMatrix<C64> {
        let n = self.dim;
        if alpha == ZERO {
            return DMatrix::identity(n, n);
        }
        let r = alpha.norm();
        let phase = alpha.arg() + std::f64::consts::FRAC_PI_2;
        let v = &self.vectors;
        let mut vc = v.clone();
        let mut vs = v.clone();
        for k in 0..n {
            let (sin, cos) = (-r * self.values[k]).sin_cos();
            vc.column_mut(k).scale_mut(cos);
            vs.column_mut(k).scale_mut(sin);
        }
        let re = &vc * v.transpose();
        let im = &vs * v.transpose();
        DMatrix::from_fn(n, n, |m, j| {
            let rot = C64::from_polar(1.0, phase * (m as f64 - j as f64));
            C64::new(re[(m, j)], im[(m, j)]) * rot
        })
    }

    /// Top-left `rows × rows` block of `D(α)`.
    pub fn block(&self, alpha: C64, rows: usize) -> DMatrix<C64> {
        let rows = rows.min(self.dim);
        if alpha == ZERO {
            return DMatrix::identity(rows, rows);
        }
        let r = alpha.norm();
        let phase = alpha.arg() + std::f64::consts::FRAC_PI_2;
        let top = self.vectors.rows(0, rows);
        let mut vc = top.clone_owned();
        let mut vs = top.clone_owned();
        for k in 0..self.dim {
            let (sin, cos) = (-r * self.values[k]).sin_cos();
            vc.column_mut(k).scale_mut(cos);
            vs.column_mut(k).scale_mut(sin);
        }
        let re = &vc * top.transpose();
        let im = &vs * top.transpose();
        DMatrix::from_fn(rows, rows, |m, j| {
            let rot = C64::from_polar(1.0, phase * (m as f64 - j as f64));
            C64::new(re[(m, j)], im[(m, j)]) * rot
        })
    }

    /// Column `n` of `D(α)`, i.e. the displaced Fock state `D(α)|n⟩`.
    pub fn displaced_fock(&self, alpha: C64, n: usize) -> DVector<C64> {
        let dim = self.dim;
        if alpha == ZERO {
            let mut e = DVector::from_element(dim, ZERO);
            e[n] = ONE;
            return e;
        }
        let r = alpha.norm();
        let phase = alpha.arg() + std::f64::consts::FRAC_PI_2;
        let v = &self.vectors;
        let mut out = DVector::from_element(dim, ZERO);
        for k in 0..dim {
            let w = C64::from_polar(v[(n, k)], -r * self.values[k]);
            for m in 0..dim {
                out[m] += w * v[(m, k)];
            }
        }
        for m in 0..dim {
            out[m] *= C64::from_polar(1.0, phase * (m as f64 - n as f64));
        }
        out
    }
}

/// `ρ = T†T / tr(T†T)`.
pub fn density_from_cholesky(t: &CholeskyFactor) -> Result<DensityMatrix> {
    let m = t.matrix().adjoint() * t.matrix();
    let tr = m.trace().re;
    if !(tr > Tolerances::default().degenerate_trace) {
        return Err(QstError::DegenerateFactor(tr));
    }
    Ok(DensityMatrix(symmetrize(m / C64::from(tr))))
}

/// `Re tr(Oρ)` for a Hermitian observable `O`.
pub fn expectation(rho: &DensityMatrix, obs: &CMatrix) -> Result<f64> {
    same_dim(rho.dim(), obs.dim())?;
    let tol = Tolerances::default().observable_hermitian;
    let defect = hermitian_defect(obs.matrix());
    if defect > tol {
        return Err(QstError::InvalidObservable(format!("not Hermitian (defect {defect:e})")));
    }
    let v = trace_product(obs.matrix(), rho.matrix());
    debug_assert!(v.im.abs() < 1e-8, "imaginary expectation {v}");
    Ok(v.re)
}

/// `tr(AB)` without forming the product.
pub fn trace_product(a: &DMatrix<C64>, b: &DMatrix<C64>) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub(crate) fn hermitian_eigen(m: &DMatrix<C64>) -> SymmetricEigen<C64, nalgebra::Dyn> {
    SymmetricEigen::new(symmetrize(m.clone()))
}

/// Principal square root of a PSD matrix; negative eigenvalues are clamped at 0.
pub fn psd_sqrt(m: &DMatrix<C64>) -> DMatrix<C64> {
    let eig = hermitian_eigen(m);
    let u = &eig.eigenvectors;
    let mut scaled = u.clone();
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        scaled.column_mut(k).scale_mut(lambda.max(0.0).sqrt());
    }
    scaled * u.adjoint()
}

/// Eigenvalues below this are treated as exact zeros when reducing a state
/// to its support; for unit-trace matrices they are at the level of
/// eigensolver round-off.
const SUPPORT_CUTOFF: f64 = 1e-14;

/// Uhlmann root fidelity `tr√(√ρ σ √ρ)`.
///
/// The square root is taken on the support of whichever argument has lower
/// rank, so `√ρ σ √ρ` is formed as a small `r × r` matrix. For pure
/// arguments this reduces to `√⟨ψ|σ|ψ⟩` exactly instead of inheriting
/// `√ε` errors from round-off eigenvalues.
pub fn root_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dim(rho.dim(), sigma.dim())?;
    let tol = Tolerances::default().min_eigenvalue;
    let er = hermitian_eigen(rho.matrix());
    let es = hermitian_eigen(sigma.matrix());
    for (name, e) in [("first", &er), ("second", &es)] {
        let min = e.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min < tol {
            return Err(QstError::InvalidState(format!("{name} argument has eigenvalue {min:e}")));
        }
    }
    let support = |e: &SymmetricEigen<C64, nalgebra::Dyn>| -> Vec<usize> {
        (0..e.eigenvalues.len()).filter(|&k| e.eigenvalues[k] > SUPPORT_CUTOFF).collect()
    };
    let (sr, ss) = (support(&er), support(&es));
    let (outer, keep, other) = if sr.len() <= ss.len() { (&er, sr, sigma) } else { (&es, ss, rho) };
    if keep.is_empty() {
        return Ok(0.0);
    }
    // columns u_k √λ_k spanning the support
    let b = DMatrix::from_fn(outer.eigenvectors.nrows(), keep.len(), |i, c| {
        let k = keep[c];
        outer.eigenvectors[(i, k)] * outer.eigenvalues[k].sqrt()
    });
    let inner = b.adjoint() * other.matrix() * &b;
    let s: f64 = if inner.nrows() == 1 {
        inner[(0, 0)].re.max(0.0).sqrt()
    } else {
        hermitian_eigen(&inner).eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).sum()
    };
    Ok(s.clamp(0.0, 1.0 + 1e-9))
}

/// Fidelity `F = [tr√(√ρ σ √ρ)]²`; equals `|⟨ψ|φ⟩|²` for pure states.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    let f = root_fidelity(rho, sigma)?;
    Ok((f * f).clamp(0.0, 1.0 + 1e-9))
}

/// Trace distance `½‖ρ − σ‖₁`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dim(rho.dim(), sigma.dim())?;
    let diff = rho.matrix() - sigma.matrix();
    let eig = hermitian_eigen(&diff);
    Ok(0.5 * eig.eigenvalues.iter().map(|l| l.abs()).sum::<f64>())
}
