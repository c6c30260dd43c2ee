//! Constructors for the optical state families.
//!
//! All constructors return a [`DensityMatrix`] in a caller-chosen cutoff.
//! Pure families are renormalized after truncation, so amplitudes near the
//! cutoff are slightly rescaled relative to their infinite-space values.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{QstError, Result};
use crate::fock::{number, CholeskyFactor, DensityMatrix, Ket, C64};
use crate::{density_from_cholesky, expectation, rng_from_seed};

const ZERO: C64 = C64::new(0.0, 0.0);

fn check_cutoff(cutoff: usize) -> Result<()> {
    if cutoff < 2 {
        Err(QstError::InvalidDimension(cutoff))
    } else {
        Ok(())
    }
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut acc = 0.0;
    for k in 0..n {
        if k > 0 {
            acc += (k as f64).ln();
        }
        out.push(acc);
    }
    out
}

/// Untruncated coherent amplitudes `e^{−|α|²/2} αⁿ/√n!` for `n < cutoff`,
/// evaluated in log space so large `n` or `|α|` neither overflow nor
/// underflow prematurely.
pub fn coherent_amplitudes(alpha: C64, cutoff: usize) -> DVector<C64> {
    let lnf = ln_factorials(cutoff);
    let r = alpha.norm();
    let phi = alpha.arg();
    DVector::from_fn(cutoff, |n, _| {
        if r == 0.0 {
            return if n == 0 { C64::new(1.0, 0.0) } else { ZERO };
        }
        let ln_mag = -0.5 * r * r + n as f64 * r.ln() - 0.5 * lnf[n];
        C64::from_polar(ln_mag.exp(), n as f64 * phi)
    })
}

fn warn_if_truncated(rho: &DensityMatrix, what: &str) {
    let n = mean_photon(rho);
    if n > rho.dim() as f64 / 2.0 {
        log::warn!(
            "{what}: mean photon number {n:.3} exceeds half the cutoff {}; truncation artifacts likely",
            rho.dim()
        );
    }
}

/// `⟨a†a⟩`.
pub fn mean_photon(rho: &DensityMatrix) -> f64 {
    let n = number(rho.dim()).expect("density matrices have dim >= 2");
    expectation(rho, &n).expect("number operator matches dimension").max(0.0)
}

pub fn make_fock(n: usize, cutoff: usize) -> Result<DensityMatrix> {
    Ok(Ket::basis(n, cutoff)?.to_density())
}

pub fn make_coherent(alpha: C64, cutoff: usize) -> Result<DensityMatrix> {
    check_cutoff(cutoff)?;
    if !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(QstError::InvalidArgument(format!("non-finite amplitude {alpha}")));
    }
    if alpha.norm_sqr() > cutoff as f64 / 2.0 {
        log::warn!("coherent |α|² = {:.3} exceeds half the cutoff {cutoff}", alpha.norm_sqr());
    }
    Ok(Ket::normalized(coherent_amplitudes(alpha, cutoff))?.to_density())
}

/// Thermal state with the geometric photon distribution, truncated and
/// renormalized.
pub fn make_thermal(n_th: f64, cutoff: usize) -> Result<DensityMatrix> {
    check_cutoff(cutoff)?;
    if !(n_th >= 0.0) || !n_th.is_finite() {
        return Err(QstError::InvalidArgument(format!("thermal occupation {n_th} must be >= 0")));
    }
    let ratio = n_th / (n_th + 1.0);
    let p: Vec<f64> = (0..cutoff).map(|n| ratio.powi(n as i32) / (n_th + 1.0)).collect();
    let total: f64 = p.iter().sum();
    let m = DMatrix::from_fn(cutoff, cutoff, |i, j| if i == j { C64::from(p[i] / total) } else { ZERO });
    let rho = DensityMatrix::new(m)?;
    warn_if_truncated(&rho, "thermal");
    Ok(rho)
}

/// The numerically optimized rotation-symmetric code with mean photon
/// number 1.562, supported on `{|0⟩, |3⟩}` and `{|1⟩, |4⟩}`.
pub fn make_num_1562(mu: u8, cutoff: usize) -> Result<DensityMatrix> {
    if cutoff < 5 {
        return Err(QstError::OutOfSpace { index: 4, cutoff });
    }
    let s17 = 17f64.sqrt();
    let (lo, hi, a, b) = match mu {
        0 => (0, 3, 7.0 - s17, s17 - 1.0),
        1 => (1, 4, 9.0 - s17, s17 - 3.0),
        _ => return Err(QstError::InvalidArgument(format!("logical index {mu} not in {{0, 1}}"))),
    };
    let mut amps = DVector::from_element(cutoff, ZERO);
    amps[lo] = C64::from((a / 6.0).sqrt());
    amps[hi] = C64::from((b / 6.0).sqrt());
    Ok(Ket::normalized(amps)?.to_density())
}

fn binomial_coefficient(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Binomial code word with spacing `S + 1` and `N + 1` nonzero amplitudes.
pub fn make_binomial(s: usize, n: usize, mu: u8, cutoff: usize) -> Result<DensityMatrix> {
    check_cutoff(cutoff)?;
    if mu > 1 {
        return Err(QstError::InvalidArgument(format!("logical index {mu} not in {{0, 1}}")));
    }
    let top = (s + 1) * (n + 1);
    if top >= cutoff {
        return Err(QstError::OutOfSpace { index: top, cutoff });
    }
    let mut amps = DVector::from_element(cutoff, ZERO);
    let scale = 2f64.powf(-((n + 1) as f64) / 2.0);
    for m in 0..=n + 1 {
        let sign = if mu == 1 && m % 2 == 1 { -1.0 } else { 1.0 };
        amps[(s + 1) * m] = C64::from(sign * scale * binomial_coefficient(n + 1, m).sqrt());
    }
    Ok(Ket::normalized(amps)?.to_density())
}

/// Cat code word: the coherent state `|α⟩` projected onto Fock indices
/// congruent to `(S+1)μ` modulo `2(S+1)`.
pub fn make_cat(alpha: C64, s: usize, mu: u8, cutoff: usize) -> Result<DensityMatrix> {
    check_cutoff(cutoff)?;
    if mu > 1 {
        return Err(QstError::InvalidArgument(format!("logical index {mu} not in {{0, 1}}")));
    }
    if !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(QstError::InvalidArgument(format!("non-finite amplitude {alpha}")));
    }
    let period = 2 * (s + 1);
    let residue = (s + 1) * mu as usize;
    let mut amps = coherent_amplitudes(alpha, cutoff);
    for (k, a) in amps.iter_mut().enumerate() {
        if k % period != residue {
            *a = ZERO;
        }
    }
    let norm = amps.norm();
    if norm < 1e-12 {
        return Err(QstError::DegenerateProjection(norm));
    }
    let rho = Ket::normalized(amps)?.to_density();
    warn_if_truncated(&rho, "cat");
    Ok(rho)
}

/// Finite-energy grid state: coherent states on the square lattice of
/// spacing `√(π/2)` weighted by `e^{−Δ²|α|²}`, with lattice indices in
/// `[−extent, extent]`.
pub fn make_gkp_finite(delta: f64, mu: u8, extent: i32, cutoff: usize) -> Result<DensityMatrix> {
    check_cutoff(cutoff)?;
    if mu > 1 {
        return Err(QstError::InvalidArgument(format!("logical index {mu} not in {{0, 1}}")));
    }
    if !(delta > 0.0) || !delta.is_finite() || extent < 0 {
        return Err(QstError::InvalidArgument(format!("delta {delta}, extent {extent}")));
    }
    if !(0.2..=0.5).contains(&delta) {
        log::warn!("grid-state envelope {delta} outside the usual range [0.2, 0.5]");
    }
    let unit = FRAC_PI_2.sqrt();
    let mut amps = DVector::from_element(cutoff, ZERO);
    for n1 in -extent..=extent {
        for n2 in -extent..=extent {
            let alpha = C64::new(unit * (2 * n1 + mu as i32) as f64, unit * n2 as f64);
            let envelope = (-delta * delta * alpha.norm_sqr()).exp();
            if envelope == 0.0 {
                continue;
            }
            let weight = C64::from_polar(envelope, -alpha.re * alpha.im);
            amps += coherent_amplitudes(alpha, cutoff) * weight;
        }
    }
    let rho = Ket::normalized(amps)?.to_density();
    warn_if_truncated(&rho, "grid state");
    Ok(rho)
}

/// Random mixed state `T†T/tr` from a lower-triangular complex Gaussian
/// factor whose off-diagonal entries are kept with probability `density`.
pub fn make_random_density(density: f64, cutoff: usize, seed: u64) -> Result<DensityMatrix> {
    check_cutoff(cutoff)?;
    if !(density > 0.0 && density <= 1.0) {
        return Err(QstError::OutOfRange { field: "density", value: density, range: "(0, 1]" });
    }
    let mut rng = rng_from_seed(seed);
    let mut t = DMatrix::from_element(cutoff, cutoff, ZERO);
    for i in 0..cutoff {
        for j in 0..=i {
            if i == j {
                let x: f64 = rng.sample(StandardNormal);
                t[(i, i)] = C64::from(x);
            } else {
                let keep = rng.random::<f64>() < density;
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                if keep {
                    t[(i, j)] = C64::new(re, im) / 2f64.sqrt();
                }
            }
        }
    }
    density_from_cholesky(&CholeskyFactor::new(t)?)
}

/// Serializable description of one state, e.g.
/// `{"family": "cat", "alpha_re": 2.0, "alpha_im": 0.0, "S": 0, "mu": 0, "cutoff": 32}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpec {
    #[serde(flatten)]
    pub family: Family,
    pub cutoff: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    Fock {
        n: usize,
    },
    Coherent {
        alpha_re: f64,
        alpha_im: f64,
    },
    Thermal {
        n_th: f64,
    },
    Num {
        mu: u8,
    },
    Binomial {
        #[serde(rename = "S")]
        s: usize,
        #[serde(rename = "N")]
        n: usize,
        mu: u8,
    },
    Cat {
        alpha_re: f64,
        alpha_im: f64,
        #[serde(rename = "S")]
        s: usize,
        mu: u8,
    },
    Gkp {
        delta: f64,
        mu: u8,
        #[serde(default = "default_gkp_extent")]
        extent: i32,
    },
    Random {
        density: f64,
        seed: u64,
    },
}

pub const FAMILY_NAMES: [&str; 8] =
    ["fock", "coherent", "thermal", "num", "binomial", "cat", "gkp", "random"];

fn default_gkp_extent() -> i32 {
    20
}

fn range_check(field: &'static str, value: f64, lo: f64, hi: f64, range: &'static str) -> Result<()> {
    if value >= lo && value <= hi {
        Ok(())
    } else {
        Err(QstError::OutOfRange { field, value, range })
    }
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Fock { .. } => "fock",
            Family::Coherent { .. } => "coherent",
            Family::Thermal { .. } => "thermal",
            Family::Num { .. } => "num",
            Family::Binomial { .. } => "binomial",
            Family::Cat { .. } => "cat",
            Family::Gkp { .. } => "gkp",
            Family::Random { .. } => "random",
        }
    }
}

impl StateSpec {
    pub fn new(family: Family, cutoff: usize) -> Self {
        Self { family, cutoff }
    }

    /// Checks the documented parameter ranges of each family. The
    /// constructors themselves accept a wider domain.
    pub fn validate(&self) -> Result<()> {
        check_cutoff(self.cutoff)?;
        let mu_ok = |mu: u8| range_check("mu", mu as f64, 0.0, 1.0, "{0, 1}");
        match self.family {
            Family::Fock { n } => range_check("n", n as f64, 1.0, 16.0, "[1, 16]"),
            Family::Coherent { alpha_re, alpha_im } => {
                range_check("|alpha|", C64::new(alpha_re, alpha_im).norm(), 1e-6, 3.0, "[1e-6, 3]")
            }
            Family::Thermal { n_th } => range_check("n_th", n_th, 0.0, 16.0, "[0, 16]"),
            Family::Num { mu } => mu_ok(mu),
            Family::Binomial { s, n, mu } => {
                range_check("S", s as f64, 1.0, 10.0, "[1, 10]")?;
                // the support (S+1)(N+1) must also fit strictly below the cutoff
                let max_n = ((self.cutoff - 1) / (s + 1)).saturating_sub(1);
                range_check("N", n as f64, 2.0, max_n as f64, "[2, (cutoff-1)/(S+1) - 1]")?;
                mu_ok(mu)
            }
            Family::Cat { alpha_re, alpha_im, s, mu } => {
                range_check("|alpha|", C64::new(alpha_re, alpha_im).norm(), 1.0, 3.0, "[1, 3]")?;
                range_check("S", s as f64, 0.0, 2.0, "{0, 1, 2}")?;
                mu_ok(mu)
            }
            Family::Gkp { delta, mu, .. } => {
                range_check("delta", delta, 0.2, 0.5, "[0.2, 0.5]")?;
                mu_ok(mu)
            }
            Family::Random { density, .. } => {
                if density > 0.0 && density <= 1.0 {
                    Ok(())
                } else {
                    Err(QstError::OutOfRange { field: "density", value: density, range: "(0, 1]" })
                }
            }
        }
    }

    /// Builds the state without range validation.
    pub fn build(&self) -> Result<DensityMatrix> {
        let c = self.cutoff;
        match self.family {
            Family::Fock { n } => make_fock(n, c),
            Family::Coherent { alpha_re, alpha_im } => make_coherent(C64::new(alpha_re, alpha_im), c),
            Family::Thermal { n_th } => make_thermal(n_th, c),
            Family::Num { mu } => make_num_1562(mu, c),
            Family::Binomial { s, n, mu } => make_binomial(s, n, mu, c),
            Family::Cat { alpha_re, alpha_im, s, mu } => make_cat(C64::new(alpha_re, alpha_im), s, mu, c),
            Family::Gkp { delta, mu, extent } => make_gkp_finite(delta, mu, extent, c),
            Family::Random { density, seed } => make_random_density(density, c, seed),
        }
    }
}

/// Uniform draw of an in-range specification for one family.
pub fn sample_spec(family: &str, cutoff: usize, rng: &mut crate::Rng) -> Result<StateSpec> {
    let phase = |rng: &mut crate::Rng| rng.random_range(0.0..2.0 * PI);
    let mu = |rng: &mut crate::Rng| rng.random_range(0..=1u8);
    let f = match family {
        "fock" => Family::Fock { n: rng.random_range(1..=16usize.min(cutoff - 1)) },
        "coherent" => {
            let a = C64::from_polar(rng.random_range(1e-6..=3.0), phase(rng));
            Family::Coherent { alpha_re: a.re, alpha_im: a.im }
        }
        "thermal" => Family::Thermal { n_th: rng.random_range(0.0..=16.0) },
        "num" => Family::Num { mu: mu(rng) },
        "binomial" => {
            // largest S leaving room for N = 2 under (S+1)(N+1) < cutoff
            let max_s = ((cutoff - 1) / 3).saturating_sub(1).min(10);
            if max_s < 1 {
                return Err(QstError::InvalidDimension(cutoff));
            }
            let s = rng.random_range(1..=max_s);
            let max_n = (cutoff - 1) / (s + 1) - 1;
            Family::Binomial { s, n: rng.random_range(2..=max_n), mu: mu(rng) }
        }
        "cat" => {
            let a = C64::from_polar(rng.random_range(1.0..=3.0), phase(rng));
            Family::Cat { alpha_re: a.re, alpha_im: a.im, s: rng.random_range(0..=2usize), mu: mu(rng) }
        }
        "gkp" => Family::Gkp { delta: rng.random_range(0.2..=0.5), mu: mu(rng), extent: 20 },
        "random" => Family::Random { density: rng.random_range(f64::EPSILON..=1.0), seed: rng.random() },
        other => return Err(QstError::InvalidArgument(format!("unknown state family {other:?}"))),
    };
    Ok(StateSpec::new(f, cutoff))
}
