//! Iterative maximum-likelihood reconstruction (the RρR algorithm).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use qst_core::{DensityMatrix, C64};

use crate::monitor::ConvergenceMonitor;
use crate::problem::ReconstructionProblem;
use crate::report::{FitReport, Progress};
use crate::{ReconstructError, Result};

/// Smallest predicted probability used in the likelihood ratio.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImleConfig {
    pub max_iters: usize,
    /// Stopping rule; `None` runs all `max_iters` iterations.
    pub monitor: Option<ConvergenceMonitor>,
}

impl Default for ImleConfig {
    fn default() -> Self {
        Self { max_iters: 2000, monitor: Some(ConvergenceMonitor::default()) }
    }
}

/// `[Re ρ | Im ρ]`, row-major.
pub(crate) fn flatten(rho: &DMatrix<C64>) -> Vec<f64> {
    let n = rho.nrows();
    let mut x = vec![0.0; 2 * n * n];
    for i in 0..n {
        for j in 0..n {
            x[i * n + j] = rho[(i, j)].re;
            x[n * n + i * n + j] = rho[(i, j)].im;
        }
    }
    x
}

fn unflatten(x: &[f64], n: usize) -> DMatrix<C64> {
    DMatrix::from_fn(n, n, |i, j| C64::new(x[i * n + j], x[n * n + i * n + j]))
}

/// `G⁻¹` for `G = Σ_i O_i`, with eigenvalues below `1e-12 · max` dropped.
/// The flag reports whether any were dropped.
pub fn inverse_resolution(rows: &[f64], n: usize) -> (DMatrix<C64>, bool) {
    let mut g = vec![0.0; 2 * n * n];
    for row in rows.chunks_exact(2 * n * n) {
        for (acc, o) in g.iter_mut().zip(row) {
            *acc += o;
        }
    }
    let eig = unflatten(&g, n).symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(*v));
    let mut dropped = false;
    let inv: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|v| {
            if *v > 1e-12 * max {
                1.0 / v
            } else {
                dropped = true;
                0.0
            }
        })
        .collect();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, inv.into_iter().map(C64::from)));
    (&eig.eigenvectors * d * eig.eigenvectors.adjoint(), dropped)
}

/// One update `ρ ← G⁻¹RρRG⁻¹ / tr(·)` with `R = Σ_i (d_i / p_i) O_i`,
/// `p_i = tr(O_i ρ)` and `g_inv = G⁻¹` from [`inverse_resolution`]. When
/// the operators resolve the identity this is the plain `RρR` step.
/// Returns the new state, the negative log-likelihood `−Σ d_i log p_i` at
/// the old state and whether any `p_i` was floored.
pub fn imle_step(
    rho: &DensityMatrix,
    rows: &[f64],
    g_inv: &DMatrix<C64>,
    data: &[f64],
) -> Result<(DensityMatrix, f64, bool)> {
    let n = rho.dim();
    let n2 = n * n;
    let x = flatten(rho.matrix());
    let mut r = vec![0.0; 2 * n2];
    let mut nll = 0.0;
    let mut floored = false;
    for (row, d) in rows.chunks_exact(2 * n2).zip(data) {
        let mut p: f64 = row.iter().zip(&x).map(|(a, b)| a * b).sum();
        if p < PROB_FLOOR {
            floored |= *d > 0.0;
            p = PROB_FLOOR;
        }
        nll -= d * p.ln();
        let w = d / p;
        for (acc, o) in r.iter_mut().zip(row) {
            *acc += w * o;
        }
    }
    let rm = g_inv * unflatten(&r, n);
    let next = DensityMatrix::normalize(&rm * rho.matrix() * rm.adjoint())?;
    Ok((next, nll, floored))
}

/// iMLE starting from the maximally mixed state.
pub fn imle(problem: &ReconstructionProblem, cfg: &ImleConfig) -> Result<FitReport> {
    let rows = problem.sensing_rows();
    let mut data = problem.data().to_vec();
    let mut report = FitReport::start("imle", problem.cutoff())?;
    if data.iter().any(|d| *d < 0.0) {
        report.flag("negative data clipped to 0");
        data.iter_mut().for_each(|d| *d = d.max(0.0));
    }
    let (g_inv, dropped) = inverse_resolution(&rows, problem.cutoff());
    if dropped {
        report.flag("operators do not span the state space; pseudo-inverse used");
    }
    let mut progress = Progress::new(problem, cfg.monitor);
    let mut rho = report.state.clone();
    for it in 0..cfg.max_iters {
        let (next, nll, floored) = imle_step(&rho, &rows, &g_inv, &data)
            .map_err(|e| ReconstructError::Numerical { iteration: it, msg: e.to_string() })?;
        if floored {
            report.flag("predicted probability floored at 1e-12");
        }
        report.push_loss("neg_log_likelihood", nll);
        rho = next.clone();
        if progress.record(&mut report, next)? {
            break;
        }
    }
    Ok(report)
}
