//! Result of one reconstruction run.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use qst_core::DensityMatrix;

use crate::monitor::ConvergenceMonitor;
use crate::problem::ReconstructionProblem;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The windowed stopping rule fired.
    Converged,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub method: String,
    pub iterations: usize,
    pub stop_reason: StopReason,
    /// Squared fidelity with the true state after every iteration; empty
    /// when no true state was supplied.
    pub fidelity: Vec<f64>,
    /// Named per-iteration loss traces.
    pub losses: BTreeMap<String, Vec<f64>>,
    /// Diagnostics such as probability flooring or discriminator saturation.
    pub flags: Vec<String>,
    pub state: DensityMatrix,
}

impl FitReport {
    pub(crate) fn start(method: &str, dim: usize) -> Result<Self> {
        Ok(Self {
            method: method.into(),
            iterations: 0,
            stop_reason: StopReason::MaxIters,
            fidelity: Vec::new(),
            losses: BTreeMap::new(),
            flags: Vec::new(),
            state: DensityMatrix::maximally_mixed(dim)?,
        })
    }

    pub fn final_fidelity(&self) -> Option<f64> {
        self.fidelity.last().copied()
    }

    /// Number of iterations after which the fidelity first reached
    /// `threshold`.
    pub fn iterations_to(&self, threshold: f64) -> Option<usize> {
        self.fidelity.iter().position(|f| *f >= threshold).map(|i| i + 1)
    }

    pub(crate) fn flag(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        if !self.flags.contains(&msg) {
            log::warn!("{}: {msg}", self.method);
            self.flags.push(msg);
        }
    }

    pub(crate) fn push_loss(&mut self, name: &str, value: f64) {
        self.losses.entry(name.to_string()).or_default().push(value);
    }

    /// Fidelity trace as CSV `iteration,fidelity`.
    pub fn fidelity_csv(&self) -> String {
        let mut out = String::from("iteration,fidelity\n");
        for (i, f) in self.fidelity.iter().enumerate() {
            out.push_str(&format!("{},{f:?}\n", i + 1));
        }
        out
    }
}

/// Records iterates and applies the stopping rule. The monitored trace is
/// the fidelity when the true state is known and the data residual
/// otherwise.
pub(crate) struct Progress<'a> {
    problem: &'a ReconstructionProblem,
    monitor: Option<ConvergenceMonitor>,
    trace: Vec<f64>,
}

impl<'a> Progress<'a> {
    pub(crate) fn new(problem: &'a ReconstructionProblem, monitor: Option<ConvergenceMonitor>) -> Self {
        Self { problem, monitor, trace: Vec::new() }
    }

    /// Stores `state` as the latest iterate; true when the fit should stop.
    pub(crate) fn record(&mut self, report: &mut FitReport, state: DensityMatrix) -> Result<bool> {
        let tracked = match self.problem.fidelity(&state)? {
            Some(f) => {
                report.fidelity.push(f);
                f
            }
            None => self.problem.residual(&state)?,
        };
        report.state = state;
        report.iterations += 1;
        self.trace.push(tracked);
        if self.monitor.is_some_and(|m| m.should_stop(&self.trace)) {
            report.stop_reason = StopReason::Converged;
            return Ok(true);
        }
        Ok(false)
    }
}
