//! Windowed-average stopping rule.
//!
//! The monitored trace is averaged over consecutive windows; once the trace
//! is long enough, a fit stops when the last few window means all moved by
//! less than the tolerance from one window to the next.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceMonitor {
    pub window: usize,
    /// Number of consecutive window means that must agree.
    pub windows: usize,
    pub tolerance: f64,
    /// No stop before the trace has this many entries.
    pub min_len: usize,
}

impl Default for ConvergenceMonitor {
    fn default() -> Self {
        Self { window: 100, windows: 5, tolerance: 1e-5, min_len: 500 }
    }
}

impl ConvergenceMonitor {
    /// Decision after the trace has grown to its current length. Checked
    /// only at window boundaries.
    pub fn should_stop(&self, trace: &[f64]) -> bool {
        let len = trace.len();
        if self.window == 0 || len < self.min_len.max(self.window * self.windows) || !len.is_multiple_of(self.window) {
            return false;
        }
        let means: Vec<f64> = trace[len - self.window * self.windows..]
            .chunks_exact(self.window)
            .map(|w| w.iter().sum::<f64>() / self.window as f64)
            .collect();
        means.windows(2).all(|p| (p[1] - p[0]).abs() < self.tolerance)
    }

    /// First trace length at which [`Self::should_stop`] fires.
    pub fn stop_index(&self, trace: &[f64]) -> Option<usize> {
        (1..=trace.len()).find(|&l| self.should_stop(&trace[..l]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_trace_stops_at_minimum_length() {
        assert_eq!(ConvergenceMonitor::default().stop_index(&[0.7; 3000]), Some(500));
    }

    #[test]
    fn steadily_rising_trace_never_stops() {
        let trace: Vec<f64> = (0..5000).map(|i| i as f64 * 1e-3).collect();
        assert_eq!(ConvergenceMonitor::default().stop_index(&trace), None);
    }

    #[test]
    fn trace_flat_after_700() {
        let trace: Vec<f64> = (0..3000).map(|i| if i < 700 { i as f64 * 1e-3 } else { 0.7 }).collect();
        let stop = ConvergenceMonitor::default().stop_index(&trace).unwrap();
        assert!((1200..=1300).contains(&stop), "{stop}");
    }
}
