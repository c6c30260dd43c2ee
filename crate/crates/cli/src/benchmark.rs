//! Benchmark scenarios: many fits over seeds and settings, written as
//! fidelity-trace CSVs, a summary JSON and PGM heatmaps.
//!
//! Every fit is stored under `fits/` as soon as it finishes; a rerun into
//! the same directory reuses stored fits, so interrupted runs resume.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use qst_core::measure::{to_pgm, DataVector, PhaseGrid};
use qst_core::noise::{additive_gaussian, gaussian_convolve};
use qst_core::states::{make_binomial, make_cat, make_fock, make_thermal};
use qst_core::{DensityMatrix, C64};
use qst_reconstruct::{FitReport, KnownNoise, Loss, ReconstructionProblem};

use crate::config::RunConfig;
use crate::dataset::FileRecord;
use crate::error::{CliError, Result};
use crate::fit::{run_fit, FitOverrides, Method};
use crate::io::{read_json, to_json, traces_csv, write_bytes, write_json};
use crate::ops::{GridSpec, OpsSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    LossCompare,
    AdditiveNoise,
    ConvNoise,
    MixedRank,
    DataReduction,
}

impl Scenario {
    pub const ALL: [Scenario; 5] =
        [Scenario::LossCompare, Scenario::AdditiveNoise, Scenario::ConvNoise, Scenario::MixedRank, Scenario::DataReduction];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::LossCompare => "loss-compare",
            Scenario::AdditiveNoise => "additive-noise",
            Scenario::ConvNoise => "conv-noise",
            Scenario::MixedRank => "mixed-rank",
            Scenario::DataReduction => "data-reduction",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL.into_iter().find(|sc| sc.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
            CliError::config(format!("unknown scenario {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkConfig {
    /// Fit seeds `0..seeds` per method.
    pub seeds: usize,
    /// Every fit runs exactly this many iterations.
    pub max_iters: usize,
    pub cutoff: usize,
    /// Square grid points per axis, spanning `[-extent, extent]`.
    pub grid: usize,
    pub extent: f64,
    pub additive_sigma: f64,
    pub conv_n_th: f64,
    /// Grid used by the convolution scenario.
    pub conv_grid: usize,
    pub conv_lambda_l1: f64,
    /// Point counts of the data-reduction sweep.
    pub points: Vec<usize>,
    pub scatter_radius: f64,
    pub scatter_seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            seeds: 3,
            max_iters: 1000,
            cutoff: 16,
            grid: 16,
            extent: 5.0,
            additive_sigma: 0.05,
            conv_n_th: 5.0,
            conv_grid: 41,
            conv_lambda_l1: 10.0,
            points: vec![32, 64, 128, 256, 512, 1024],
            scatter_radius: 5.0,
            scatter_seed: 11,
        }
    }
}

/// `0.8 · cat(α=2, S=0, μ=0)` plus `0.2` spread evenly over the Fock
/// states `|0⟩ … |rank−2⟩`; `rank = 1` is the pure cat.
pub fn cat_fock_mixture(rank: usize, cutoff: usize) -> Result<DensityMatrix> {
    let cat = make_cat(C64::new(2.0, 0.0), 0, 0, cutoff)?;
    if rank <= 1 {
        return Ok(cat);
    }
    let focks = (0..rank - 1).map(|n| make_fock(n, cutoff)).collect::<qst_core::Result<Vec<_>>>()?;
    let mut parts = vec![(0.8, &cat)];
    parts.extend(focks.iter().map(|f| (0.2 / (rank - 1) as f64, f)));
    Ok(DensityMatrix::mixture(&parts)?)
}

/// One reconstruction problem shared by several methods.
struct Case {
    group: String,
    ops: OpsSpec,
    problem: ReconstructionProblem,
}

struct Job<'a> {
    case: &'a Case,
    method: Method,
    seed: u64,
    lambda_l1: Option<f64>,
}

fn noiseless(group: &str, truth: &DensityMatrix, ops: OpsSpec) -> Result<Case> {
    let problem = ReconstructionProblem::from_state(truth, ops.build()?)?;
    Ok(Case { group: group.into(), ops, problem })
}

/// The problems of a scenario; additive noise yields one case per seed.
fn cases(scenario: Scenario, cfg: &BenchmarkConfig) -> Result<Vec<Case>> {
    let c = cfg.cutoff;
    let square = OpsSpec::husimi(GridSpec::square(cfg.grid, cfg.extent), c);
    Ok(match scenario {
        Scenario::LossCompare => vec![noiseless("binomial", &make_binomial(2, 4, 0, c)?, square)?],
        Scenario::AdditiveNoise => {
            let truth = make_binomial(2, 4, 0, c)?;
            let set = square.build()?;
            let clean = qst_core::measure::normalize_unit_max(&DataVector::raw(set.apply(&truth)?))?;
            (0..cfg.seeds as u64)
                .map(|seed| {
                    let noisy = additive_gaussian(&clean, cfg.additive_sigma, 1000 + seed)?;
                    let problem = ReconstructionProblem::new(&noisy.values, set.clone())?
                        .with_known_noise(KnownNoise::Additive { sigma: cfg.additive_sigma })?
                        .with_truth(truth.clone())?;
                    Ok(Case { group: format!("noise{seed}"), ops: square, problem })
                })
                .collect::<Result<Vec<_>>>()?
        }
        Scenario::ConvNoise => {
            let ops = OpsSpec::husimi(GridSpec::square(cfg.conv_grid, cfg.extent), c);
            let set = ops.build()?;
            let truth = make_fock(1, c)?;
            let blurred = gaussian_convolve(&DataVector::raw(set.apply(&truth)?), set.grid(), cfg.conv_n_th)?;
            let problem = ReconstructionProblem::new(&blurred.values, set)?
                .with_known_noise(KnownNoise::Convolution { n_th: cfg.conv_n_th })?
                .with_truth(truth)?;
            vec![Case { group: "fock1".into(), ops, problem }]
        }
        Scenario::MixedRank => vec![
            noiseless("rank2", &cat_fock_mixture(2, c)?, square)?,
            noiseless("rank4", &cat_fock_mixture(4, c)?, square)?,
            noiseless("thermal", &make_thermal(1.0, c)?, square)?,
        ],
        Scenario::DataReduction => {
            let truth = cat_fock_mixture(2, c)?;
            cfg.points
                .iter()
                .map(|&k| {
                    let grid = GridSpec::Scatter { k, radius: cfg.scatter_radius, seed: cfg.scatter_seed };
                    noiseless(&format!("k{k}"), &truth, OpsSpec::husimi(grid, c))
                })
                .collect::<Result<Vec<_>>>()?
        }
    })
}

fn methods(scenario: Scenario) -> Vec<Method> {
    let chol = |l| Method::Cholesky(l);
    match scenario {
        Scenario::LossCompare => {
            vec![Method::Imle, chol(Loss::L1), chol(Loss::L2), chol(Loss::CrossEntropy), chol(Loss::Kl), Method::Cgan]
        }
        Scenario::AdditiveNoise => vec![chol(Loss::L1), chol(Loss::L2), chol(Loss::CrossEntropy), Method::Cgan],
        Scenario::ConvNoise => vec![chol(Loss::L2), Method::Cgan],
        Scenario::MixedRank | Scenario::DataReduction => vec![Method::Imle, Method::Cgan],
    }
}

fn file_stem(method: Method) -> String {
    method.to_string().replace(':', "-")
}

fn fit_path(job: &Job) -> String {
    format!("fits/{}/{}/seed{}.json", job.case.group, file_stem(job.method), job.seed)
}

/// Runs `job` unless a stored report for it already parses.
fn run_job(job: &Job, run: &RunConfig, cfg: &BenchmarkConfig, dir: &Path) -> Result<FitReport> {
    let path = dir.join(fit_path(job));
    if path.exists() {
        if let Ok(report) = read_json::<FitReport>(&path) {
            log::info!("reusing {}", path.display());
            return Ok(report);
        }
        log::warn!("{} is unreadable; refitting", path.display());
    }
    let seeded = RunConfig { seed: Some(job.seed), ..run.clone() };
    let o = FitOverrides { max_iters: Some(cfg.max_iters), lambda_l1: job.lambda_l1, full_budget: true };
    let report = run_fit(job.method, &job.case.problem, &seeded, o)?;
    // write then rename so an interrupted write never looks complete
    let tmp = path.with_extension("json.partial");
    write_json(&tmp, &report)?;
    std::fs::rename(&tmp, &path).map_err(|e| CliError::io(&path, e))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub group: String,
    pub method: Method,
    pub seeds: Vec<u64>,
    pub final_fidelity: Vec<f64>,
    pub final_mean: f64,
    pub final_std: f64,
    /// Per-iteration mean and standard deviation over seeds.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub traces_csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: Scenario,
    pub config: BenchmarkConfig,
    pub methods: Vec<MethodSummary>,
    /// Every output file except this summary and the file list itself.
    pub files: Vec<FileRecord>,
}

impl Summary {
    pub fn get(&self, group: &str, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.group == group && m.method == method)
    }
}

/// Mean and standard deviation (n − 1 denominator, 0 for one sample).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn write_heatmap(dir: &Path, rel: &str, grid: &PhaseGrid, values: &[f64], files: &mut Vec<FileRecord>) -> Result<()> {
    let (pgm, mapping) = to_pgm(grid, &DataVector::raw(values.to_vec()))?;
    files.push(FileRecord { path: format!("{rel}.pgm"), sha256: write_bytes(&dir.join(format!("{rel}.pgm")), &pgm)? });
    let json = to_json(&mapping);
    files.push(FileRecord {
        path: format!("{rel}.json"),
        sha256: write_bytes(&dir.join(format!("{rel}.json")), json.as_bytes())?,
    });
    Ok(())
}

/// Runs `scenario` into `dir`. Fits run in parallel on the rayon pool.
pub fn run_benchmark(scenario: Scenario, run: &RunConfig, dir: &Path) -> Result<Summary> {
    let cfg = run.benchmark();
    if cfg.seeds == 0 || cfg.max_iters == 0 {
        return Err(CliError::config("benchmark needs at least one seed and one iteration"));
    }
    let cases = cases(scenario, &cfg)?;
    let per_case_seeds: Vec<u64> = match scenario {
        // each noise realization is its own case with its own fit seed
        Scenario::AdditiveNoise => vec![],
        _ => (0..cfg.seeds as u64).collect(),
    };
    let lambda = (scenario == Scenario::ConvNoise).then_some(cfg.conv_lambda_l1);
    let mut jobs = Vec::new();
    for (i, case) in cases.iter().enumerate() {
        let seeds = if per_case_seeds.is_empty() { vec![i as u64] } else { per_case_seeds.clone() };
        for method in methods(scenario) {
            for &seed in &seeds {
                jobs.push(Job { case, method, seed, lambda_l1: lambda.filter(|_| method == Method::Cgan) });
            }
        }
    }
    for job in &jobs {
        if let Some(parent) = dir.join(fit_path(job)).parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
    }
    let reports: Vec<FitReport> = jobs.par_iter().map(|job| run_job(job, run, &cfg, dir)).collect::<Result<_>>()?;

    // additive noise averages over the noise realizations
    let mut groups: BTreeMap<(String, String), Vec<(u64, &FitReport)>> = BTreeMap::new();
    let mut order: Vec<(String, Method)> = Vec::new();
    for (job, report) in jobs.iter().zip(&reports) {
        let group = if scenario == Scenario::AdditiveNoise { "binomial".to_string() } else { job.case.group.clone() };
        let key = (group.clone(), job.method.to_string());
        if !groups.contains_key(&key) {
            order.push((group, job.method));
        }
        groups.entry(key).or_default().push((job.seed, report));
    }

    let mut files = Vec::new();
    let mut summaries = Vec::new();
    for (group, method) in order {
        let runs = &groups[&(group.clone(), method.to_string())];
        let len = runs.iter().map(|(_, r)| r.fidelity.len()).min().unwrap_or(0);
        let (mut mean, mut std) = (Vec::with_capacity(len), Vec::with_capacity(len));
        for i in 0..len {
            let (m, s) = mean_std(&runs.iter().map(|(_, r)| r.fidelity[i]).collect::<Vec<_>>());
            mean.push(m);
            std.push(s);
        }
        let finals: Vec<f64> = runs.iter().map(|(_, r)| r.final_fidelity().unwrap_or(f64::NAN)).collect();
        let (final_mean, final_std) = mean_std(&finals);
        let mut columns: Vec<(String, Vec<f64>)> =
            runs.iter().map(|(seed, r)| (format!("seed{seed}"), r.fidelity.clone())).collect();
        columns.push(("mean".into(), mean.clone()));
        columns.push(("std".into(), std.clone()));
        let rel = format!("traces/{group}/{}.csv", file_stem(method));
        files.push(FileRecord { path: rel.clone(), sha256: write_bytes(&dir.join(&rel), traces_csv(&columns).as_bytes())? });
        summaries.push(MethodSummary {
            group,
            method,
            seeds: runs.iter().map(|(s, _)| *s).collect(),
            final_fidelity: finals,
            final_mean,
            final_std,
            mean,
            std,
            traces_csv: rel,
        });
    }

    // heatmaps of the data and of each method's first reconstruction
    for case in &cases {
        if !matches!(case.ops.grid, GridSpec::Square { .. }) {
            continue;
        }
        let grid = case.problem.ops().grid();
        write_heatmap(dir, &format!("heatmaps/{}/data", case.group), grid, case.problem.data(), &mut files)?;
        for method in methods(scenario) {
            let first = jobs.iter().zip(&reports).find(|(j, _)| std::ptr::eq(j.case, case) && j.method == method);
            if let Some((_, report)) = first {
                let predicted = case.problem.predict(&report.state)?;
                write_heatmap(dir, &format!("heatmaps/{}/{}", case.group, file_stem(method)), grid, &predicted, &mut files)?;
            }
        }
    }

    let summary = Summary { scenario, config: cfg, methods: summaries, files };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_names_parse() {
        for s in Scenario::ALL {
            assert_eq!(s.name().parse::<Scenario>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.name()));
        }
        assert!("loss".parse::<Scenario>().is_err());
    }

    #[test]
    fn mean_std_of_stored_values() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[0.7]), (0.7, 0.0));
    }

    #[test]
    fn mixture_weights() {
        let rho = cat_fock_mixture(4, 12).unwrap();
        assert!((rho.trace() - 1.0).abs() < 1e-12);
        // the even cat has no |1⟩ component; fock(1) contributes 0.2/3
        assert!((rho.populations()[1] - 0.2 / 3.0).abs() < 1e-12);
        assert_eq!(cat_fock_mixture(1, 12).unwrap(), make_cat(C64::new(2.0, 0.0), 0, 0, 12).unwrap());
    }

    #[test]
    fn data_reduction_sweep_is_log_spaced() {
        assert_eq!(BenchmarkConfig::default().points, vec![32, 64, 128, 256, 512, 1024]);
        assert_eq!(methods(Scenario::LossCompare).len(), 6);
    }
}
