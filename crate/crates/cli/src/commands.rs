//! Argument definitions and the command implementations behind `qst`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use qst_classify::{build_classifier, evaluate, grad_cam, train_classifier};
use qst_core::measure::{normalize_unit_max, to_csv, to_pgm, DataVector, MeasurementKind};
use qst_core::noise::NoiseSpec;
use qst_core::states::StateSpec;
use qst_core::DensityMatrix;
use qst_nn::checkpoint;
use qst_reconstruct::{KnownNoise, ReconstructionProblem};

use crate::benchmark::{run_benchmark, Scenario};
use crate::config::RunConfig;
use crate::dataset::{write_dataset, Manifest};
use crate::error::{CliError, Result};
use crate::fit::{run_fit, FitOverrides, Method};
use crate::io::{read_bytes, read_data_csv, read_json, write_bytes, write_json};
use crate::ops::{GridSpec, OpsSpec};

#[derive(Debug, Parser)]
#[command(name = "qst", version, about = "Phase-space quantum state tomography: data, classification, reconstruction")]
pub struct Cli {
    /// Seed for every stochastic step (overrides the config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Hilbert-space cutoff (overrides the config file).
    #[arg(long, global = true)]
    pub cutoff: Option<usize>,
    /// JSON run configuration; unknown keys are rejected.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a labeled Husimi-image dataset with a manifest.
    Generate(GenerateArgs),
    /// Compute measurement statistics of a state.
    Measure(MeasureArgs),
    /// Apply noise to a state or to measurement data.
    Noise(NoiseArgs),
    /// Train, evaluate or explain the state classifier.
    #[command(subcommand)]
    Classify(ClassifyCommand),
    /// Reconstruct a density matrix from measurement data.
    Reconstruct(ReconstructArgs),
    /// Run a benchmark scenario.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated class names.
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<String>>,
    #[arg(long)]
    pub per_class: Option<usize>,
    /// Grid points per axis.
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Debug, Args)]
pub struct OpsArgs {
    /// Measurement setup as JSON; when absent it is built from the flags below.
    #[arg(long)]
    pub ops: Option<PathBuf>,
    /// Square grid points per axis.
    #[arg(long, default_value_t = 16)]
    pub grid: usize,
    /// The square grid spans [-extent, extent].
    #[arg(long, default_value_t = 5.0)]
    pub extent: f64,
    /// Use this many random points in a disk instead of a square grid.
    #[arg(long)]
    pub scatter: Option<usize>,
    #[arg(long, default_value_t = 5.0)]
    pub radius: f64,
    /// husimi, wigner or generalized_q:<n>.
    #[arg(long, default_value = "husimi")]
    pub kind: String,
    #[arg(long, default_value_t = qst_core::measure::DEFAULT_PAD_FACTOR)]
    pub pad: usize,
}

#[derive(Debug, Args)]
pub struct MeasureArgs {
    /// State as a StateSpec or density-matrix JSON file.
    #[arg(long)]
    pub state: PathBuf,
    #[command(flatten)]
    pub ops: OpsArgs,
    /// Data CSV (`re,im,value`).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the measurement setup here.
    #[arg(long)]
    pub ops_out: Option<PathBuf>,
    /// Scale the data to unit maximum.
    #[arg(long)]
    pub unit_max: bool,
    /// Also write a PGM heatmap (square grids only).
    #[arg(long)]
    pub pgm: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    /// One noise step or a list of steps as JSON.
    #[arg(long)]
    pub spec: PathBuf,
    /// Input state (state noise); writes a density-matrix JSON.
    #[arg(long, conflicts_with = "data")]
    pub state: Option<PathBuf>,
    /// Input data CSV (data noise); needs --ops for the grid.
    #[arg(long, requires = "ops")]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub ops: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum ClassifyCommand {
    /// Train on a generated dataset directory.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Checkpoint file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        /// Per-epoch loss and accuracy as JSON.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Accuracy, confusion matrix and ROC-AUC on a dataset directory.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Additive Gaussian noise added to every test image.
        #[arg(long)]
        noise_sigma: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grad-CAM heatmap of one sample.
    Gradcam {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        index: usize,
        /// Class to explain; defaults to the predicted class.
        #[arg(long)]
        class: Option<usize>,
        /// PGM heatmap.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// imle, cholesky:<l1|l2|ce|kl> or cgan.
    #[arg(long)]
    pub method: String,
    /// Data CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Measurement setup JSON.
    #[arg(long)]
    pub ops: PathBuf,
    #[arg(long)]
    pub lambda_l1: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// True state, for fidelity traces.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Known additive Gaussian noise on the unit-max data.
    #[arg(long, conflicts_with = "conv_n_th")]
    pub additive_sigma: Option<f64>,
    /// Known thermal-kernel convolution of the data.
    #[arg(long)]
    pub conv_n_th: Option<f64>,
    /// Reconstructed density matrix JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Fit report JSON with all traces.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// loss-compare, additive-noise, conv-noise, mixed-rank or data-reduction.
    #[arg(long)]
    pub scenario: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
}

/// A StateSpec, or a density matrix as written by `noise` and `reconstruct`.
pub fn load_state(path: &Path, cutoff: Option<usize>) -> Result<DensityMatrix> {
    let value: serde_json::Value = read_json(path)?;
    let rho = if value.get("family").is_some() {
        let mut spec: StateSpec =
            serde_json::from_value(value).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        if let Some(c) = cutoff {
            spec.cutoff = c;
        }
        spec.build()?
    } else {
        serde_json::from_value(value).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
    };
    if let Some(c) = cutoff.filter(|c| *c != rho.dim()) {
        return Err(CliError::config(format!("{} has dimension {}, --cutoff is {c}", path.display(), rho.dim())));
    }
    Ok(rho)
}

fn ops_spec(args: &OpsArgs, cutoff: usize) -> Result<OpsSpec> {
    if let Some(path) = &args.ops {
        let spec: OpsSpec = read_json(path)?;
        if spec.cutoff != cutoff {
            return Err(CliError::config(format!("{} has cutoff {}, the state has {cutoff}", path.display(), spec.cutoff)));
        }
        return Ok(spec);
    }
    let grid = match args.scatter {
        Some(k) => GridSpec::Scatter { k, radius: args.radius, seed: 0 },
        None => GridSpec::square(args.grid, args.extent),
    };
    Ok(OpsSpec { grid, kind: MeasurementKind::parse(&args.kind)?, cutoff, pad: args.pad })
}

fn noise_steps(path: &Path) -> Result<Vec<NoiseSpec>> {
    let value: serde_json::Value = read_json(path)?;
    let parsed = if value.is_array() { serde_json::from_value(value) } else { serde_json::from_value(value).map(|s| vec![s]) };
    parsed.map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn load_manifest(dir: &Path) -> Result<(Manifest, qst_classify::Dataset)> {
    let manifest = Manifest::load(dir)?;
    let data = manifest.load_dataset(dir)?;
    Ok((manifest, data))
}

pub fn run(cli: Cli) -> Result<()> {
    let base = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let cfg = base.with_overrides(cli.seed, cli.cutoff);
    match cli.command {
        Command::Generate(a) => {
            let mut d = cfg.dataset();
            if let Some(classes) = a.classes {
                d.classes = classes;
            }
            if let Some(n) = a.per_class {
                d.per_class = n;
            }
            if let Some(g) = a.grid {
                d.grid = g;
            }
            let manifest = write_dataset(&d, &a.out)?;
            println!("wrote {} samples ({:?} per class) to {}", manifest.entries.len(), manifest.class_counts(), a.out.display());
        }
        Command::Measure(a) => {
            let rho = load_state(&a.state, cfg.cutoff)?;
            let spec = ops_spec(&a.ops, rho.dim())?;
            let set = spec.build()?;
            let mut data = DataVector::raw(set.apply(&rho)?);
            if a.unit_max {
                data = normalize_unit_max(&data)?;
            }
            write_bytes(&a.out, to_csv(set.grid(), &data)?.as_bytes())?;
            if let Some(path) = &a.ops_out {
                write_json(path, &spec)?;
            }
            if let Some(path) = &a.pgm {
                let (pgm, mapping) = to_pgm(set.grid(), &data)?;
                write_bytes(path, &pgm)?;
                write_json(&path.with_extension("json"), &mapping)?;
            }
            println!("wrote {} values to {}", data.len(), a.out.display());
        }
        Command::Noise(a) => {
            let steps = noise_steps(&a.spec)?;
            match (&a.state, &a.data) {
                (Some(state), None) => {
                    let mut rho = load_state(state, cfg.cutoff)?;
                    for step in &steps {
                        rho = step.apply_to_state(&rho)?;
                    }
                    write_json(&a.out, &rho)?;
                }
                (None, Some(data)) => {
                    let spec: OpsSpec = read_json(a.ops.as_ref().expect("clap requires --ops with --data"))?;
                    let grid = spec.grid.build()?;
                    let mut values = DataVector::raw(read_data_csv(data)?);
                    for step in &steps {
                        values = step.apply_to_data(&values, &grid)?;
                    }
                    write_bytes(&a.out, to_csv(&grid, &values)?.as_bytes())?;
                }
                _ => return Err(CliError::config("noise needs exactly one of --state or --data")),
            }
            println!("applied {} noise step(s); wrote {}", steps.len(), a.out.display());
        }
        Command::Classify(c) => classify(c, &cfg)?,
        Command::Reconstruct(a) => {
            let method: Method = a.method.parse()?;
            let set = read_json::<OpsSpec>(&a.ops)?.build()?;
            let data = read_data_csv(&a.data)?;
            let mut problem = ReconstructionProblem::new(&data, set)?;
            if let Some(sigma) = a.additive_sigma {
                problem = problem.with_known_noise(KnownNoise::Additive { sigma })?;
            }
            if let Some(n_th) = a.conv_n_th {
                problem = problem.with_known_noise(KnownNoise::Convolution { n_th })?;
            }
            if let Some(path) = &a.truth {
                let truth = load_state(path, Some(problem.cutoff()))?;
                problem = problem.with_truth(truth)?;
            }
            let o = FitOverrides { max_iters: a.max_iters, lambda_l1: a.lambda_l1, full_budget: false };
            let report = run_fit(method, &problem, &cfg, o)?;
            write_json(&a.out, &report.state)?;
            if let Some(path) = &a.report {
                write_json(path, &report)?;
            }
            let fid = report.final_fidelity().map(|f| format!(", fidelity {f:.6}")).unwrap_or_default();
            println!(
                "{method}: {} iterations ({:?}){fid}, residual {:.3e}",
                report.iterations,
                report.stop_reason,
                problem.residual(&report.state)?
            );
        }
        Command::Benchmark(a) => {
            let scenario: Scenario = a.scenario.parse()?;
            let mut b = cfg.benchmark();
            if let Some(s) = a.seeds {
                b.seeds = s;
            }
            if let Some(n) = a.max_iters {
                b.max_iters = n;
            }
            let cfg = RunConfig { benchmark: Some(b), ..cfg };
            let summary = run_benchmark(scenario, &cfg, &a.out)?;
            for m in &summary.methods {
                println!("{:>10} {:<12} F = {:.4} ± {:.4}", m.group, m.method.to_string(), m.final_mean, m.final_std);
            }
        }
    }
    Ok(())
}

fn classify(c: ClassifyCommand, cfg: &RunConfig) -> Result<()> {
    match c {
        ClassifyCommand::Train { data, out, epochs, history } => {
            let (_, ds) = load_manifest(&data)?;
            let mut train = cfg.train();
            if let Some(e) = epochs {
                train.epochs = e;
            }
            let mut net =
                build_classifier(ds.height, ds.width, ds.n_classes(), &cfg.classifier.unwrap_or_default(), cfg.seed())?;
            let stats = train_classifier(&mut net, &ds, &train, |s| {
                log::info!("epoch {}: loss {:.4}, accuracy {:.4}", s.epoch, s.loss, s.accuracy)
            })?;
            write_bytes(&out, &checkpoint::to_bytes(&net))?;
            if let Some(path) = history {
                write_json(&path, &stats)?;
            }
            let last = stats.last().map(|s| s.accuracy).unwrap_or(0.0);
            println!("trained {} epochs; final training accuracy {last:.4}", stats.len());
        }
        ClassifyCommand::Eval { model, data, noise_sigma, out } => {
            let mut net = checkpoint::restore(&read_bytes(&model)?)?;
            let (_, mut ds) = load_manifest(&data)?;
            if let Some(sigma) = noise_sigma {
                ds = ds.with_additive_noise(sigma, cfg.seed())?;
            }
            let metrics = evaluate(&mut net, &ds)?;
            if let Some(path) = out {
                write_json(&path, &metrics)?;
            }
            println!("accuracy {:.4}, macro AUC {}", metrics.accuracy, metrics.macro_auc.map_or("n/a".into(), |a| format!("{a:.4}")));
        }
        ClassifyCommand::Gradcam { model, data, index, class, out } => {
            let mut net = checkpoint::restore(&read_bytes(&model)?)?;
            let (manifest, ds) = load_manifest(&data)?;
            let sample = ds
                .samples
                .get(index)
                .ok_or_else(|| CliError::config(format!("sample {index} out of range ({} samples)", ds.samples.len())))?;
            let target = match class {
                Some(c) => c,
                None => qst_classify::model::argmax(&qst_classify::predict(&mut net, &sample.image)?),
            };
            let cam = grad_cam(&mut net, &sample.image, target)?;
            let grid = manifest.entries[index].grid.build()?;
            let (pgm, mapping) = to_pgm(&grid, &DataVector::raw(cam.values.clone()))?;
            write_bytes(&out, &pgm)?;
            write_json(&out.with_extension("json"), &mapping)?;
            println!("Grad-CAM for class {target} of sample {index}{}", if cam.degenerate { " (degenerate map)" } else { "" });
        }
    }
    Ok(())
}
