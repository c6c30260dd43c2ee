//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run a subset by naming criteria: `cargo test -p qst-cli --test acceptance -- c1 c6`.
//! A criterion that fails only in parts listed as known gaps prints
//! `FAIL (known gap)` and does not fail the process; any other failure does.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::Rng;

use qst_classify::{build_classifier, evaluate, generate_dataset, train_classifier, ClassifierConfig, DatasetConfig, TrainConfig};
use qst_cli::benchmark::{cat_fock_mixture, run_benchmark, BenchmarkConfig, Scenario};
use qst_cli::config::RunConfig;
use qst_cli::dataset::write_dataset;
use qst_cli::fit::{run_fit, FitOverrides, Method};
use qst_cli::io::{sha256_hex, to_json};
use qst_cli::ops::{GridSpec, OpsSpec};
use qst_core::measure::{build_operators, husimi, make_square_grid, normalize_unit_max, wigner, DataVector, MeasurementKind, PhaseGrid};
use qst_core::noise::{additive_gaussian, gaussian_convolve, photon_loss};
use qst_core::states::{make_binomial, make_cat, make_coherent, make_fock, make_random_density, make_thermal, mean_photon};
use qst_core::{annihilation, rng_from_seed, root_fidelity, trace_distance, DensityMatrix, C64};
use qst_nn::{checkpoint, LayerSpec, Mode, Network, Padding, Tensor};
use qst_reconstruct::{
    cholesky_fit, imle, qst_cgan_fit, CganConfig, CholeskyConfig, ConvergenceMonitor, FitReport, ImleConfig, KnownNoise,
    Loss, ReconstructionProblem,
};

type Res<T> = Result<T, Box<dyn std::error::Error>>;

struct Part {
    label: String,
    pass: bool,
    detail: String,
    known_gap: bool,
}

fn part(label: impl Into<String>, pass: bool, detail: impl Into<String>) -> Part {
    Part { label: label.into(), pass, detail: detail.into(), known_gap: false }
}

fn gap(mut p: Part) -> Part {
    p.known_gap = true;
    p
}

enum Verdict {
    Pass,
    KnownGap,
    Fail,
}

fn verdict(parts: &[Part]) -> Verdict {
    if parts.iter().all(|p| p.pass) {
        Verdict::Pass
    } else if parts.iter().all(|p| p.pass || p.known_gap) {
        Verdict::KnownGap
    } else {
        Verdict::Fail
    }
}

fn husimi_problem(truth: &DensityMatrix, grid: PhaseGrid) -> Res<ReconstructionProblem> {
    let ops = build_operators(&grid, MeasurementKind::HusimiProjector, truth.dim(), 2)?;
    Ok(ReconstructionProblem::from_state(truth, ops)?)
}

fn square(n: usize, extent: f64) -> Res<PhaseGrid> {
    Ok(make_square_grid(-extent, extent, n, n)?)
}

fn hit(r: &FitReport, threshold: f64) -> String {
    match r.iterations_to(threshold) {
        Some(i) => format!("F≥{threshold} at {i}"),
        None => format!("never reached {threshold}"),
    }
}

fn c1() -> Res<Vec<Part>> {
    let n = 48;
    let a = root_fidelity(&make_cat(C64::from(4.0), 0, 0, n)?, &make_binomial(1, 16, 0, n)?)?;
    let b = root_fidelity(&make_cat(C64::from(3.0), 4, 0, n)?, &make_fock(10, n)?)?;
    Ok(vec![
        part("cat(4) vs binomial(1,16)", a > 0.99, format!("{a:.6} > 0.99")),
        part("cat(3,S=4) vs fock(10)", b > 0.996, format!("{b:.6} > 0.996")),
    ])
}

fn c2() -> Res<Vec<Part>> {
    let cat = make_cat(C64::from(2.0), 0, 0, 32)?;
    let f20 = root_fidelity(&cat, &photon_loss(&cat, 0.2)?)?;
    let f100 = root_fidelity(&cat, &photon_loss(&cat, 1.0)?)?;
    Ok(vec![
        part("20% loss", (f20 - 0.76).abs() <= 0.02, format!("{f20:.4} vs 0.76 ± 0.02")),
        part("100% loss", (f100 - 0.19).abs() <= 0.02, format!("{f100:.4} vs 0.19 ± 0.02")),
    ])
}

fn c3() -> Res<Vec<Part>> {
    let pi = std::f64::consts::PI;
    let origin = make_square_grid(-1.0, 1.0, 3, 3)?;
    let q = husimi(&make_fock(0, 16)?, &origin, 2)?.values[4];
    let w = wigner(&make_fock(1, 16)?, &origin, 2)?.values[4];

    let alpha = C64::new(1.2, -0.7);
    let grid = PhaseGrid::scatter(40, 3.0, 5)?;
    let values = husimi(&make_coherent(alpha, 40)?, &grid, 2)?.values;
    let worst = grid
        .points()
        .iter()
        .zip(&values)
        .map(|(b, v)| (v - (-(b - alpha).norm_sqr()).exp() / pi).abs())
        .fold(0.0, f64::max);
    Ok(vec![
        part("Q_vacuum(0)", (q - 1.0 / pi).abs() <= 1e-9, format!("error {:.2e}", (q - 1.0 / pi).abs())),
        part("W_fock1(0)", (w + 2.0 / pi).abs() <= 1e-8, format!("error {:.2e}", (w + 2.0 / pi).abs())),
        part("coherent Q", worst <= 1e-8, format!("max error {worst:.2e} on 40 points")),
    ])
}

fn random_tensor(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = rng_from_seed(seed);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Worst relative error between backpropagated and central-difference
/// gradients of a random linear probe, over parameters and inputs.
fn gradient_error(shapes: &[Vec<usize>], specs: Vec<LayerSpec>, mode: Mode) -> Res<f64> {
    const H: f64 = 1e-5;
    let mut net = Network::new(shapes, specs, 5)?;
    let inputs: Vec<Tensor> = shapes.iter().enumerate().map(|(i, s)| random_tensor(s, 10 + i as u64)).collect();
    let weights = random_tensor(net.output_shape(), 3).into_data();
    let eval = |net: &mut Network, xs: &[Tensor]| -> f64 {
        net.reseed_runtime(99);
        let y = net.forward(&xs.iter().collect::<Vec<_>>(), mode).unwrap();
        y.data().iter().zip(&weights).map(|(a, b)| a * b).sum()
    };
    let rel = |a: f64, b: f64| (a - b).abs() / (a.abs() + b.abs()).max(1e-6);

    net.zero_grad();
    net.reseed_runtime(99);
    let y = net.forward(&inputs.iter().collect::<Vec<_>>(), mode)?;
    let input_grads = net.backward(&Tensor::new(y.shape().to_vec(), weights.clone())?)?;
    let grads = net.grads();
    let params = net.params();
    let mut rng = rng_from_seed(17);
    let mut worst: f64 = 0.0;
    let picks = |len: usize, rng: &mut qst_core::Rng| -> Vec<usize> {
        if len <= 40 { (0..len).collect() } else { (0..40).map(|_| rng.random_range(0..len)).collect() }
    };
    for i in picks(params.len(), &mut rng) {
        let mut p = params.clone();
        p[i] += H;
        net.set_params(&p)?;
        let up = eval(&mut net, &inputs);
        p[i] -= 2.0 * H;
        net.set_params(&p)?;
        let down = eval(&mut net, &inputs);
        worst = worst.max(rel(grads[i], (up - down) / (2.0 * H)));
    }
    net.set_params(&params)?;
    for k in 0..inputs.len() {
        for i in picks(inputs[k].len(), &mut rng) {
            let mut xs = inputs.clone();
            xs[k].data_mut()[i] += H;
            let up = eval(&mut net, &xs);
            xs[k].data_mut()[i] -= 2.0 * H;
            let down = eval(&mut net, &xs);
            worst = worst.max(rel(input_grads[k].data()[i], (up - down) / (2.0 * H)));
        }
    }
    Ok(worst)
}

fn c4() -> Res<Vec<Part>> {
    let n = 4;
    let rows = build_operators(&PhaseGrid::scatter(16, 3.0, 4)?, MeasurementKind::HusimiProjector, n, 2)?.sensing_rows();
    let conv = |filters, kernel, stride, padding| LayerSpec::Conv2d { filters, kernel, stride, padding, bias: true };
    let convt = |filters, kernel, stride, padding| LayerSpec::Conv2dTranspose { filters, kernel, stride, padding, bias: true };
    type Case = (&'static str, Vec<Vec<usize>>, Vec<LayerSpec>, Mode);
    let cases: Vec<Case> = vec![
        ("dense", vec![vec![7]], vec![LayerSpec::Dense { units: 5, bias: true }], Mode::Eval),
        ("conv2d", vec![vec![2, 7, 7]], vec![conv(3, 3, 2, Padding::Same), conv(2, 3, 1, Padding::Valid)], Mode::Eval),
        ("conv2d_transpose", vec![vec![2, 4, 4]], vec![convt(3, 4, 2, Padding::Same), convt(2, 3, 2, Padding::Valid)], Mode::Eval),
        (
            "instance_norm + leaky_relu + softmax",
            vec![vec![2, 5, 5]],
            vec![
                LayerSpec::InstanceNorm,
                LayerSpec::LeakyRelu { slope: 0.3 },
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 6, bias: true },
                LayerSpec::Softmax,
            ],
            Mode::Eval,
        ),
        (
            "dropout + gaussian_noise + reshape",
            vec![vec![12]],
            vec![
                LayerSpec::Dropout { rate: 0.4 },
                LayerSpec::GaussianNoise { sigma: 0.1 },
                LayerSpec::Reshape { shape: vec![2, 2, 3] },
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 3, bias: false },
            ],
            Mode::Train,
        ),
        ("concat", vec![vec![4], vec![3]], vec![LayerSpec::Concat { parts: 2 }, LayerSpec::Dense { units: 4, bias: true }], Mode::Eval),
        (
            "density_matrix + expectation + unit_max",
            vec![vec![2, n, n]],
            vec![LayerSpec::DensityMatrix, LayerSpec::expectation(rows.clone(), n), LayerSpec::UnitMax],
            Mode::Eval,
        ),
        (
            "density_matrix + expectation + gaussian_conv + sum_scale",
            vec![vec![2, n, n]],
            vec![
                LayerSpec::DensityMatrix,
                LayerSpec::expectation(rows, n),
                LayerSpec::GaussianConv { n_th: 0.5, nx: 4, ny: 4, spacing_x: 0.7, spacing_y: 0.7 },
                LayerSpec::SumScale { total: 5.0 },
            ],
            Mode::Eval,
        ),
    ];
    let mut parts = Vec::new();
    for (label, shapes, specs, mode) in cases {
        let e = gradient_error(&shapes, specs, mode)?;
        parts.push(part(label, e < 1e-4, format!("relative error {e:.2e}")));
    }
    Ok(parts)
}

/// RK4 integration of the photon-loss master equation up to `t = −ln(1 − loss)`.
fn lindblad_decay(rho: &DensityMatrix, loss: f64, steps: usize) -> Res<DensityMatrix> {
    let a = annihilation(rho.dim())?.into_inner();
    let ad = a.adjoint();
    let n = &ad * &a;
    let rhs = |r: &nalgebra::DMatrix<C64>| &a * r * &ad - (&n * r + r * &n) * C64::from(0.5);
    let h = C64::from(-(1.0 - loss).ln() / steps as f64);
    let mut r = rho.matrix().clone();
    for _ in 0..steps {
        let k1 = rhs(&r);
        let k2 = rhs(&(&r + &k1 * (h * 0.5)));
        let k3 = rhs(&(&r + &k2 * (h * 0.5)));
        let k4 = rhs(&(&r + &k3 * h));
        r += (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * (h / 6.0);
    }
    Ok(DensityMatrix::normalize(r)?)
}

fn c5() -> Res<Vec<Part>> {
    let (mut worst_td, mut worst_n) = (0.0f64, 0.0f64);
    for seed in 0..20 {
        let rho = make_random_density(1.0, 8, 500 + seed)?;
        let loss = 0.1 + 0.04 * seed as f64;
        let kraus = photon_loss(&rho, loss)?;
        worst_td = worst_td.max(trace_distance(&kraus, &lindblad_decay(&rho, loss, 2000)?)?);
        worst_n = worst_n.max((mean_photon(&kraus) - (1.0 - loss) * mean_photon(&rho)).abs());
    }
    Ok(vec![
        part("Kraus vs master equation", worst_td < 1e-6, format!("max trace distance {worst_td:.2e} over 20 states")),
        part("mean photon scaling", worst_n <= 1e-9, format!("max error {worst_n:.2e}")),
    ])
}

fn c6() -> Res<Vec<Part>> {
    let p = husimi_problem(&make_binomial(2, 4, 0, 16)?, square(16, 5.0)?)?;
    let mut parts = Vec::new();
    let im = imle(&p, &ImleConfig { max_iters: 10_000, monitor: None })?;
    let im_hit = im.iterations_to(0.99);
    parts.push(part("imle", im_hit.is_some(), hit(&im, 0.99)));
    for loss in [Loss::L1, Loss::L2, Loss::CrossEntropy, Loss::Kl] {
        let r = cholesky_fit(&p, &CholeskyConfig { max_iters: 15_000, monitor: None, ..CholeskyConfig::new(loss) })?;
        parts.push(part(format!("cholesky:{}", loss.name()), r.iterations_to(0.99).is_some(), hit(&r, 0.99)));
    }
    let cg = qst_cgan_fit(&p, &CganConfig { max_iters: 1000, monitor: None, ..Default::default() })?;
    let cg_hit = cg.iterations_to(0.99);
    parts.push(part("cgan within 1000", cg_hit.is_some(), hit(&cg, 0.99)));
    let faster = matches!((cg_hit, im_hit), (Some(c), Some(i)) if c < i);
    parts.push(part("cgan before imle", faster, format!("{cg_hit:?} < {im_hit:?}")));
    Ok(parts)
}

fn c7(dir: &Path) -> Res<Vec<Part>> {
    let b = BenchmarkConfig { seeds: 10, max_iters: 3000, ..Default::default() };
    let run = RunConfig { benchmark: Some(b), ..Default::default() };
    let s = run_benchmark(Scenario::AdditiveNoise, &run, &dir.join("additive"))?;
    let mean = |m: Method| s.get("binomial", m).map(|m| m.final_mean).unwrap_or(f64::NAN);
    let (l1, l2, ce, cg) =
        (mean(Method::Cholesky(Loss::L1)), mean(Method::Cholesky(Loss::L2)), mean(Method::Cholesky(Loss::CrossEntropy)), mean(Method::Cgan));
    let best = l1.max(l2).max(ce);
    let means = format!("L1 {l1:.3}, L2 {l2:.3}, CE {ce:.3}, CGAN {cg:.3} over 10 noise seeds");
    Ok(vec![
        part("L2 > CE", l2 > ce, means),
        part("CGAN ≥ 0.9·best", cg >= 0.9 * best, format!("{cg:.3} ≥ {:.3}", 0.9 * best)),
    ])
}

fn c8() -> Res<Vec<Part>> {
    let n_th = 5.0;
    let truth = make_fock(1, 8)?;
    let grid = square(41, 5.0)?;
    let ops = build_operators(&grid, MeasurementKind::HusimiProjector, 8, 2)?;
    let blurred = gaussian_convolve(&DataVector::raw(ops.apply(&truth)?), &grid, n_th)?;
    let p = ReconstructionProblem::new(&blurred.values, ops)?
        .with_known_noise(KnownNoise::Convolution { n_th })?
        .with_truth(truth)?;
    let cfg = CganConfig { lambda_l1: 10.0, max_iters: 5000, monitor: None, ..Default::default() };
    let r = qst_cgan_fit(&p, &cfg)?;
    let f = r.final_fidelity().unwrap_or(0.0);

    // non-uniqueness: a binomial state whose blurred statistics are matched
    // by a different state
    let truth = make_binomial(2, 4, 0, 16)?;
    let ops = build_operators(&grid, MeasurementKind::HusimiProjector, 16, 2)?;
    let blurred = gaussian_convolve(&DataVector::raw(ops.apply(&truth)?), &grid, n_th)?;
    let p = ReconstructionProblem::new(&blurred.values, ops)?
        .with_known_noise(KnownNoise::Convolution { n_th })?
        .with_truth(truth)?;
    let r2 = qst_cgan_fit(&p, &CganConfig { seed: 1, max_iters: 2000, ..cfg })?;
    let f2 = r2.final_fidelity().unwrap_or(1.0);
    let (l2, _) = Loss::L2.eval(&p.predict(&r2.state)?, p.data());
    Ok(vec![
        part("fock(1) recovered", f >= 0.995, format!("F = {f:.5}")),
        part("binomial ambiguity", l2 < 1e-3 && f2 < 0.9, format!("L2 {l2:.2e} < 1e-3 with F = {f2:.3} < 0.9")),
    ])
}

fn c9() -> Res<Vec<Part>> {
    let grid = square(16, 5.0)?;
    let cgan = CganConfig { max_iters: 4000, monitor: Some(ConvergenceMonitor::default()), ..Default::default() };
    let mut parts = Vec::new();
    for (label, truth) in [("rank-2", cat_fock_mixture(2, 16)?), ("rank-4", cat_fock_mixture(4, 16)?)] {
        let r = qst_cgan_fit(&husimi_problem(&truth, grid.clone())?, &cgan)?;
        let f = r.final_fidelity().unwrap_or(0.0);
        parts.push(part(format!("{label} cgan"), f >= 0.99, format!("F = {f:.4} after {} iterations", r.iterations)));
    }
    let p = husimi_problem(&make_thermal(1.0, 16)?, grid)?;
    let r = imle(&p, &ImleConfig { max_iters: 4000, ..Default::default() })?;
    let f = r.final_fidelity().unwrap_or(0.0);
    parts.push(part("thermal imle", f >= 0.99, format!("F = {f:.4} after {} iterations", r.iterations)));
    let r = qst_cgan_fit(&p, &cgan)?;
    let f = r.final_fidelity().unwrap_or(0.0);
    parts.push(gap(part("thermal cgan", f >= 0.99, format!("F = {f:.4} after {} iterations", r.iterations))));
    Ok(parts)
}

fn c10(dir: &Path) -> Res<Vec<Part>> {
    let truth = cat_fock_mixture(2, 16)?;
    let p = husimi_problem(&truth, PhaseGrid::scatter(128, 5.0, 11)?)?;
    let im = imle(&p, &ImleConfig { max_iters: 3000, monitor: None })?;
    let cg = qst_cgan_fit(&p, &CganConfig { max_iters: 3000, monitor: None, ..Default::default() })?;
    let (fi, fc) = (im.final_fidelity().unwrap_or(1.0), cg.final_fidelity().unwrap_or(0.0));

    let b = BenchmarkConfig { seeds: 1, max_iters: 200, ..Default::default() };
    let run = RunConfig { benchmark: Some(b), ..Default::default() };
    let s = run_benchmark(Scenario::DataReduction, &run, &dir.join("reduction"))?;
    let groups: Vec<String> = [32, 64, 128, 256, 512, 1024].iter().map(|k| format!("k{k}")).collect();
    let complete = groups.iter().all(|g| s.get(g, Method::Imle).is_some() && s.get(g, Method::Cgan).is_some());
    Ok(vec![
        part("cgan on 128 points", fc >= 0.95, format!("F = {fc:.4}")),
        part("imle lower", fi < fc, format!("imle F = {fi:.4}")),
        part("sweep report", complete, format!("{} method summaries for 32…1024 points", s.methods.len())),
    ])
}

fn c11() -> Res<Vec<Part>> {
    let classes: Vec<String> = ["fock", "coherent", "thermal"].iter().map(|s| s.to_string()).collect();
    let base = DatasetConfig { classes, grid: 16, ..Default::default() };
    let train = generate_dataset(&DatasetConfig { per_class: 600, seed: 0, ..base.clone() })?;
    let test = generate_dataset(&DatasetConfig { per_class: 150, seed: 1, ..base })?;
    let start = Instant::now();
    let mut net = build_classifier(16, 16, 3, &ClassifierConfig::default(), 0)?;
    train_classifier(&mut net, &train, &TrainConfig { epochs: 30, ..Default::default() }, |_| {})?;
    let secs = start.elapsed().as_secs_f64();
    let clean = evaluate(&mut net, &test)?;
    let low = evaluate(&mut net, &test.with_additive_noise(0.05, 7)?)?;
    let high = evaluate(&mut net, &test.with_additive_noise(1.0, 7)?)?;
    let auc = clean.macro_auc.unwrap_or(0.0);
    Ok(vec![
        part("accuracy", clean.accuracy >= 0.9, format!("{:.1}%", 100.0 * clean.accuracy)),
        part("macro AUC", auc >= 0.95, format!("{auc:.4}")),
        part("training time", secs <= 900.0, format!("{secs:.0} s")),
        part(
            "σ=0.05 within 3 points",
            clean.accuracy - low.accuracy <= 0.03,
            format!("{:.1}%", 100.0 * low.accuracy),
        ),
        part("σ=1.0 above chance", high.accuracy > 1.0 / 3.0, format!("{:.1}%", 100.0 * high.accuracy)),
    ])
}

fn tree_digest(dir: &Path) -> Res<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(dir)?.to_string_lossy().into_owned(), sha256_hex(&fs::read(&path)?)));
            }
        }
    }
    out.sort();
    Ok(out)
}

fn c12(dir: &Path) -> Res<Vec<Part>> {
    let cfg = DatasetConfig {
        classes: ["fock", "cat", "gkp"].iter().map(|s| s.to_string()).collect(),
        per_class: 4,
        cutoff: 16,
        seed: 3,
        ..Default::default()
    };
    let (a, b) = (dir.join("gen-a"), dir.join("gen-b"));
    write_dataset(&cfg, &a)?;
    write_dataset(&cfg, &b)?;
    let same_data = tree_digest(&a)? == tree_digest(&b)?;

    let data = generate_dataset(&cfg)?;
    let ckpt = || -> Res<Vec<u8>> {
        let mut net = build_classifier(16, 16, 3, &ClassifierConfig::default(), 4)?;
        train_classifier(&mut net, &data, &TrainConfig { epochs: 2, seed: 4, ..Default::default() }, |_| {})?;
        Ok(checkpoint::to_bytes(&net))
    };
    let same_ckpt = ckpt()? == ckpt()?;

    let p = husimi_problem(&make_fock(1, 6)?, square(8, 3.0)?)?;
    let run = RunConfig { seed: Some(9), ..Default::default() };
    let report = |m: Method| -> Res<String> {
        Ok(to_json(&run_fit(m, &p, &run, FitOverrides { max_iters: Some(40), ..Default::default() })?))
    };
    let mut same_report = true;
    for m in [Method::Imle, Method::Cholesky(Loss::Kl), Method::Cgan] {
        same_report &= report(m)? == report(m)?;
    }

    let b = BenchmarkConfig { seeds: 2, max_iters: 30, cutoff: 6, grid: 8, extent: 3.0, ..Default::default() };
    let run = RunConfig { benchmark: Some(b), ..Default::default() };
    let (x, y) = (dir.join("bench-a"), dir.join("bench-b"));
    run_benchmark(Scenario::MixedRank, &run, &x)?;
    run_benchmark(Scenario::MixedRank, &run, &y)?;
    let same_bench = tree_digest(&x)? == tree_digest(&y)?;

    let ops = OpsSpec::husimi(GridSpec::square(8, 3.0), 6);
    let clean = normalize_unit_max(&DataVector::raw(ops.build()?.apply(&make_fock(1, 6)?)?))?;
    let same_noise = additive_gaussian(&clean, 0.05, 2)? == additive_gaussian(&clean, 0.05, 2)?;

    Ok(vec![
        part("dataset manifest and samples", same_data, ""),
        part("classifier checkpoint", same_ckpt, ""),
        part("fit reports", same_report, "imle, cholesky:kl, cgan"),
        part("benchmark outputs", same_bench, ""),
        part("seeded data noise", same_noise, ""),
    ])
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let tmp = tempfile::tempdir().expect("temporary directory");
    let dir = tmp.path();
    type Criterion<'a> = (&'static str, &'static str, Box<dyn Fn() -> Res<Vec<Part>> + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("c1", "state overlaps", Box::new(c1)),
        ("c2", "photon-loss fidelities", Box::new(c2)),
        ("c3", "analytic phase-space values", Box::new(c3)),
        ("c4", "gradient integrity", Box::new(c4)),
        ("c5", "loss channel vs master equation", Box::new(c5)),
        ("c6", "noiseless reconstruction, all backends", Box::new(c6)),
        ("c7", "additive-noise ordering", Box::new(|| c7(dir))),
        ("c8", "known-convolution recovery", Box::new(c8)),
        ("c9", "mixed-state reconstruction", Box::new(c9)),
        ("c10", "data reduction", Box::new(|| c10(dir))),
        ("c11", "classifier", Box::new(c11)),
        ("c12", "determinism", Box::new(|| c12(dir))),
    ];

    let (mut passed, mut failed, mut known) = (0, 0, 0);
    for (id, name, check) in &criteria {
        if !filters.is_empty() && !filters.iter().any(|f| f == id) {
            continue;
        }
        let start = Instant::now();
        let parts = check().unwrap_or_else(|e| vec![part("error", false, e.to_string())]);
        let secs = start.elapsed().as_secs_f64();
        let status = match verdict(&parts) {
            Verdict::Pass => {
                passed += 1;
                "PASS".to_string()
            }
            Verdict::KnownGap => {
                known += 1;
                let which: Vec<&str> = parts.iter().filter(|p| !p.pass).map(|p| p.label.as_str()).collect();
                format!("FAIL (known gap: {})", which.join(", "))
            }
            Verdict::Fail => {
                failed += 1;
                "FAIL".to_string()
            }
        };
        println!("{id:>3} {status} {name} [{secs:.0} s]");
        for p in &parts {
            let mark = if p.pass { "ok" } else if p.known_gap { "gap" } else { "FAIL" };
            let detail = if p.detail.is_empty() { String::new() } else { format!(": {}", p.detail) };
            println!("      {mark:<4} {}{detail}", p.label);
        }
    }
    println!("acceptance: {passed} passed, {failed} failed, {known} known gap(s)");
    if failed > 0 {
        std::process::exit(1);
    }
}
