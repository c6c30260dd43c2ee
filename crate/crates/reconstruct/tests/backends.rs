use std::sync::Arc;

use proptest::prelude::*;

use qst_core::measure::{build_operators, make_square_grid, DataVector, MeasurementKind, MeasurementSet};
use qst_core::noise::gaussian_convolve;
use qst_core::states::{make_coherent, make_fock, make_random_density};
use qst_core::{DensityMatrix, C64};
use qst_nn::penalty::mean_sigmoid;
use qst_nn::{LayerSpec, Mode, Tensor};
use qst_reconstruct::*;

fn husimi_ops(cutoff: usize, n: usize) -> MeasurementSet {
    let grid = make_square_grid(-5.0, 5.0, n, n).unwrap();
    build_operators(&grid, MeasurementKind::HusimiProjector, cutoff, 2).unwrap()
}

fn assert_physical(rho: &DensityMatrix) {
    assert!(DensityMatrix::new(rho.matrix().clone()).is_ok(), "unphysical iterate");
    assert!(rho.min_eigenvalue() > -1e-10);
    assert!((rho.trace() - 1.0).abs() < 1e-10);
}

#[test]
fn imle_recovers_fock_one() {
    let p = ReconstructionProblem::from_state(&make_fock(1, 8).unwrap(), husimi_ops(8, 16)).unwrap();
    let r = imle(&p, &ImleConfig { max_iters: 3000, monitor: None }).unwrap();
    let at = |k: usize| r.fidelity[k - 1];
    assert!(at(500) >= 0.99, "F after 500 = {}", at(500));
    assert!(at(3000) >= 0.999, "F after 3000 = {}", at(3000));
    assert!(r.flags.is_empty(), "{:?}", r.flags);
}

#[test]
fn imle_step_fixes_the_true_state() {
    let truth = make_random_density(0.6, 6, 3).unwrap();
    let p = ReconstructionProblem::from_state(&truth, husimi_ops(6, 12)).unwrap();
    let rows = p.sensing_rows();
    let (g_inv, dropped) = inverse_resolution(&rows, 6);
    assert!(!dropped);
    // unscaled data, so d_i = p_i exactly
    let data = p.ops().apply(&truth).unwrap();
    let (next, _, floored) = imle_step(&truth, &rows, &g_inv, &data).unwrap();
    assert!(!floored);
    assert!(next.max_abs_diff(&truth) < 1e-10, "{}", next.max_abs_diff(&truth));
}

#[test]
fn imle_flags_negative_data() {
    let ops = husimi_ops(4, 6);
    let mut data = ops.apply(&make_fock(0, 4).unwrap()).unwrap();
    data[0] = -0.1;
    let p = ReconstructionProblem::new(&data, ops).unwrap();
    let r = imle(&p, &ImleConfig { max_iters: 5, monitor: None }).unwrap();
    assert!(r.flags.iter().any(|f| f.contains("negative")));
    assert_physical(&r.state);
}

#[test]
fn cholesky_l2_recovers_vacuum() {
    let p = ReconstructionProblem::from_state(&make_fock(0, 8).unwrap(), husimi_ops(8, 16)).unwrap();
    let r = cholesky_fit(&p, &CholeskyConfig { max_iters: 1000, monitor: None, ..CholeskyConfig::new(Loss::L2) }).unwrap();
    let hit = r.iterations_to(0.999);
    assert!(hit.is_some(), "final F {}", r.final_fidelity().unwrap());
    assert_eq!(r.method, "cholesky:l2");
    assert_eq!(r.losses["l2"].len(), 1000);
}

#[test]
fn losses_at_the_truth() {
    let ops = husimi_ops(6, 10);
    let p = ReconstructionProblem::from_state(&make_coherent(C64::new(1.0, 0.5), 6).unwrap(), ops).unwrap();
    let pred = p.predict(p.truth().unwrap()).unwrap();
    let d = p.data();
    assert!(Loss::L1.eval(&pred, d).0 < 1e-12);
    assert!(Loss::L2.eval(&pred, d).0 < 1e-24);
    assert!(Loss::Kl.eval(&pred, d).0.abs() < 1e-12);
    let total: f64 = d.iter().sum();
    let entropy: f64 = d.iter().map(|v| v / total).filter(|q| *q > 0.0).map(|q| -q * q.ln()).sum();
    assert!((Loss::CrossEntropy.eval(&pred, d).0 - entropy).abs() < 1e-10);
}

#[test]
fn kl_is_positive_off_the_truth() {
    let d = [0.2, 0.5, 1.0, 0.3];
    let pred = [0.4, 0.5, 1.0, 0.1];
    assert!(Loss::Kl.eval(&pred, &d).0 > 1e-3);
    // same distribution at a different scale
    let scaled: Vec<f64> = d.iter().map(|v| 3.0 * v).collect();
    assert!(Loss::Kl.eval(&scaled, &d).0.abs() < 1e-12);
}

#[test]
fn loss_names_parse() {
    for loss in Loss::ALL {
        assert_eq!(loss.name().parse::<Loss>().unwrap(), loss);
        let json = serde_json::to_string(&loss).unwrap();
        assert_eq!(json, format!("\"{}\"", loss.name()));
        assert_eq!(serde_json::from_str::<Loss>(&json).unwrap(), loss);
    }
    assert_eq!("Cross_Entropy".parse::<Loss>().unwrap(), Loss::CrossEntropy);
    assert!("l3".parse::<Loss>().is_err());
}

#[test]
fn configs_reject_unknown_fields() {
    assert!(serde_json::from_str::<CganConfig>(r#"{"lambda_l1": 10}"#).is_ok());
    assert!(serde_json::from_str::<CganConfig>(r#"{"lambda": 10}"#).is_err());
    assert!(serde_json::from_str::<ImleConfig>(r#"{"max_iter": 10}"#).is_err());
    let bad = CganConfig { lambda_l1: -1.0, ..Default::default() };
    assert!(bad.validate().is_err());
}

#[test]
fn convolution_layer_inverts_known_blur() {
    let truth = make_fock(1, 8).unwrap();
    let grid = make_square_grid(-5.0, 5.0, 16, 16).unwrap();
    let ops = build_operators(&grid, MeasurementKind::HusimiProjector, 8, 2).unwrap();
    let blurred = gaussian_convolve(&DataVector::raw(ops.apply(&truth).unwrap()), &grid, 1.0).unwrap();
    let p = ReconstructionProblem::new(&blurred.values, ops)
        .unwrap()
        .with_known_noise(KnownNoise::Convolution { n_th: 1.0 })
        .unwrap()
        .with_truth(truth)
        .unwrap();
    let r = cholesky_fit(&p, &CholeskyConfig { max_iters: 2000, ..CholeskyConfig::new(Loss::L2) }).unwrap();
    assert!(r.final_fidelity().unwrap() >= 0.99, "F {}", r.final_fidelity().unwrap());
    assert!(p.residual(&r.state).unwrap() < 1e-3);
}

#[test]
fn generator_parameter_count_at_default_cutoff() {
    let tail = vec![
        LayerSpec::DensityMatrix,
        LayerSpec::Expectation { n_ops: 1024, dim: 32, rows: Some(Arc::new(vec![0.0; 1024 * 2 * 32 * 32])) },
        LayerSpec::SumScale { total: 1.0 },
    ];
    let net = qst_nn::Network::new(&[vec![1024]], generator_specs(32, tail).unwrap(), 0).unwrap();
    assert_eq!(net.param_count(), 625_920);
    let counts: Vec<usize> = net.layer_param_counts().into_iter().filter(|c| *c > 0).collect();
    assert_eq!(counts, vec![524_288, 2_048, 128, 65_536, 128, 32_768, 1_024]);
}

#[test]
fn generator_rejects_odd_cutoff() {
    let err = generator_specs(15, vec![]).unwrap_err().to_string();
    assert!(err.contains("even"), "{err}");
    assert!(generator_specs(0, vec![]).is_err());
}

#[test]
fn generator_output_matches_operator_count() {
    for n in [6, 10] {
        let p = ReconstructionProblem::from_state(&make_fock(1, 4).unwrap(), husimi_ops(4, n)).unwrap();
        let mut g = build_generator(&p, 1).unwrap();
        let out = g.forward(&[&Tensor::vector(p.data().to_vec())], Mode::Eval).unwrap();
        assert_eq!(out.shape(), &[n * n]);
        let total: f64 = out.data().iter().sum();
        let data_total: f64 = p.data().iter().sum();
        assert!((total - data_total).abs() < 1e-9 * data_total);
    }
}

#[test]
fn discriminator_shape_and_neutral_score() {
    let mut d = build_discriminator(16, 0).unwrap();
    assert_eq!(d.layer_param_counts()[3], 16_512);
    assert_eq!(d.output_shape(), &[64]);
    // zero the final dense layer
    let mut params = d.params();
    let last = 64 * 64 + 64;
    let n = params.len();
    params[n - last..].iter_mut().for_each(|v| *v = 0.0);
    d.set_params(&params).unwrap();
    let x = Tensor::vector((0..16).map(|i| i as f64 / 16.0).collect());
    let z = d.forward(&[&x, &x], Mode::Eval).unwrap();
    assert_eq!(mean_sigmoid(z.data()).0, 0.5);
}

#[test]
fn cgan_reports_traces() {
    let p = ReconstructionProblem::from_state(&make_fock(1, 4).unwrap(), husimi_ops(4, 8)).unwrap();
    let r = qst_cgan_fit(&p, &CganConfig { max_iters: 30, ..Default::default() }).unwrap();
    assert_eq!(r.iterations, 30);
    assert_eq!(r.stop_reason, StopReason::MaxIters);
    for name in ["generator", "discriminator", "l1", "penalty", "score_real", "score_fake"] {
        assert_eq!(r.losses[name].len(), 30, "{name}");
    }
    assert!(r.losses["score_fake"].iter().all(|s| *s > 0.0 && *s < 1.0));
    assert_physical(&r.state);
}

#[test]
fn cgan_is_deterministic() {
    let p = ReconstructionProblem::from_state(&make_fock(1, 4).unwrap(), husimi_ops(4, 6)).unwrap();
    let cfg = CganConfig { max_iters: 10, seed: 5, penalty_point: PenaltyPoint::Interpolated, ..Default::default() };
    let a = serde_json::to_string(&qst_cgan_fit(&p, &cfg).unwrap()).unwrap();
    let b = serde_json::to_string(&qst_cgan_fit(&p, &cfg).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn fit_without_truth_monitors_the_residual() {
    let ops = husimi_ops(4, 8);
    let truth = make_fock(0, 4).unwrap();
    let data = ops.apply(&truth).unwrap();
    let p = ReconstructionProblem::new(&data, ops).unwrap();
    let r = imle(&p, &ImleConfig::default()).unwrap();
    assert!(r.fidelity.is_empty());
    assert_eq!(r.stop_reason, StopReason::Converged);
    let res = p.residual(&r.state).unwrap();
    assert!(res < 1e-4, "residual {res} after {} iterations", r.iterations);
    assert!(qst_core::fidelity(&r.state, &truth).unwrap() > 0.99);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn every_backend_returns_physical_states(seed in 0u64..1000, iters in 1usize..12) {
        let truth = make_random_density(0.7, 4, seed).unwrap();
        let p = ReconstructionProblem::from_state(&truth, husimi_ops(4, 6)).unwrap();
        let r = imle(&p, &ImleConfig { max_iters: iters, monitor: None }).unwrap();
        assert_physical(&r.state);
        for loss in Loss::ALL {
            let cfg = CholeskyConfig { max_iters: iters, seed, ..CholeskyConfig::new(loss) };
            assert_physical(&cholesky_fit(&p, &cfg).unwrap().state);
        }
        let r = qst_cgan_fit(&p, &CganConfig { max_iters: iters, seed, ..Default::default() }).unwrap();
        assert_physical(&r.state);
        prop_assert_eq!(r.fidelity.len(), iters);
        prop_assert!(r.fidelity.iter().all(|f| (0.0..=1.0 + 1e-9).contains(f)));
    }
}
