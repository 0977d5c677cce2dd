//! Cross-checks against independent references: nalgebra least squares,
//! brute-force NMSE properties, pump symmetry and reproducibility.

use mrr_reservoir::cavity::{simulate, CavityParams, FeedbackConfig};
use mrr_reservoir::experiment::{channels, run_experiment, ExperimentConfig, Mode, SharedInputs};
use mrr_reservoir::readout::{nmse, predict, train_ridge};
use mrr_reservoir::signal::{build_drive, photodetect_sum, StateMatrix};
use mrr_reservoir::validation::narma10_reference;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random_problem(rng: &mut StdRng, rows: usize, cols: usize) -> (StateMatrix, Vec<f64>) {
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let y = (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect();
    (
        StateMatrix {
            rows,
            cols,
            data,
            washout: 0,
            train_boundary: None,
        },
        y,
    )
}

/// Ridge weights from an SVD of the bias-augmented design matrix:
/// `w = V diag(s / (s² + λ)) Uᵀ y`.
fn svd_ridge(x: &StateMatrix, y: &[f64], lambda: f64) -> Vec<f64> {
    let n = x.cols + 1;
    let a = DMatrix::from_fn(x.rows, n, |r, c| if c < x.cols { x.get(r, c) } else { 1.0 });
    let svd = a.svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let uty = u.transpose() * DVector::from_column_slice(y);
    let scaled = DVector::from_iterator(
        svd.singular_values.len(),
        svd.singular_values
            .iter()
            .zip(uty.iter())
            .map(|(s, v)| s * v / (s * s + lambda)),
    );
    (vt.transpose() * scaled).iter().copied().collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    d / b.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[test]
fn ridge_matches_svd_on_random_instances() {
    let mut rng = StdRng::seed_from_u64(11);
    for lambda in [1e-9, 1e-4, 1e-1, 10.0] {
        for _ in 0..10 {
            let (x, y) = random_problem(&mut rng, 200, 50);
            let got = train_ridge(&x, &y, lambda).unwrap().weights;
            let want = svd_ridge(&x, &y, lambda);
            let e = rel_err(&got, &want);
            assert!(e < 1e-8, "lambda {lambda}: relative error {e:e}");
        }
    }
}

#[test]
fn ridge_training_nmse_grows_with_lambda() {
    let mut rng = StdRng::seed_from_u64(5);
    let (x, y) = random_problem(&mut rng, 300, 40);
    let mut last = 0.0;
    for k in -9..=3 {
        let lambda = 10f64.powi(k);
        let model = train_ridge(&x, &y, lambda).unwrap();
        let e = nmse(&predict(&model, &x).unwrap(), &y).unwrap();
        assert!(e >= last - 1e-12, "lambda {lambda}: {e} < {last}");
        last = e;
    }
}

#[test]
fn narma_matches_reference_over_ten_thousand_symbols() {
    let input = mrr_reservoir::signal::gen_input_sequence(123, 10_000).unwrap();
    let y = mrr_reservoir::signal::gen_narma10(&input).unwrap().y;
    let reference = narma10_reference(&input.u);
    assert!(y
        .iter()
        .zip(&reference)
        .all(|(a, b)| a.to_bits() == b.to_bits()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nmse_is_scale_invariant(
        pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..200),
        c in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3],
    ) {
        let pred: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let target: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        prop_assume!(target.iter().any(|t| (t - target[0]).abs() > 1e-6));
        let a = nmse(&pred, &target).unwrap();
        let sp: Vec<f64> = pred.iter().map(|v| v * c).collect();
        let st: Vec<f64> = target.iter().map(|v| v * c).collect();
        let b = nmse(&sp, &st).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn nmse_is_non_negative(pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..50)) {
        let pred: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let target: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        if let Ok(v) = nmse(&pred, &target) {
            prop_assert!(v >= 0.0);
        }
    }
}

#[test]
fn permuting_pumps_leaves_photocurrent_unchanged() {
    let config = ExperimentConfig {
        mode: Mode::WdmDelayed,
        n_train: 20,
        n_test: 10,
        power_dbm: 15.0,
        detuning_ghz: -25.0,
        ..Default::default()
    };
    let inputs = SharedInputs::generate(&config).unwrap();
    let chans = channels(&config, &inputs);
    let detunings = vec![config.detuning_rad_s(); chans.len()];
    let drives: Vec<_> = chans
        .iter()
        .map(|c| {
            build_drive(
                &inputs.input.u,
                c,
                config.beta,
                config.power_watts(),
                config.symbol_duration(),
                config.eta(),
            )
            .unwrap()
        })
        .collect();
    let params = CavityParams::default();
    let fb = FeedbackConfig::disabled();
    let base = simulate(&params, &detunings, &drives, &fb).unwrap();

    for perm in [[3, 2, 1, 0], [1, 0, 3, 2], [2, 3, 0, 1]] {
        let permuted: Vec<_> = perm.iter().map(|&i| drives[i].clone()).collect();
        let rec = simulate(&params, &detunings, &permuted, &fb).unwrap();
        assert_eq!(
            photodetect_sum(&rec).unwrap(),
            photodetect_sum(&base).unwrap()
        );
        for (slot, &i) in perm.iter().enumerate() {
            for k in (0..base.steps()).step_by(997) {
                assert_eq!(
                    rec.drop_power(slot)[k].to_bits(),
                    base.drop_power(i)[k].to_bits()
                );
            }
        }
    }
}

#[test]
fn identical_configs_are_bit_identical() {
    let mut rng = StdRng::seed_from_u64(3);
    for mode in Mode::ALL {
        let config = ExperimentConfig {
            mode,
            n_train: 200,
            n_test: 60,
            power_dbm: rng.random_range(-15.0..25.0),
            detuning_ghz: rng.random_range(-100.0..100.0),
            ..Default::default()
        };
        let a = run_experiment(&config).unwrap();
        let b = run_experiment(&config.clone()).unwrap();
        assert!(a.same_outcome(&b), "{mode}");
    }
}

#[test]
fn seed_changes_outcome() {
    let config = ExperimentConfig {
        mode: Mode::SingleNoFeedback,
        n_train: 200,
        n_test: 60,
        ..Default::default()
    };
    let other = ExperimentConfig {
        master_seed: 2,
        ..config.clone()
    };
    let a = run_experiment(&config).unwrap();
    let b = run_experiment(&other).unwrap();
    assert_ne!(a.nmse_test, b.nmse_test);
    assert_ne!(a.fingerprint, b.fingerprint);
}
