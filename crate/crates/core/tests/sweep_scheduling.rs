//! Worker-count independence, resume, and export round trips on small grids.

use std::fs;

use mrr_reservoir::experiment::{ExperimentConfig, Mode};
use mrr_reservoir::heatmap;
use mrr_reservoir::sweep::{
    export_results, find_best, load_results_csv, results_csv, run_sweep, run_sweep_with,
    ExportFormats, GridAxis, PointStatus, SweepControl, SweepSpec,
};

fn small_spec(rows: usize, cols: usize) -> SweepSpec {
    let base = ExperimentConfig {
        mode: Mode::SingleNoFeedback,
        n_train: 150,
        n_test: 50,
        ..Default::default()
    };
    SweepSpec::with_shape(base, rows, cols).unwrap()
}

#[test]
fn nine_by_nine_enumerates_each_point_once() {
    let spec = small_spec(9, 9);
    assert_eq!(spec.shape(), (9, 9));
    let mut seen = std::collections::HashSet::new();
    for r in 0..9 {
        for c in 0..9 {
            let p = spec.point_config(r, c);
            assert!(seen.insert((p.power_dbm.to_bits(), p.detuning_ghz.to_bits())));
        }
    }
    assert_eq!(seen.len(), 81);
}

#[test]
fn worker_count_does_not_change_results() {
    let mut one = small_spec(3, 4);
    one.workers = 1;
    let mut many = one.clone();
    many.workers = 8;
    let a = run_sweep(&one).unwrap();
    let b = run_sweep(&many).unwrap();
    assert_eq!(a.points.len(), 12);
    assert_eq!(
        results_csv(&a.rows()).unwrap(),
        results_csv(&b.rows()).unwrap()
    );
}

#[test]
fn interrupted_then_resumed_matches_uninterrupted() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = small_spec(3, 3);
    spec.out_dir = Some(dir.path().join("resumed"));
    spec.workers = 2;

    let partial = run_sweep_with(
        &spec,
        SweepControl {
            max_new_points: Some(4),
        },
    )
    .unwrap();
    assert!(!partial.is_complete());
    assert_eq!(partial.computed, 4);
    let stored = fs::read_dir(dir.path().join("resumed/points"))
        .unwrap()
        .count();
    assert_eq!(stored, 4);

    spec.resume = true;
    let resumed = run_sweep(&spec).unwrap();
    assert!(resumed.is_complete());
    assert_eq!((resumed.resumed, resumed.computed), (4, 5));

    let mut fresh = small_spec(3, 3);
    fresh.out_dir = Some(dir.path().join("fresh"));
    let full = run_sweep(&fresh).unwrap();
    export_results(
        &spec,
        &resumed,
        &dir.path().join("resumed"),
        ExportFormats::default(),
    )
    .unwrap();
    export_results(
        &fresh,
        &full,
        &dir.path().join("fresh"),
        ExportFormats::default(),
    )
    .unwrap();
    for file in ["results.csv", "heatmap.svg"] {
        assert_eq!(
            fs::read(dir.path().join("resumed").join(file)).unwrap(),
            fs::read(dir.path().join("fresh").join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn resume_recomputes_points_whose_config_changed() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = small_spec(1, 2);
    spec.out_dir = Some(dir.path().to_path_buf());
    run_sweep(&spec).unwrap();
    spec.resume = true;
    spec.base.beta = 0.3;
    let again = run_sweep(&spec).unwrap();
    assert_eq!((again.resumed, again.computed), (0, 2));
    spec.base.beta = 0.3;
    let third = run_sweep(&spec).unwrap();
    assert_eq!((third.resumed, third.computed), (2, 0));
}

#[test]
fn export_round_trip_and_plot_identity() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_spec(2, 3);
    let result = run_sweep(&spec).unwrap();
    export_results(&spec, &result, dir.path(), ExportFormats::default()).unwrap();

    let csv = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert_eq!(
        csv.lines().next().unwrap(),
        "power_dbm,detuning_ghz,nmse_test,nmse_train,status"
    );

    let rows = load_results_csv(&dir.path().join("results.csv")).unwrap();
    assert_eq!(rows, result.rows());
    let svg = heatmap::render(&rows).unwrap();
    assert_eq!(
        svg,
        fs::read_to_string(dir.path().join("heatmap.svg")).unwrap()
    );

    let meta: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("result.meta")).unwrap()).unwrap();
    let best = find_best(&result).unwrap();
    assert_eq!(meta["best"]["nmse"].as_f64().unwrap(), best.nmse);
    assert_eq!(
        meta["seeds"]["master"].as_u64().unwrap(),
        spec.base.master_seed
    );
    assert_eq!(meta["points"].as_u64().unwrap(), 6);
}

#[test]
fn best_point_matches_linear_scan() {
    let result = run_sweep(&small_spec(3, 3)).unwrap();
    let best = find_best(&result).unwrap();
    let min = result
        .records()
        .filter(|p| p.status == PointStatus::Ok)
        .map(|p| p.nmse_test.unwrap())
        .fold(f64::INFINITY, f64::min);
    assert_eq!(best.nmse, min);
}

#[test]
fn failed_points_render_distinctly() {
    let mut spec = small_spec(1, 2);
    spec.base.eta_ps = 20.0;
    spec.detuning_ghz = GridAxis {
        start: 0.0,
        stop: 100.0,
        step: 100.0,
    };
    let result = run_sweep(&spec).unwrap();
    assert!(result.failed() >= 1);
    let svg = heatmap::render(&result.rows()).unwrap();
    assert_eq!(svg.matches(r#"class="failed""#).count(), result.failed());
}
