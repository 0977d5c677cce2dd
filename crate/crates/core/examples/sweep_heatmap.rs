//! A coarse power × detuning sweep written to disk as CSV, metadata and
//! an SVG heatmap.
//!
//! ```bash
//! cargo run --release --example sweep_heatmap -- single_no_feedback 5x5 out/sweep
//! ```
//!
//! Rerunning with the same output directory reuses finished points.

use std::path::PathBuf;

use mrr_reservoir::experiment::{ExperimentConfig, Mode};
use mrr_reservoir::sweep::{
    export_results, find_best, parse_grid_shape, run_sweep, ExportFormats, SweepSpec,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mode: Mode = args
        .first()
        .map_or(Ok(Mode::SingleNoFeedback), |s| s.parse())?;
    let (rows, cols) = parse_grid_shape(args.get(1).map_or("5x5", String::as_str))?;
    let out = PathBuf::from(args.get(2).map_or("sweep-example", String::as_str));

    let mut spec = SweepSpec::with_shape(ExperimentConfig::for_mode(mode), rows, cols)?;
    spec.workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    spec.out_dir = Some(out.clone());
    spec.resume = true;

    let result = run_sweep(&spec)?;
    export_results(&spec, &result, &out, ExportFormats::default())?;
    let best = find_best(&result)?;
    println!(
        "{} points ({} reused, {} failed) in {:.1} s",
        result.points.len(),
        result.resumed,
        result.failed(),
        result.wall_time_s
    );
    println!(
        "best NMSE {:.4} at {} dBm, {} GHz",
        best.nmse, best.power_dbm, best.detuning_ghz
    );
    println!("{} points within 2x of best", result.count_within(2.0));
    println!("wrote {}", out.display());
    Ok(())
}
