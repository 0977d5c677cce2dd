//! Harvests reservoir features once, then trains readouts over a range of
//! ridge parameters and round-trips the chosen model through disk.
//!
//! ```bash
//! cargo run --release --example ridge_readout
//! ```

use mrr_reservoir::experiment::{channels, harvest_features, ExperimentConfig, Mode, SharedInputs};
use mrr_reservoir::readout::{load_model, nmse, predict, save_model, train_ridge_with};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ExperimentConfig {
        power_dbm: 25.0,
        detuning_ghz: 25.0,
        beta: 0.1,
        ..ExperimentConfig::for_mode(Mode::WdmDelayed)
    };
    let inputs = SharedInputs::generate(&config)?;
    let chans = channels(&config, &inputs);
    let (states, _) = harvest_features(&config, &inputs, &chans, config.total_symbols())?;

    let n = config.n_train;
    let train = states.slice_rows(0..n);
    let test = states.slice_rows(n..states.rows);
    let y = &inputs.target.y[..states.rows];
    let (y_train, y_test) = y.split_at(n);

    println!(
        "{:>8} {:>12} {:>10} {:>10}",
        "lambda", "residual", "train", "test"
    );
    let mut best = None;
    for k in [-12, -9, -6, -4, -2, 0] {
        let mut options = config.ridge_options();
        options.lambda = 10f64.powi(k);
        let model = train_ridge_with(&train, y_train, &options)?;
        let tr = nmse(&predict(&model, &train)?, y_train)?;
        let te = nmse(&predict(&model, &test)?, y_test)?;
        println!(
            "{:>8.0e} {:>12.3e} {tr:>10.4} {te:>10.4}",
            options.lambda, model.residual_norm
        );
        if best.as_ref().is_none_or(|(t, _)| tr < *t) {
            best = Some((tr, model));
        }
    }

    // Lowest training error wins; the test column is for display only.
    let (_, model) = best.expect("at least one lambda");
    let path = std::env::temp_dir().join("mrr-readout.json");
    save_model(&model, &path)?;
    let back = load_model(&path)?;
    assert_eq!(predict(&back, &test)?, predict(&model, &test)?);
    println!(
        "saved lambda={:e} readout to {}",
        model.lambda,
        path.display()
    );
    Ok(())
}
