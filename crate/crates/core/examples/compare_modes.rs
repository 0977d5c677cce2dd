//! Delayed-input WDM against the two single-wavelength baselines at one
//! operating point, with β picked per mode from training error only.
//!
//! ```bash
//! cargo run --release --example compare_modes -- 25 25
//! ```

use mrr_reservoir::experiment::{optimize_beta, run_experiment, ExperimentConfig, Mode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<f64> = std::env::args()
        .skip(1)
        .map(|s| s.parse())
        .collect::<Result<_, _>>()?;
    let power = args.first().copied().unwrap_or(25.0);
    let detuning = args.get(1).copied().unwrap_or(25.0);
    let betas = [0.1, 0.25, 0.5, 1.0];

    println!("P = {power} dBm, dF = {detuning} GHz\n");
    println!(
        "{:<20} {:>3} {:>6} {:>10} {:>10}",
        "mode", "M", "beta", "train", "test"
    );
    for mode in Mode::ALL {
        let mut config = ExperimentConfig {
            power_dbm: power,
            detuning_ghz: detuning,
            ..ExperimentConfig::for_mode(mode)
        };
        let (beta, _) = optimize_beta(&config, &betas)?;
        config.beta = beta;
        let r = run_experiment(&config)?;
        println!(
            "{:<20} {:>3} {:>6} {:>10.4} {:>10.4}",
            mode.as_str(),
            config.pump_count(),
            beta,
            r.nmse_train,
            r.nmse_test
        );
    }
    Ok(())
}
