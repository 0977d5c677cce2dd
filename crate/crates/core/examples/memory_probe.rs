//! Linear memory: how well each mode recalls the input k symbols back.
//!
//! ```bash
//! cargo run --release --example memory_probe
//! ```
//!
//! The delayed copies in the WDM mode hand the readout u(n−1), u(n−2) and
//! u(n−3) directly, so its recall stays flat up to k = 3 and degrades at
//! k = 4, where only the cavity's own fading memory is left. The single
//! wavelength without feedback already loses most of the input by k = 2.

use mrr_reservoir::experiment::{run_experiment, ExperimentConfig, Mode, Task};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let modes = Mode::ALL;
    print!("{:>3}", "k");
    for m in modes {
        print!(" {:>20}", m.as_str());
    }
    println!();
    for k in 0..=6 {
        print!("{k:>3}");
        for mode in modes {
            let config = ExperimentConfig {
                task: Task::LagRecall,
                recall_lag: k,
                power_dbm: 25.0,
                detuning_ghz: 25.0,
                beta: 0.1,
                n_train: 1600,
                n_test: 400,
                ..ExperimentConfig::for_mode(mode)
            };
            print!(" {:>20.4}", run_experiment(&config)?.nmse_test);
        }
        println!();
    }
    Ok(())
}
