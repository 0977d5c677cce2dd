//! One NARMA-10 experiment at a chosen operating point.
//!
//! ```bash
//! cargo run --release --example narma10_run -- wdm_delayed 20 25
//! ```
//!
//! Arguments: mode, total power in dBm, detuning in GHz. Everything else
//! uses the library defaults.

use mrr_reservoir::experiment::{run_experiment, ExperimentConfig, Mode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mode: Mode = args.first().map_or(Ok(Mode::WdmDelayed), |s| s.parse())?;
    let mut config = ExperimentConfig::for_mode(mode);
    if let Some(p) = args.get(1) {
        config.power_dbm = p.parse()?;
    }
    if let Some(d) = args.get(2) {
        config.detuning_ghz = d.parse()?;
    }

    let r = run_experiment(&config)?;
    println!(
        "{mode}  M={}  P={} dBm  dF={} GHz  beta={}",
        config.pump_count(),
        config.power_dbm,
        config.detuning_ghz,
        config.beta
    );
    println!("train NMSE  {:.4}", r.nmse_train);
    println!("test NMSE   {:.4}", r.nmse_test);
    println!(
        "peak dT {:.3e} K, peak dN {:.3e} m^-3, mean drop {:.3e} W",
        r.diagnostics.max_delta_t, r.diagnostics.max_delta_n, r.diagnostics.mean_drop_power
    );
    println!(
        "{:.2} s, fingerprint {}",
        r.wall_time_s,
        &r.fingerprint[..16]
    );
    Ok(())
}
