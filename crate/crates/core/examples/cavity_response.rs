//! Cavity response to a power step, printed as CSV: the drop-port power
//! settles, then drifts as heat and free carriers build up and pull the
//! resonance.
//!
//! ```bash
//! cargo run --release --example cavity_response > step.csv
//! ```
//!
//! The header comment gives the analytic linear add-drop response at the
//! same drive for reference; the gap to the simulated trace is the
//! nonlinear shift.

use mrr_reservoir::cavity::{linear_steady_state, simulate, CavityParams, FeedbackConfig};
use mrr_reservoir::signal::{dbm_to_watts, DriveWaveform, SymbolTiming};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = CavityParams::default();
    let eta = 2e-12;
    let symbols = 200;
    let timing = SymbolTiming::new(1e-9, eta, 50)?;
    let power = dbm_to_watts(20.0);
    let detuning = -2.0 * std::f64::consts::PI * 10e9;

    let drive = DriveWaveform::constant(power, eta, timing, symbols)?;
    let rec = simulate(&params, &[detuning], &[drive], &FeedbackConfig::disabled())?;
    let drop = rec.drop_power(0);

    let linear = linear_steady_state(&params, detuning, power);
    println!(
        "# linear steady drop {:.4e} W, simulated final {:.4e} W",
        linear.drop_power,
        drop[drop.len() - 1]
    );
    println!("t_ns,drop_w,delta_t_k,delta_n_m3");
    let stride = timing.steps_per_symbol / 10;
    for k in (0..rec.steps()).step_by(stride) {
        println!(
            "{:.3},{:.6e},{:.6e},{:.6e}",
            k as f64 * eta * 1e9,
            drop[k],
            rec.delta_t[k],
            rec.delta_n[k]
        );
    }
    Ok(())
}
