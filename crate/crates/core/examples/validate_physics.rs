//! Runs the built-in physics oracles on the default cavity and prints one
//! line per check.
//!
//! ```bash
//! cargo run --release --example validate_physics
//! ```

use mrr_reservoir::cavity::validate::{rk4_global_error, validate_physics, PhysicsOptions};
use mrr_reservoir::cavity::CavityParams;

fn main() {
    let params = CavityParams::default();
    let report = validate_physics(&params, &PhysicsOptions::default());
    for check in &report.checks {
        println!("{check}");
    }

    // Convergence table on the linear cavity at 20 GHz detuning.
    let det = 2.0 * std::f64::consts::PI * 20e9;
    println!("\n  eta (ps)   global error");
    for eta_ps in [8.0, 4.0, 2.0, 1.0, 0.5] {
        println!(
            "  {eta_ps:>7.1}   {:.3e}",
            rk4_global_error(&params, det, eta_ps * 1e-12)
        );
    }
    std::process::exit(if report.all_passed() { 0 } else { 1 });
}
