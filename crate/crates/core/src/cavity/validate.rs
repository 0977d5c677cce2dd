//! Built-in physics oracles.
//!
//! Each check compares the integrator against a closed-form or
//! conservation-law reference and reports the measured error next to its
//! tolerance. Failures are reported, never raised.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::Serialize;

use super::dynamics::{CavityState, Integrator, Rk4Weights, StepDrive};
use super::params::CavityParams;
use super::simulate::{simulate_with, FeedbackConfig, SimOptions};
use super::steady::linear_steady_state;
use crate::signal::{
    build_drive, dbm_to_watts, gen_input_sequence, gen_mask, DriveWaveform, PumpChannel,
    SymbolTiming,
};

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Measured error (or margin) of the check.
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:<16} measured {:.3e} tolerance {:.3e}  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance,
            self.detail
        )
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failed(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Names of the physics checks, in execution order.
pub const PHYSICS_CHECKS: [&str; 5] = [
    "params",
    "lorentzian",
    "rk4_order",
    "energy_balance",
    "non_negativity",
];

#[derive(Debug, Clone)]
pub struct PhysicsOptions {
    /// Solver step under test, s.
    pub eta: f64,
    /// Detuning of the RK4 convergence study, rad/s.
    pub rk4_detuning: f64,
    pub weights: Rk4Weights,
    /// Run only these checks (all when `None`).
    pub only: Option<Vec<String>>,
}

impl Default for PhysicsOptions {
    fn default() -> Self {
        Self {
            eta: 2e-12,
            rk4_detuning: 2.0 * PI * 20e9,
            weights: Rk4Weights::default(),
            only: None,
        }
    }
}

impl PhysicsOptions {
    fn wants(&self, name: &str) -> bool {
        self.only
            .as_ref()
            .is_none_or(|o| o.iter().any(|n| n == name))
    }
}

pub const LORENTZIAN_TOL: f64 = 1e-3;
pub const RK4_RATIO_BAND: (f64, f64) = (12.0, 20.0);
pub const ENERGY_TOL: f64 = 1e-4;

pub fn validate_physics(params: &CavityParams, options: &PhysicsOptions) -> ValidationReport {
    let mut report = ValidationReport::default();
    let params_ok = match params.validate() {
        Ok(()) => {
            if options.wants("params") {
                report.checks.push(pass(
                    "params",
                    0.0,
                    0.0,
                    "parameters satisfy invariants".into(),
                ));
            }
            true
        }
        Err(e) => {
            report.checks.push(CheckResult {
                name: "params",
                passed: false,
                measured: f64::NAN,
                tolerance: 0.0,
                detail: e.to_string(),
            });
            false
        }
    };
    for name in &PHYSICS_CHECKS[1..] {
        if !options.wants(name) {
            continue;
        }
        if !params_ok {
            report.checks.push(CheckResult {
                name,
                passed: false,
                measured: f64::NAN,
                tolerance: 0.0,
                detail: "skipped: invalid parameters".into(),
            });
            continue;
        }
        let check = match *name {
            "lorentzian" => lorentzian_scan(params, options),
            "rk4_order" => rk4_order(params, options),
            "energy_balance" => energy_balance(params, options),
            "non_negativity" => non_negativity(params, options),
            _ => unreachable!(),
        };
        report.checks.push(check);
    }
    report
}

fn pass(name: &'static str, measured: f64, tolerance: f64, detail: String) -> CheckResult {
    CheckResult {
        name,
        passed: true,
        measured,
        tolerance,
        detail,
    }
}

fn judged(name: &'static str, measured: f64, tolerance: f64, detail: String) -> CheckResult {
    CheckResult {
        name,
        passed: measured.is_finite() && measured < tolerance,
        measured,
        tolerance,
        detail,
    }
}

/// Duration of each CW run in the Lorentzian scan. Long against the photon
/// lifetime (~150 ps), short against the thermal time constant.
const LORENTZIAN_WINDOW: f64 = 6e-9;

/// Simulated CW drop power at −30 dBm over 21 detunings in ±100 GHz,
/// averaged over the final quarter, against the analytic Lorentzian.
pub fn lorentzian_scan(params: &CavityParams, options: &PhysicsOptions) -> CheckResult {
    let power = dbm_to_watts(-30.0);
    let eta = options.eta;
    let steps = (LORENTZIAN_WINDOW / eta).round() as usize;
    let Ok(timing) = SymbolTiming::new(eta, eta, 1) else {
        return judged("lorentzian", f64::NAN, LORENTZIAN_TOL, "bad step".into());
    };
    let drive = match DriveWaveform::constant(power, eta, timing, steps) {
        Ok(d) => d,
        Err(e) => return judged("lorentzian", f64::NAN, LORENTZIAN_TOL, e.to_string()),
    };
    let mut worst: f64 = 0.0;
    let mut worst_at = 0.0;
    for j in 0..21 {
        let det_hz = -100e9 + 10e9 * j as f64;
        let det = 2.0 * PI * det_hz;
        let tail_start = steps - steps / 4;
        let mut sum = 0.0;
        let run = simulate_with(
            params,
            &[det],
            std::slice::from_ref(&drive),
            &FeedbackConfig::disabled(),
            SimOptions {
                weights: options.weights,
            },
            |out| {
                if out.step >= tail_start {
                    sum += out.drop[0].norm_sqr();
                }
            },
        );
        if let Err(e) = run {
            return judged("lorentzian", f64::NAN, LORENTZIAN_TOL, e.to_string());
        }
        let simulated = sum / (steps - tail_start) as f64;
        let expected = linear_steady_state(params, det, power).drop_power;
        let rel = (simulated - expected).abs() / expected;
        if !(rel <= worst) {
            worst = rel;
            worst_at = det_hz;
        }
    }
    judged(
        "lorentzian",
        worst,
        LORENTZIAN_TOL,
        format!(
            "worst relative drop-power error at {:+.0} GHz",
            worst_at / 1e9
        ),
    )
}

/// Error of the linear cavity against `a(t) = a_ss·(1 − e^{λt})` after
/// `duration`, relative to `|a_ss|`.
fn linear_error(
    params: &CavityParams,
    detuning: f64,
    eta: f64,
    duration: f64,
    weights: Rk4Weights,
) -> f64 {
    let lin = params.linearized();
    let steps = (duration / eta).round() as usize;
    let s_in = Complex64::new(dbm_to_watts(0.0).sqrt(), 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut integ = Integrator::with_weights(&lin, &[detuning], weights);
    let mut state = CavityState::zeros(1);
    for _ in 0..steps {
        integ.step(&mut state, eta, StepDrive::held(&[s_in], &[zero]));
    }
    let t = steps as f64 * eta;
    let lambda = Complex64::new(-0.5 * lin.gamma_linear(), detuning);
    let ikappa = Complex64::new(0.0, lin.coupling());
    let a_ss = -ikappa * s_in / lambda;
    let exact = a_ss * (Complex64::new(1.0, 0.0) - (lambda * t).exp());
    (state.a[0] - exact).norm() / a_ss.norm()
}

const RK4_DURATION: f64 = 2e-9;

/// Global error ratio when halving the step on the analytic linear cavity.
pub fn rk4_order(params: &CavityParams, options: &PhysicsOptions) -> CheckResult {
    let coarse = linear_error(
        params,
        options.rk4_detuning,
        options.eta,
        RK4_DURATION,
        options.weights,
    );
    let fine = linear_error(
        params,
        options.rk4_detuning,
        0.5 * options.eta,
        RK4_DURATION,
        options.weights,
    );
    let ratio = coarse / fine;
    let (lo, hi) = RK4_RATIO_BAND;
    CheckResult {
        name: "rk4_order",
        passed: ratio.is_finite() && (lo..=hi).contains(&ratio),
        measured: ratio,
        tolerance: hi,
        detail: format!(
            "global error {coarse:.3e} at {:.1} ps, {fine:.3e} at half step; ratio must lie in [{lo}, {hi}] at {:.0} GHz",
            options.eta * 1e12,
            options.rk4_detuning / (2.0 * PI * 1e9)
        ),
    }
}

/// Global RK4 error of the linear cavity at a given step, for convergence studies.
pub fn rk4_global_error(params: &CavityParams, detuning: f64, eta: f64) -> f64 {
    linear_error(params, detuning, eta, RK4_DURATION, Rk4Weights::default())
}

/// Lossless linear cavity: input energy minus drop and through energy must
/// equal the stored energy.
pub fn energy_balance(params: &CavityParams, options: &PhysicsOptions) -> CheckResult {
    let lossless = CavityParams {
        tau_intrinsic: f64::INFINITY,
        ..params.linearized()
    };
    let eta = options.eta;
    let lifetime = 1.0 / lossless.gamma_linear();
    let steps = (10.0 * lifetime / eta).round() as usize;
    let detuning = 0.5 * lossless.gamma_linear();
    let power = dbm_to_watts(0.0);
    let s_in = Complex64::new(power.sqrt(), 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let ikappa = Complex64::new(0.0, lossless.coupling());
    let out_power = |a: Complex64| {
        let leak = ikappa * a;
        leak.norm_sqr() + (s_in + leak).norm_sqr()
    };

    let mut integ = Integrator::with_weights(&lossless, &[detuning], options.weights);
    let mut state = CavityState::zeros(1);
    let mut e_in = 0.0;
    let mut e_out = 0.0;
    for _ in 0..steps {
        let before = out_power(state.a[0]);
        integ.step(&mut state, eta, StepDrive::held(&[s_in], &[zero]));
        let after = out_power(state.a[0]);
        e_in += power * eta;
        e_out += 0.5 * (before + after) * eta;
    }
    let stored = state.energy();
    let rel = (e_in - e_out - stored).abs() / e_in;
    judged(
        "energy_balance",
        rel,
        ENERGY_TOL,
        format!(
            "over {steps} steps ({:.1} photon lifetimes)",
            steps as f64 * eta / lifetime
        ),
    )
}

/// ΔT and ΔN stay non-negative through a masked +25 dBm run.
pub fn non_negativity(params: &CavityParams, options: &PhysicsOptions) -> CheckResult {
    let eta = options.eta;
    let symbols = 200;
    let Ok(u) = gen_input_sequence(17, symbols) else {
        unreachable!()
    };
    let mut drives = Vec::new();
    for i in 0..2 {
        let channel = PumpChannel {
            index: i,
            delay_symbols: i,
            mask: gen_mask(100 + i as u64, 50).expect("mask"),
            power_share: 0.5,
            detuning: 0.0,
        };
        match build_drive(&u.u, &channel, 0.25, dbm_to_watts(25.0), 1e-9, eta) {
            Ok(d) => drives.push(d),
            Err(e) => return judged("non_negativity", f64::NAN, 0.0, e.to_string()),
        }
    }
    let det = 2.0 * PI * -20e9;
    let mut min_t = f64::INFINITY;
    let mut min_n = f64::INFINITY;
    let mut max_t: f64 = 0.0;
    let run = simulate_with(
        params,
        &[det, det],
        &drives,
        &FeedbackConfig::disabled(),
        SimOptions {
            weights: options.weights,
        },
        |out| {
            min_t = min_t.min(out.state.delta_t);
            min_n = min_n.min(out.state.delta_n);
            max_t = max_t.max(out.state.delta_t);
        },
    );
    if let Err(e) = run {
        return judged("non_negativity", f64::NAN, 0.0, e.to_string());
    }
    let worst = min_t.min(min_n);
    CheckResult {
        name: "non_negativity",
        passed: worst >= 0.0,
        measured: -worst.min(0.0),
        tolerance: 0.0,
        detail: format!(
            "min ΔT {min_t:.3e} K, min ΔN {min_n:.3e} m⁻³, max ΔT {max_t:.3e} K at +25 dBm"
        ),
    }
}
