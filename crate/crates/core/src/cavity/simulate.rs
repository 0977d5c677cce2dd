use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::dynamics::{CavityState, Integrator, Rk4Weights, StepDrive};
use super::params::{CavityParams, Rates};
use crate::error::{Error, Result};
use crate::signal::DriveWaveform;

/// External through→add delayed loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeedbackConfig {
    pub enabled: bool,
    /// Field amplitude factor in `[0, 1]`.
    pub attenuation: f64,
    /// Loop phase, rad.
    #[serde(rename = "phase_rad")]
    pub phase: f64,
    /// Loop delay, s.
    #[serde(rename = "delay_s")]
    pub delay: f64,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            attenuation: 0.99,
            phase: 0.0,
            delay: 1.0e-9,
        }
    }
}

impl FeedbackConfig {
    pub fn disabled() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.attenuation) {
            return Err(Error::InvalidParameter(format!(
                "feedback attenuation {} outside [0, 1]",
                self.attenuation
            )));
        }
        if !(self.delay >= 0.0 && self.delay.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "feedback delay must be non-negative, got {}",
                self.delay
            )));
        }
        if !self.phase.is_finite() {
            return Err(Error::InvalidParameter(
                "feedback phase must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Loop delay in solver steps. Non-integer delays are rounded with a
    /// warning; the loop needs at least one step.
    pub fn delay_steps(&self, eta: f64) -> usize {
        let ratio = self.delay / eta;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
            log::warn!(
                "feedback delay {} s is not a multiple of the {} s step; rounded to {} steps",
                self.delay,
                eta,
                steps
            );
        }
        if steps < 1.0 {
            log::warn!("feedback delay below one solver step; using one step");
            1
        } else {
            steps as usize
        }
    }
}

/// Port fields recorded after every solver step.
///
/// Entry `k` holds the fields at the end of step `k`, computed from the
/// input sample held during that step.
#[derive(Debug, Clone, PartialEq)]
pub struct PortRecord {
    pumps: usize,
    pub eta: f64,
    drop: Vec<Complex64>,
    through: Vec<Complex64>,
    pub delta_t: Vec<f64>,
    pub delta_n: Vec<f64>,
}

impl PortRecord {
    pub fn pumps(&self) -> usize {
        self.pumps
    }

    pub fn steps(&self) -> usize {
        self.delta_t.len()
    }

    pub fn drop_at(&self, k: usize) -> &[Complex64] {
        &self.drop[k * self.pumps..(k + 1) * self.pumps]
    }

    pub fn through_at(&self, k: usize) -> &[Complex64] {
        &self.through[k * self.pumps..(k + 1) * self.pumps]
    }

    /// Drop-port power of one pump over the whole run, W.
    pub fn drop_power(&self, pump: usize) -> Vec<f64> {
        (0..self.steps())
            .map(|k| self.drop_at(k)[pump].norm_sqr())
            .collect()
    }

    pub fn through_power(&self, pump: usize) -> Vec<f64> {
        (0..self.steps())
            .map(|k| self.through_at(k)[pump].norm_sqr())
            .collect()
    }
}

/// What the simulator exposes to an observer after each step.
#[derive(Debug, Clone, Copy)]
pub struct StepOutput<'a> {
    pub step: usize,
    pub drop: &'a [Complex64],
    pub through: &'a [Complex64],
    pub state: &'a CavityState,
}

/// Fixed-step simulation options beyond the physics.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimOptions {
    pub weights: Rk4Weights,
}

/// Integrates the cavity from rest over the full drive waveforms and
/// records every port field.
pub fn simulate(
    params: &CavityParams,
    detunings: &[f64],
    drives: &[DriveWaveform],
    feedback: &FeedbackConfig,
) -> Result<PortRecord> {
    let pumps = drives.len();
    let steps = drives.first().map_or(0, DriveWaveform::len);
    let mut record = PortRecord {
        pumps,
        eta: drives.first().map_or(0.0, |d| d.eta),
        drop: Vec::with_capacity(steps * pumps),
        through: Vec::with_capacity(steps * pumps),
        delta_t: Vec::with_capacity(steps),
        delta_n: Vec::with_capacity(steps),
    };
    simulate_with(
        params,
        detunings,
        drives,
        feedback,
        SimOptions::default(),
        |out| {
            record.drop.extend_from_slice(out.drop);
            record.through.extend_from_slice(out.through);
            record.delta_t.push(out.state.delta_t);
            record.delta_n.push(out.state.delta_n);
        },
    )?;
    Ok(record)
}

/// Streaming form of [`simulate`]: calls `observer` after every step
/// instead of storing the record.
pub fn simulate_with<F>(
    params: &CavityParams,
    detunings: &[f64],
    drives: &[DriveWaveform],
    feedback: &FeedbackConfig,
    options: SimOptions,
    mut observer: F,
) -> Result<()>
where
    F: FnMut(&StepOutput<'_>),
{
    params.validate()?;
    feedback.validate()?;
    let pumps = drives.len();
    if pumps == 0 {
        return Err(Error::InvalidParameter(
            "at least one drive is required".into(),
        ));
    }
    if detunings.len() != pumps {
        return Err(Error::LengthMismatch(format!(
            "{} detunings for {pumps} drives",
            detunings.len()
        )));
    }
    let first = &drives[0];
    for d in &drives[1..] {
        if d.len() != first.len() || d.eta != first.eta || d.timing != first.timing {
            return Err(Error::LengthMismatch(
                "all drives must share step, timing and length".into(),
            ));
        }
    }
    let eta = first.eta;
    let steps = first.len();
    let steps_per_chip = first.timing.steps_per_chip;

    // Field amplitudes per chip, so the inner loop does no square roots.
    let amplitudes: Vec<Vec<f64>> = drives
        .iter()
        .map(|d| d.chip_powers().iter().map(|p| p.sqrt()).collect())
        .collect();

    let guard = DivergenceGuard::new(params, drives);
    let rates = Rates::new(params);
    let kappa = Complex64::new(0.0, rates.coupling);

    let loop_active = feedback.enabled;
    let loop_factor = Complex64::from_polar(feedback.attenuation, feedback.phase);
    let loop_steps = if loop_active {
        feedback.delay_steps(eta)
    } else {
        1
    };
    let mut ring = vec![Complex64::new(0.0, 0.0); if loop_active { loop_steps * pumps } else { 0 }];

    let mut integrator = Integrator::with_weights(params, detunings, options.weights);
    let mut state = CavityState::zeros(pumps);
    let mut input = vec![Complex64::new(0.0, 0.0); pumps];
    let mut add = vec![Complex64::new(0.0, 0.0); pumps];
    let mut drop = vec![Complex64::new(0.0, 0.0); pumps];
    let mut through = vec![Complex64::new(0.0, 0.0); pumps];

    for k in 0..steps {
        let chip = k / steps_per_chip;
        for i in 0..pumps {
            input[i] = Complex64::new(amplitudes[i][chip], 0.0);
        }
        let slot = (k % loop_steps) * pumps;
        if loop_active {
            // Through field from `loop_steps` steps ago; zeros until filled.
            for i in 0..pumps {
                add[i] = loop_factor * ring[slot + i];
            }
        }

        integrator.step(&mut state, eta, StepDrive::held(&input, &add));
        guard.check(k, &state)?;

        for i in 0..pumps {
            let leak = kappa * state.a[i];
            drop[i] = leak;
            through[i] = input[i] + leak;
        }
        if loop_active {
            ring[slot..slot + pumps].copy_from_slice(&through);
        }
        observer(&StepOutput {
            step: k,
            drop: &drop,
            through: &through,
            state: &state,
        });
    }
    Ok(())
}

/// Aborts when any state component is non-finite or exceeds 10⁶ times the
/// largest value the drive could plausibly produce.
#[derive(Debug, Clone, Copy)]
struct DivergenceGuard {
    energy_limit: f64,
    temperature_limit: f64,
    density_limit: f64,
}

impl DivergenceGuard {
    const MARGIN: f64 = 1e6;

    fn new(params: &CavityParams, drives: &[DriveWaveform]) -> Self {
        let rates = Rates::new(params);
        let peak_total: f64 = drives.iter().map(DriveWaveform::max_power).sum();
        // Input plus a full-strength loop can double the field at the bus.
        let field_power = 4.0 * peak_total;
        let half_gamma = 0.5 * rates.gamma_lin;
        let energy = rates.coupling * rates.coupling * field_power / (half_gamma * half_gamma);
        let temperature = field_power * params.tau_thermal / params.thermal_mass;
        let density = rates.carrier_gen * params.tau_carrier * energy * energy;
        Self {
            energy_limit: Self::MARGIN * energy,
            temperature_limit: Self::MARGIN * temperature,
            density_limit: Self::MARGIN * density,
        }
    }

    fn check(&self, step: usize, state: &CavityState) -> Result<()> {
        if !state.is_finite() {
            return Err(Error::Divergence {
                step,
                quantity: "non-finite state".into(),
            });
        }
        for (i, a) in state.a.iter().enumerate() {
            let e = a.norm_sqr();
            if e > self.energy_limit {
                return Err(Error::Divergence {
                    step,
                    quantity: format!("|a_{i}|² = {e:e} J"),
                });
            }
        }
        if state.delta_t.abs() > self.temperature_limit {
            return Err(Error::Divergence {
                step,
                quantity: format!("ΔT = {:e} K", state.delta_t),
            });
        }
        if state.delta_n.abs() > self.density_limit {
            return Err(Error::Divergence {
                step,
                quantity: format!("ΔN = {:e} m⁻³", state.delta_n),
            });
        }
        Ok(())
    }
}
