use num_complex::Complex64;
use smallvec::SmallVec;

use super::params::{CavityParams, Rates};
use crate::error::{Error, Result};

/// Instantaneous simulator state.
///
/// `a[i]` is the modal amplitude of pump `i`, normalized so that `|a[i]|²`
/// is the stored energy in joules.
#[derive(Debug, Clone, PartialEq)]
pub struct CavityState {
    pub a: Vec<Complex64>,
    /// Temperature deviation, K.
    pub delta_t: f64,
    /// Excess free-carrier density, 1/m³.
    pub delta_n: f64,
}

impl CavityState {
    pub fn zeros(pumps: usize) -> Self {
        Self {
            a: vec![Complex64::new(0.0, 0.0); pumps],
            delta_t: 0.0,
            delta_n: 0.0,
        }
    }

    pub fn pumps(&self) -> usize {
        self.a.len()
    }

    pub fn is_finite(&self) -> bool {
        self.delta_t.is_finite() && self.delta_n.is_finite() && self.a.iter().all(|z| z.is_finite())
    }

    /// Total stored energy `U = Σ|a_i|²`, J.
    pub fn energy(&self) -> f64 {
        stored_energy(&self.a)
    }

    fn set_axpy(&mut self, base: &CavityState, h: f64, slope: &CavityState) {
        for ((dst, b), k) in self.a.iter_mut().zip(&base.a).zip(&slope.a) {
            *dst = b + k * h;
        }
        self.delta_t = base.delta_t + h * slope.delta_t;
        self.delta_n = base.delta_n + h * slope.delta_n;
    }
}

/// `Σ|a_i|²` summed in ascending order so the result does not depend on
/// how pumps are indexed.
pub(crate) fn stored_energy(a: &[Complex64]) -> f64 {
    #[inline(always)]
    fn cswap(v: &mut [f64], i: usize, j: usize) {
        let (lo, hi) = (v[i].min(v[j]), v[i].max(v[j]));
        v[i] = lo;
        v[j] = hi;
    }
    match a {
        [] => 0.0,
        [x] => x.norm_sqr(),
        [x, y] => {
            let (p, q) = (x.norm_sqr(), y.norm_sqr());
            p.min(q) + p.max(q)
        }
        [x, y, z, w] => {
            let mut v = [x.norm_sqr(), y.norm_sqr(), z.norm_sqr(), w.norm_sqr()];
            cswap(&mut v, 0, 1);
            cswap(&mut v, 2, 3);
            cswap(&mut v, 0, 2);
            cswap(&mut v, 1, 3);
            cswap(&mut v, 1, 2);
            ((v[0] + v[1]) + v[2]) + v[3]
        }
        _ => {
            let mut parts: SmallVec<[f64; 8]> = a.iter().map(|z| z.norm_sqr()).collect();
            parts.sort_unstable_by(f64::total_cmp);
            parts.iter().sum()
        }
    }
}

/// Evaluates the modal, thermal and carrier equations into `out`.
///
/// Pumps share only `U`, `ΔT` and `ΔN`; there is no coherent coupling
/// between channels.
pub(crate) fn eval_into(
    rates: &Rates,
    detunings: &[f64],
    state: &CavityState,
    drive: &[Complex64],
    add: &[Complex64],
    out: &mut CavityState,
) {
    let energy = stored_energy(&state.a);
    let gamma_tpa = rates.tpa_per_energy * energy;
    let gamma_fca = rates.fca_per_density * state.delta_n;
    let half_gamma = 0.5 * (rates.gamma_lin + gamma_tpa + gamma_fca);
    let shift = rates.shift_per_kelvin * state.delta_t + rates.shift_per_density * state.delta_n;

    for i in 0..state.a.len() {
        let pole = Complex64::new(-half_gamma, detunings[i] + shift);
        let feed = (drive[i] + add[i]) * rates.coupling;
        out.a[i] = pole * state.a[i] + Complex64::new(-feed.im, feed.re);
    }

    out.delta_n = -state.delta_n * rates.inv_tau_carrier + rates.carrier_gen * energy * energy;
    let absorbed = (rates.inv_tau_intrinsic + gamma_tpa + gamma_fca) * energy;
    out.delta_t = -state.delta_t * rates.inv_tau_thermal + absorbed * rates.inv_thermal_mass;
}

/// Time derivative of the cavity state for the given per-pump input and
/// add-port fields (W^½) and detunings (rad/s).
pub fn derivatives(
    state: &CavityState,
    drive: &[Complex64],
    add: &[Complex64],
    params: &CavityParams,
    detunings: &[f64],
) -> Result<CavityState> {
    let m = state.pumps();
    for (len, what) in [
        (drive.len(), "drive"),
        (add.len(), "add"),
        (detunings.len(), "detunings"),
    ] {
        if len != m {
            return Err(Error::LengthMismatch(format!(
                "{what} has {len} entries for {m} pumps"
            )));
        }
    }
    if !state.is_finite() {
        return Err(Error::Divergence {
            step: 0,
            quantity: "non-finite state".into(),
        });
    }
    let rates = Rates::new(params);
    let mut out = CavityState::zeros(m);
    eval_into(&rates, detunings, state, drive, add, &mut out);
    Ok(out)
}

/// Classical RK4 weights. Exposed so that the validation suite can be
/// exercised against a deliberately broken integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rk4Weights(pub [f64; 4]);

impl Default for Rk4Weights {
    fn default() -> Self {
        Self([1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0])
    }
}

/// Drive fields presented to one RK4 step at `t`, `t + η/2` and `t + η`.
#[derive(Debug, Clone, Copy)]
pub struct StepDrive<'a> {
    pub input: [&'a [Complex64]; 3],
    pub add: [&'a [Complex64]; 3],
}

impl<'a> StepDrive<'a> {
    /// The same fields at all three stage times (zero-order hold).
    pub fn held(input: &'a [Complex64], add: &'a [Complex64]) -> Self {
        Self {
            input: [input; 3],
            add: [add; 3],
        }
    }
}

/// Fixed-step RK4 integrator with preallocated stage storage.
#[derive(Debug, Clone)]
pub struct Integrator {
    rates: Rates,
    detunings: Vec<f64>,
    weights: Rk4Weights,
    k: [CavityState; 4],
    probe: CavityState,
}

impl Integrator {
    pub fn new(params: &CavityParams, detunings: &[f64]) -> Self {
        Self::with_weights(params, detunings, Rk4Weights::default())
    }

    pub fn with_weights(params: &CavityParams, detunings: &[f64], weights: Rk4Weights) -> Self {
        let m = detunings.len();
        let zero = CavityState::zeros(m);
        Self {
            rates: Rates::new(params),
            detunings: detunings.to_vec(),
            weights,
            k: [zero.clone(), zero.clone(), zero.clone(), zero.clone()],
            probe: zero,
        }
    }

    pub fn pumps(&self) -> usize {
        self.detunings.len()
    }

    /// Advances `state` by `eta` in place.
    pub fn step(&mut self, state: &mut CavityState, eta: f64, drive: StepDrive<'_>) {
        let half = 0.5 * eta;
        let [k1, k2, k3, k4] = &mut self.k;
        let probe = &mut self.probe;
        let r = &self.rates;
        let det = &self.detunings;

        eval_into(r, det, state, drive.input[0], drive.add[0], k1);
        probe.set_axpy(state, half, k1);
        eval_into(r, det, probe, drive.input[1], drive.add[1], k2);
        probe.set_axpy(state, half, k2);
        eval_into(r, det, probe, drive.input[1], drive.add[1], k3);
        probe.set_axpy(state, eta, k3);
        eval_into(r, det, probe, drive.input[2], drive.add[2], k4);

        let [w1, w2, w3, w4] = self.weights.0;
        for i in 0..state.a.len() {
            state.a[i] += (k1.a[i] * w1 + k2.a[i] * w2 + k3.a[i] * w3 + k4.a[i] * w4) * eta;
        }
        state.delta_t +=
            eta * (w1 * k1.delta_t + w2 * k2.delta_t + w3 * k3.delta_t + w4 * k4.delta_t);
        state.delta_n +=
            eta * (w1 * k1.delta_n + w2 * k2.delta_n + w3 * k3.delta_n + w4 * k4.delta_n);
    }
}

/// Drive tuple returned by the closure passed to [`rk4_step`]:
/// per-pump input fields and per-pump add-port fields.
pub type DriveSample = (Vec<Complex64>, Vec<Complex64>);

/// One classical RK4 step from `t` with the drive sampled at `t`, `t + η/2`
/// and `t + η`.
pub fn rk4_step<F>(
    state: &CavityState,
    t: f64,
    eta: f64,
    mut drive_fn: F,
    params: &CavityParams,
    detunings: &[f64],
) -> Result<CavityState>
where
    F: FnMut(f64) -> DriveSample,
{
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "eta must be positive, got {eta}"
        )));
    }
    if detunings.len() != state.pumps() {
        return Err(Error::LengthMismatch(format!(
            "{} detunings for {} pumps",
            detunings.len(),
            state.pumps()
        )));
    }
    let samples = [drive_fn(t), drive_fn(t + 0.5 * eta), drive_fn(t + eta)];
    for (input, add) in &samples {
        if input.len() != state.pumps() || add.len() != state.pumps() {
            return Err(Error::LengthMismatch(
                "drive tuple does not match pump count".into(),
            ));
        }
    }
    let drive = StepDrive {
        input: [&samples[0].0, &samples[1].0, &samples[2].0],
        add: [&samples[0].1, &samples[1].1, &samples[2].1],
    };
    let mut next = state.clone();
    Integrator::new(params, detunings).step(&mut next, eta, drive);
    if !next.is_finite() {
        return Err(Error::Divergence {
            step: 0,
            quantity: "non-finite state after RK4 step".into(),
        });
    }
    Ok(next)
}
