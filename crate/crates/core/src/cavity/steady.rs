use num_complex::Complex64;

use super::params::CavityParams;

/// Steady state of the linearized cavity under a CW drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    /// Stored energy `|a|²`, J.
    pub energy: f64,
    pub drop_power: f64,
    pub through_power: f64,
}

/// Analytic add-drop response with all nonlinearities off:
/// `a = iκ·s_in / (Γ_lin/2 − iδ)`, `s_drop = iκ·a`, `s_thru = s_in + iκ·a`.
pub fn linear_steady_state(params: &CavityParams, detuning: f64, input_power: f64) -> SteadyState {
    let s_in = Complex64::new(input_power.max(0.0).sqrt(), 0.0);
    let ikappa = Complex64::new(0.0, params.coupling());
    let a = ikappa * s_in / Complex64::new(0.5 * params.gamma_linear(), -detuning);
    let drop = ikappa * a;
    let through = s_in + drop;
    SteadyState {
        energy: a.norm_sqr(),
        drop_power: drop.norm_sqr(),
        through_power: through.norm_sqr(),
    }
}
