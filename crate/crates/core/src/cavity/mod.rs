//! Coupled-mode model of a silicon add-drop microring driven by several
//! pumps, each on its own resonance.
//!
//! For pump `i` with detuning `δ_i`:
//!
//! ```text
//! da_i/dt = [i(δ_i + δω_NL) − Γ_tot/2]·a_i + iκ·(s_in,i + s_add,i)
//! Γ_tot   = 1/τ_i + 2/τ_c + Γ_TPA + Γ_FCA
//! Γ_TPA   = β_TPA·c²/(n_g²·V_TPA)·U,    Γ_FCA = σ_FCA·c/n_g·ΔN
//! dΔN/dt  = −ΔN/τ_car + β_TPA·c²/(2ħω₀·n_g²·V_FCA²)·U²
//! dΔT/dt  = −ΔT/τ_th + (1/τ_i + Γ_TPA + Γ_FCA)·U / (m·c_p)
//! ```
//!
//! with `U = Σ|a_i|²`, `κ = sqrt(1/τ_c)` and
//! `δω_NL = (ω₀/n_Si)·(dn/dT·ΔT + dn/dN·ΔN)`. Pumps interact only through
//! `U`, `ΔT` and `ΔN`.

mod dynamics;
mod params;
mod simulate;
mod steady;
pub mod validate;

pub(crate) use dynamics::stored_energy;
pub use dynamics::{
    derivatives, rk4_step, CavityState, DriveSample, Integrator, Rk4Weights, StepDrive,
};
pub use params::{nonlinear_shift, CavityParams, HBAR, SPEED_OF_LIGHT};
pub use simulate::{simulate, simulate_with, FeedbackConfig, PortRecord, SimOptions, StepOutput};
pub use steady::{linear_steady_state, SteadyState};
