use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Physical constants and rates of the add-drop microring model.
///
/// Every physics symbol used by the simulator lives here. Values are SI;
/// serialized keys carry the unit.
/// The defaults describe a ~7 µm silicon ring with a loaded linewidth of
/// about 1 GHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CavityParams {
    /// Angular resonance frequency, rad/s.
    #[serde(rename = "omega0_rad_s")]
    pub omega0: f64,
    /// Intrinsic photon lifetime (linear loss), s.
    #[serde(rename = "tau_intrinsic_s")]
    pub tau_intrinsic: f64,
    /// Per-port coupling lifetime, shared by the input and drop buses, s.
    #[serde(rename = "tau_couple_s")]
    pub tau_couple: f64,
    pub n_si: f64,
    pub n_g: f64,
    /// Thermo-optic coefficient, 1/K.
    #[serde(rename = "dn_dt_per_k")]
    pub dn_dt: f64,
    /// Free-carrier dispersion coefficient, m³ (negative).
    #[serde(rename = "dn_dn_m3")]
    pub dn_dn: f64,
    /// Two-photon absorption coefficient, m/W.
    #[serde(rename = "beta_tpa_m_per_w")]
    pub beta_tpa: f64,
    /// Free-carrier absorption cross-section, m².
    #[serde(rename = "sigma_fca_m2")]
    pub sigma_fca: f64,
    #[serde(rename = "v_tpa_m3")]
    pub v_tpa: f64,
    #[serde(rename = "v_fca_m3")]
    pub v_fca: f64,
    #[serde(rename = "tau_thermal_s")]
    pub tau_thermal: f64,
    #[serde(rename = "tau_carrier_s")]
    pub tau_carrier: f64,
    /// Effective mass times specific heat, J/K.
    #[serde(rename = "thermal_mass_j_per_k")]
    pub thermal_mass: f64,
}

impl Default for CavityParams {
    fn default() -> Self {
        Self {
            omega0: 2.0 * std::f64::consts::PI * 193.41e12,
            tau_intrinsic: 300e-12,
            tau_couple: 600e-12,
            n_si: 3.485,
            n_g: 4.2,
            dn_dt: 1.86e-4,
            dn_dn: -4.2e-27,
            beta_tpa: 8.4e-12,
            sigma_fca: 1.45e-21,
            v_tpa: 5e-18,
            v_fca: 5e-18,
            tau_thermal: 65e-9,
            tau_carrier: 10e-9,
            thermal_mass: 8.5e-12,
        }
    }
}

impl CavityParams {
    /// Total linear energy decay rate `1/tau_intrinsic + 2/tau_couple`, 1/s.
    pub fn gamma_linear(&self) -> f64 {
        1.0 / self.tau_intrinsic + 2.0 / self.tau_couple
    }

    /// Field coupling coefficient between a bus and the mode, `sqrt(1/tau_couple)`.
    ///
    /// Each port leaks energy at rate `1/tau_couple`, so the two buses
    /// together account for the `2/tau_couple` term of [`gamma_linear`](Self::gamma_linear).
    pub fn coupling(&self) -> f64 {
        (1.0 / self.tau_couple).sqrt()
    }

    /// A copy with TPA, FCA and both index nonlinearities switched off.
    pub fn linearized(&self) -> Self {
        Self {
            dn_dt: 0.0,
            dn_dn: 0.0,
            beta_tpa: 0.0,
            sigma_fca: 0.0,
            ..*self
        }
    }

    /// Checks the physical invariants.
    ///
    /// `dn_dt` and `dn_dn` may also be exactly zero so that a linearized
    /// copy still validates.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("omega0", self.omega0),
            ("tau_intrinsic", self.tau_intrinsic),
            ("tau_couple", self.tau_couple),
            ("n_si", self.n_si),
            ("n_g", self.n_g),
            ("v_tpa", self.v_tpa),
            ("v_fca", self.v_fca),
            ("tau_thermal", self.tau_thermal),
            ("tau_carrier", self.tau_carrier),
            ("thermal_mass", self.thermal_mass),
        ];
        for (name, value) in positive {
            // tau_intrinsic = inf is the lossless limit and is allowed.
            let ok = value > 0.0 && (value.is_finite() || name == "tau_intrinsic");
            if !ok {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be strictly positive, got {value}"
                )));
            }
        }
        if !(self.dn_dt >= 0.0 && self.dn_dt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "dn_dt must be positive, got {}",
                self.dn_dt
            )));
        }
        if !(self.dn_dn <= 0.0 && self.dn_dn.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "dn_dn must be negative, got {}",
                self.dn_dn
            )));
        }
        if !(self.beta_tpa >= 0.0 && self.beta_tpa.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "beta_tpa must be non-negative, got {}",
                self.beta_tpa
            )));
        }
        if !(self.sigma_fca >= 0.0 && self.sigma_fca.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma_fca must be non-negative, got {}",
                self.sigma_fca
            )));
        }
        let gamma = self.gamma_linear();
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "linear decay rate must be finite and positive, got {gamma}"
            )));
        }
        Ok(())
    }
}

/// Rate constants derived once from [`CavityParams`] for the inner loop.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Rates {
    pub gamma_lin: f64,
    pub inv_tau_intrinsic: f64,
    pub coupling: f64,
    /// Γ_TPA per joule of stored energy.
    pub tpa_per_energy: f64,
    /// Γ_FCA per carrier density.
    pub fca_per_density: f64,
    /// Carrier generation per U².
    pub carrier_gen: f64,
    pub shift_per_kelvin: f64,
    pub shift_per_density: f64,
    pub inv_tau_thermal: f64,
    pub inv_tau_carrier: f64,
    pub inv_thermal_mass: f64,
}

impl Rates {
    pub fn new(p: &CavityParams) -> Self {
        let c = SPEED_OF_LIGHT;
        let ng2 = p.n_g * p.n_g;
        Self {
            gamma_lin: p.gamma_linear(),
            inv_tau_intrinsic: 1.0 / p.tau_intrinsic,
            coupling: p.coupling(),
            tpa_per_energy: p.beta_tpa * c * c / (ng2 * p.v_tpa),
            fca_per_density: p.sigma_fca * c / p.n_g,
            carrier_gen: p.beta_tpa * c * c / (2.0 * HBAR * p.omega0 * ng2 * p.v_fca * p.v_fca),
            shift_per_kelvin: p.omega0 / p.n_si * p.dn_dt,
            shift_per_density: p.omega0 / p.n_si * p.dn_dn,
            inv_tau_thermal: 1.0 / p.tau_thermal,
            inv_tau_carrier: 1.0 / p.tau_carrier,
            inv_thermal_mass: 1.0 / p.thermal_mass,
        }
    }
}

/// Nonlinear resonance shift `(omega0/n_si)·(dn_dT·ΔT + dn_dN·ΔN)`, rad/s.
///
/// Adds to the pump detuning: the effective detuning seen by the modal
/// equation is `δ_pump + shift`.
pub fn nonlinear_shift(delta_t: f64, delta_n: f64, params: &CavityParams) -> f64 {
    params.omega0 / params.n_si * (params.dn_dt * delta_t + params.dn_dn * delta_n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_shift_at_rest() {
        assert_eq!(nonlinear_shift(0.0, 0.0, &CavityParams::default()), 0.0);
    }

    #[test]
    fn one_kelvin_shift() {
        // 193.41e12 * 1.86e-4 / 3.485 = 1.03225e10 Hz
        let shift = nonlinear_shift(1.0, 0.0, &CavityParams::default());
        let hz = shift / (2.0 * PI);
        assert!((hz - 1.032e10).abs() / 1.032e10 < 1e-3, "{hz}");
    }

    #[test]
    fn carriers_shift_opposite_to_heat() {
        let p = CavityParams::default();
        let heat = nonlinear_shift(1.0, 0.0, &p);
        let carriers = nonlinear_shift(0.0, 1e23, &p);
        assert!(heat > 0.0 && carriers < 0.0);
    }

    #[test]
    fn loaded_linewidth_near_one_ghz() {
        let fwhm = CavityParams::default().gamma_linear() / (2.0 * PI);
        assert!((fwhm - 1.061e9).abs() < 1e6, "{fwhm}");
    }

    #[test]
    fn rejects_non_positive_coupling() {
        let p = CavityParams {
            tau_couple: 0.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        let p = CavityParams {
            tau_couple: -1e-12,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn rejects_wrong_signs() {
        let p = CavityParams {
            dn_dn: 1e-27,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        let p = CavityParams {
            beta_tpa: -1.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn lossless_limit_validates() {
        let p = CavityParams {
            tau_intrinsic: f64::INFINITY,
            ..Default::default()
        };
        p.validate().unwrap();
        assert_eq!(p.gamma_linear(), 2.0 / p.tau_couple);
    }
}
