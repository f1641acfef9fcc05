use serde::{Deserialize, Serialize};

use crate::constants::BOHR_MAGNETON_HZ_PER_T;
use crate::error::{Error, Result};

/// Rotating-wave halving of a linearly polarized drive.
pub const DEFAULT_CONVENTION_FACTOR: f64 = 0.5;

/// Field per root power at the spins, T/√W, calibrated so that 45 fW of
/// acting power gives a 0.35 nT RMS drive field.
pub const DEFAULT_KAPPA: f64 = 1.65e-3;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts / 1e-3).log10()
}

/// Rabi frequency `ξ · g_eff · (μ_B/h) · B_ac`, Hz.
pub fn rabi_frequency(g_eff: f64, b_ac: f64, convention_factor: f64) -> Result<f64> {
    if !(b_ac >= 0.0 && b_ac.is_finite()) {
        return Err(Error::input(format!("B_ac must be >= 0, got {b_ac}")));
    }
    Ok(convention_factor * g_eff * BOHR_MAGNETON_HZ_PER_T * b_ac)
}

/// Microwave chain from the source to the spins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub source_power_dbm: f64,
    /// Gains in dB; attenuators are negative.
    pub attenuation_stages: Vec<f64>,
    pub mode_coupling_db: f64,
    /// T/√W
    pub kappa: f64,
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        if !self.source_power_dbm.is_finite() || !self.mode_coupling_db.is_finite() {
            return Err(Error::input("link budget powers must be finite"));
        }
        if self.attenuation_stages.iter().any(|s| !s.is_finite()) {
            return Err(Error::input("attenuation stages must be finite"));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::input(format!(
                "kappa must be > 0, got {}",
                self.kappa
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudgetResult {
    pub acting_dbm: f64,
    pub acting_watts: f64,
    /// RMS drive field at the spins, T.
    pub b_ac: f64,
    /// Hz
    pub rabi: f64,
}

pub fn link_budget(
    lb: &LinkBudget,
    g_eff: f64,
    convention_factor: f64,
) -> Result<LinkBudgetResult> {
    lb.validate()?;
    let acting_dbm =
        lb.source_power_dbm + lb.attenuation_stages.iter().sum::<f64>() + lb.mode_coupling_db;
    let acting_watts = dbm_to_watts(acting_dbm);
    let b_ac = lb.kappa * acting_watts.sqrt();
    let rabi = rabi_frequency(g_eff, b_ac, convention_factor)?;
    Ok(LinkBudgetResult {
        acting_dbm,
        acting_watts,
        b_ac,
        rabi,
    })
}
