use serde::{Deserialize, Serialize};

use crate::constants::{BOHR_MAGNETON, BOLTZMANN, POLARIZATION_SLOPE_T_PER_K};
use crate::error::{Error, Result};

/// Coefficients of the two relaxation channels active below 1 K.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxationParams {
    /// Flip-flop coefficient, Hz.
    pub w_ff: f64,
    /// Direct-process coefficient, Hz·T⁻⁵.
    pub w_d: f64,
    /// Minimum attainable spin temperature, K.
    pub t_min: f64,
}

impl RelaxationParams {
    pub fn new(w_ff: f64, w_d: f64, t_min: f64) -> Result<Self> {
        for (name, v) in [("w_ff", w_ff), ("w_d", w_d), ("t_min", t_min)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::input(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(Self { w_ff, w_d, t_min })
    }
}

fn check_temperature(ts: f64) -> Result<()> {
    if !(ts > 0.0 && ts.is_finite()) {
        return Err(Error::input(format!(
            "spin temperature must be positive, got {ts}"
        )));
    }
    Ok(())
}

fn check_field(b: f64) -> Result<()> {
    if !(b >= 0.0 && b.is_finite()) {
        return Err(Error::input(format!("field must be >= 0, got {b}")));
    }
    Ok(())
}

/// Zeeman energy over twice the thermal energy, `g μ_B B / (2 k_B Ts)`.
pub fn reduced_splitting(g_eff: f64, b: f64, ts: f64) -> f64 {
    g_eff * BOHR_MAGNETON * b / (2.0 * BOLTZMANN * ts)
}

/// Flip-flop rate `w_ff · tanh²(g μ_B B / 2 k_B Ts)`, Hz.
pub fn flip_flop_rate(g_eff: f64, b: f64, ts: f64, w_ff: f64) -> Result<f64> {
    check_temperature(ts)?;
    check_field(b)?;
    Ok(w_ff * reduced_splitting(g_eff, b, ts).tanh().powi(2))
}

/// Direct one-phonon rate `w_d · g⁵ B⁵ · coth(g μ_B B / 2 k_B Ts)`, Hz.
/// Returns the limit 0 at B = 0.
pub fn direct_rate(g_eff: f64, b: f64, ts: f64, w_d: f64) -> Result<f64> {
    check_temperature(ts)?;
    check_field(b)?;
    if b == 0.0 {
        return Ok(0.0);
    }
    let x = reduced_splitting(g_eff, b, ts);
    Ok(w_d * (g_eff * b).powi(5) / x.tanh())
}

/// Spin temperature reached for cryostat temperature `t`,
/// `t_min · sqrt(1 + (t/t_min)²)`.
pub fn effective_temperature(t: f64, t_min: f64) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::input(format!(
            "cryostat temperature must be >= 0, got {t}"
        )));
    }
    if !(t_min > 0.0 && t_min.is_finite()) {
        return Err(Error::input(format!("t_min must be positive, got {t_min}")));
    }
    Ok(t_min.hypot(t))
}

/// Both channels evaluated at a known spin temperature.
pub fn rate_at_spin_temperature(
    params: &RelaxationParams,
    g_eff: f64,
    b: f64,
    ts: f64,
) -> Result<RateBreakdown> {
    let flip_flop = flip_flop_rate(g_eff, b, ts, params.w_ff)?;
    let direct = direct_rate(g_eff, b, ts, params.w_d)?;
    Ok(RateBreakdown {
        spin_temperature: ts,
        flip_flop,
        direct,
        total: flip_flop + direct,
    })
}

/// Total rate at cryostat temperature `t_cryostat`, using the effective
/// spin temperature.
pub fn total_relaxation_rate(
    params: &RelaxationParams,
    g_eff: f64,
    b: f64,
    t_cryostat: f64,
) -> Result<RateBreakdown> {
    let ts = effective_temperature(t_cryostat, params.t_min)?;
    rate_at_spin_temperature(params, g_eff, b, ts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBreakdown {
    pub spin_temperature: f64,
    pub flip_flop: f64,
    pub direct: f64,
    pub total: f64,
}

/// Field below which the ensemble is not polarized, `2 T/K · Ts`.
pub fn polarization_field(ts: f64) -> Result<f64> {
    if !(ts >= 0.0 && ts.is_finite()) {
        return Err(Error::input(format!(
            "spin temperature must be >= 0, got {ts}"
        )));
    }
    Ok(POLARIZATION_SLOPE_T_PER_K * ts)
}

/// One row of a (B, T) rate scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateScanRow {
    pub field: f64,
    pub cryostat_temperature: f64,
    pub rates: RateBreakdown,
}

/// Evaluates the total rate on the outer product of fields and cryostat
/// temperatures, field-major.
pub fn rate_scan(
    params: &RelaxationParams,
    g_eff: f64,
    fields: &[f64],
    temperatures: &[f64],
) -> Result<Vec<RateScanRow>> {
    use rayon::prelude::*;
    let pairs: Vec<(f64, f64)> = fields
        .iter()
        .flat_map(|&b| temperatures.iter().map(move |&t| (b, t)))
        .collect();
    pairs
        .par_iter()
        .map(|&(b, t)| {
            Ok(RateScanRow {
                field: b,
                cryostat_temperature: t,
                rates: total_relaxation_rate(params, g_eff, b, t)?,
            })
        })
        .collect()
}
