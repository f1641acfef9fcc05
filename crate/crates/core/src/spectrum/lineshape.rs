use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Field-dependent inhomogeneous linewidth, `Γ_FWHM = gamma0 + delta_gamma · B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinewidthModel {
    /// Zero-field FWHM, Hz.
    pub gamma0: f64,
    /// Hz per tesla.
    pub delta_gamma: f64,
}

impl LinewidthModel {
    pub fn new(gamma0: f64, delta_gamma: f64) -> Result<Self> {
        if !(gamma0 > 0.0 && gamma0.is_finite()) {
            return Err(Error::input(format!("gamma0 must be > 0, got {gamma0}")));
        }
        if !(delta_gamma >= 0.0 && delta_gamma.is_finite()) {
            return Err(Error::input(format!(
                "delta_gamma must be >= 0, got {delta_gamma}"
            )));
        }
        Ok(Self {
            gamma0,
            delta_gamma,
        })
    }
}

impl Default for LinewidthModel {
    /// S1b line in Er:YSO: 17 MHz at zero field, 0.21 MHz/mT.
    fn default() -> Self {
        Self {
            gamma0: 17e6,
            delta_gamma: 0.21e9,
        }
    }
}

pub fn linewidth_at(model: &LinewidthModel, b: f64) -> Result<f64> {
    if !(b >= 0.0 && b.is_finite()) {
        return Err(Error::input(format!("field must be >= 0, got {b}")));
    }
    Ok(model.gamma0 + model.delta_gamma * b)
}

/// Peak-normalized Lorentzian, `A (Γ/2)² / (δ² + (Γ/2)²)`.
#[inline]
pub fn lorentzian(delta: f64, fwhm: f64, amplitude: f64) -> f64 {
    let hw2 = 0.25 * fwhm * fwhm;
    amplitude * hw2 / (delta * delta + hw2)
}

/// A single Lorentzian line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianLine {
    pub center: f64,
    pub fwhm: f64,
    pub amplitude: f64,
}

impl LorentzianLine {
    pub fn eval(&self, f: f64) -> f64 {
        lorentzian(f - self.center, self.fwhm, self.amplitude)
    }

    pub fn sample(&self, grid: &[f64]) -> Vec<f64> {
        grid.iter().map(|&f| self.eval(f)).collect()
    }
}

/// `n` evenly spaced points from `start` to `stop` inclusive.
pub fn uniform_grid(start: f64, stop: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !(stop > start) || !start.is_finite() || !stop.is_finite() {
        return Err(Error::input(format!(
            "grid needs start < stop and at least 2 points (got {start}..{stop}, n = {n})"
        )));
    }
    let step = (stop - start) / (n - 1) as f64;
    Ok((0..n).map(|k| start + k as f64 * step).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linewidth_law_values() {
        let m = LinewidthModel::default();
        assert_eq!(linewidth_at(&m, 0.0).unwrap(), 17e6);
        assert!((linewidth_at(&m, 0.167).unwrap() - 52.07e6).abs() < 1.0);
        assert!((linewidth_at(&m, 0.185).unwrap() - 55.85e6).abs() < 1.0);
        assert!(linewidth_at(&m, -0.1).is_err());
    }

    #[test]
    fn lorentzian_shape() {
        assert_eq!(lorentzian(0.0, 2.0, 3.0), 3.0);
        assert!((lorentzian(1.0, 2.0, 3.0) - 1.5).abs() < 1e-15);
        assert!((lorentzian(-1.0, 2.0, 3.0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn lorentzian_area_matches_quadrature() {
        // trapezoid on ±4000 Γ plus the analytic tail beyond
        let (a, g) = (1.7, 52e6);
        let half = 4000.0 * g;
        let n = 2_000_001;
        let h = 2.0 * half / (n - 1) as f64;
        let mut sum = 0.0;
        for k in 0..n {
            let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
            sum += w * lorentzian(-half + k as f64 * h, g, a);
        }
        let integral = sum * h;
        let exact = std::f64::consts::PI * a * g / 2.0;
        assert!((integral / exact - 1.0).abs() < 1e-3);
    }

    #[test]
    fn model_validation() {
        assert!(LinewidthModel::new(0.0, 1.0).is_err());
        assert!(LinewidthModel::new(1.0, -1.0).is_err());
    }
}
