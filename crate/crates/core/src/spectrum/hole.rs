use serde::{Deserialize, Serialize};

use super::lineshape::{lorentzian, LorentzianLine};
use crate::error::{Error, Result};
use crate::fit::fit_lorentzian;

/// A spectral hole: Lorentzian dip of fractional `depth` and FWHM `width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoleProfileParams {
    /// Hz
    pub center: f64,
    /// FWHM, Hz
    pub width: f64,
    /// Fraction of the parent peak amplitude, in [0, 1].
    pub depth: f64,
    /// Spectral-diffusion rate, Hz. Carried as a parameter only.
    pub gamma_sd: f64,
}

impl HoleProfileParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.depth) {
            return Err(Error::input(format!(
                "hole depth must lie in [0, 1], got {}",
                self.depth
            )));
        }
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::input(format!(
                "hole width must be > 0, got {}",
                self.width
            )));
        }
        if !self.center.is_finite() {
            return Err(Error::input("hole center must be finite"));
        }
        Ok(())
    }
}

/// Parent absorption with a hole carved in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoleProfile {
    pub values: Vec<f64>,
    /// Grid points where the subtraction went negative and was clipped to 0.
    pub clipped: usize,
}

/// `parent - depth·A_parent·L(f - center; width)`, clipped at zero.
pub fn apply_spectral_hole(
    parent: &LorentzianLine,
    hole: &HoleProfileParams,
    grid: &[f64],
) -> Result<HoleProfile> {
    hole.validate()?;
    let mut clipped = 0;
    let values = grid
        .iter()
        .map(|&f| {
            let v = parent.eval(f)
                - lorentzian(f - hole.center, hole.width, hole.depth * parent.amplitude);
            if v < 0.0 {
                clipped += 1;
                0.0
            } else {
                v
            }
        })
        .collect();
    Ok(HoleProfile { values, clipped })
}

/// The hole signal at time `t` after burning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoleSnapshot {
    pub time: f64,
    /// Hole depth per grid point, in units of the parent peak.
    pub depth: Vec<f64>,
    /// FWHM of a Lorentzian refit to `depth`; `None` if the refit failed.
    pub fitted_width: Option<f64>,
}

/// Lets every point of the hole relax at its own rate: the depth at
/// detuning δ = f - center decays as `exp(-R(δ) t)`.
pub fn evolve_hole<R>(
    hole: &HoleProfileParams,
    rate_profile: R,
    t: f64,
    grid: &[f64],
) -> Result<HoleSnapshot>
where
    R: Fn(f64) -> f64,
{
    hole.validate()?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::input(format!("time must be >= 0, got {t}")));
    }
    let mut depth = Vec::with_capacity(grid.len());
    for &f in grid {
        let delta = f - hole.center;
        let rate = rate_profile(delta);
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::input(format!(
                "relaxation rate must be >= 0, got {rate} at detuning {delta} Hz"
            )));
        }
        depth.push(lorentzian(delta, hole.width, hole.depth) * (-rate * t).exp());
    }
    let fitted_width = if grid.len() >= 5 && hole.depth > 0.0 {
        fit_lorentzian(grid, &depth)
            .ok()
            .filter(|r| r.converged)
            .map(|r| r.value("fwhm"))
    } else {
        None
    };
    Ok(HoleSnapshot {
        time: t,
        depth,
        fitted_width,
    })
}

/// Piecewise rate: `inside` within the hole's half-maximum, `outside` beyond.
pub fn step_rate_profile(half_width: f64, inside: f64, outside: f64) -> impl Fn(f64) -> f64 {
    move |delta: f64| {
        if delta.abs() <= half_width {
            inside
        } else {
            outside
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::uniform_grid;

    fn parent() -> LorentzianLine {
        LorentzianLine {
            center: 3.296e9,
            fwhm: 52e6,
            amplitude: 1.0,
        }
    }

    fn grid() -> Vec<f64> {
        uniform_grid(3.296e9 - 200e6, 3.296e9 + 200e6, 801).unwrap()
    }

    #[test]
    fn zero_depth_leaves_parent() {
        let hole = HoleProfileParams {
            center: 3.296e9,
            width: 30e6,
            depth: 0.0,
            gamma_sd: 1e3,
        };
        let p = apply_spectral_hole(&parent(), &hole, &grid()).unwrap();
        assert_eq!(p.values, parent().sample(&grid()));
        assert_eq!(p.clipped, 0);
    }

    #[test]
    fn centered_hole_depth() {
        let hole = HoleProfileParams {
            center: 3.296e9,
            width: 0.65 * 52e6,
            depth: 0.075,
            gamma_sd: 1e3,
        };
        let g = grid();
        let p = apply_spectral_hole(&parent(), &hole, &g).unwrap();
        let mid = g.len() / 2;
        assert!((p.values[mid] - 0.925).abs() < 1e-12);
        let parent_vals = parent().sample(&g);
        assert!(p.values.iter().zip(&parent_vals).all(|(h, p)| h <= p));
    }

    #[test]
    fn off_center_dip_minimum() {
        // hole one parent width off-center: the dip (parent - holed) peaks
        // at the hole center
        let hole = HoleProfileParams {
            center: 3.296e9 + 52e6,
            width: 0.65 * 52e6,
            depth: 0.075,
            gamma_sd: 0.0,
        };
        let g = grid();
        let p = apply_spectral_hole(&parent(), &hole, &g).unwrap();
        let parent_vals = parent().sample(&g);
        let dip: Vec<f64> = parent_vals
            .iter()
            .zip(&p.values)
            .map(|(a, b)| a - b)
            .collect();
        let k = (0..dip.len())
            .max_by(|&a, &b| dip[a].total_cmp(&dip[b]))
            .unwrap();
        let step = g[1] - g[0];
        assert!((g[k] - hole.center).abs() <= step);
    }

    #[test]
    fn over_deep_hole_is_clipped() {
        let hole = HoleProfileParams {
            center: 3.296e9 + 100e6,
            width: 30e6,
            depth: 1.0,
            gamma_sd: 0.0,
        };
        let p = apply_spectral_hole(&parent(), &hole, &grid()).unwrap();
        assert!(p.clipped > 0);
        assert!(p.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn invalid_depth_is_rejected() {
        let hole = HoleProfileParams {
            center: 0.0,
            width: 1.0,
            depth: 1.5,
            gamma_sd: 0.0,
        };
        assert!(apply_spectral_hole(&parent(), &hole, &grid()).is_err());
    }

    #[test]
    fn evolve_identity_and_uniform_decay() {
        let hole = HoleProfileParams {
            center: 3.296e9,
            width: 34e6,
            depth: 0.075,
            gamma_sd: 1e3,
        };
        let g = grid();
        let s0 = evolve_hole(&hole, |_| 0.07, 0.0, &g).unwrap();
        let expect: Vec<f64> = g
            .iter()
            .map(|&f| lorentzian(f - hole.center, hole.width, hole.depth))
            .collect();
        assert_eq!(s0.depth, expect);
        let s = evolve_hole(&hole, |_| 0.07, 10.0, &g).unwrap();
        let w = s.fitted_width.unwrap();
        assert!((w / 34e6 - 1.0).abs() < 1e-6, "{w}");
        let mid = g.len() / 2;
        assert!((s.depth[mid] - 0.075 * (-0.7f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn faster_wings_narrow_the_hole() {
        let hole = HoleProfileParams {
            center: 3.296e9,
            width: 34e6,
            depth: 0.075,
            gamma_sd: 1e3,
        };
        let g = grid();
        let rate = step_rate_profile(17e6, 0.07, 0.14);
        let widths: Vec<f64> = [0.0, 5.0, 10.0, 20.0, 40.0]
            .iter()
            .map(|&t| {
                evolve_hole(&hole, &rate, t, &g)
                    .unwrap()
                    .fitted_width
                    .unwrap()
            })
            .collect();
        assert!(widths.windows(2).all(|w| w[1] < w[0]), "{widths:?}");
    }

    #[test]
    fn negative_rate_is_rejected() {
        let hole = HoleProfileParams {
            center: 0.0,
            width: 1.0,
            depth: 0.1,
            gamma_sd: 0.0,
        };
        assert!(evolve_hole(&hole, |_| -1.0, 1.0, &[-1.0, 0.0, 1.0]).is_err());
    }
}
