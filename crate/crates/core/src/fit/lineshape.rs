use super::engine::{nlls_fit, FitResult, ModelSpec, ParamSpec};
use super::montecarlo::median;
use crate::error::{Error, Result};
use crate::spectrum::lorentzian;

/// Peak-to-median ratio below which data are treated as peakless.
pub const PEAKLESS_RATIO: f64 = 1.2;

/// `offset + amplitude · (Γ/2)² / ((f - center)² + (Γ/2)²)`
pub fn lorentzian_model(f: f64, p: &[f64]) -> f64 {
    p[3] + lorentzian(f - p[0], p[1], p[2])
}

/// Fits a single Lorentzian with constant offset. Parameters:
/// `center`, `fwhm`, `amplitude`, `offset`.
///
/// The starting point is the grid argmax for the center, the span between
/// half-maximum crossings for the width, and the minimum for the offset.
pub fn fit_lorentzian(freq: &[f64], amp: &[f64]) -> Result<FitResult> {
    if freq.len() != amp.len() {
        return Err(Error::input("frequency and amplitude lengths differ"));
    }
    if freq.len() < 5 {
        return Err(Error::input(format!(
            "a Lorentzian fit needs at least 5 points, got {}",
            freq.len()
        )));
    }
    let (imax, &peak) = amp
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let floor = amp.iter().copied().fold(f64::INFINITY, f64::min);
    let med = median(amp);
    let peakless = !(peak > 0.0) || (med > 0.0 && peak / med < PEAKLESS_RATIO) || peak == floor;

    let half = floor + 0.5 * (peak - floor);
    let mut lo = imax;
    while lo > 0 && amp[lo] > half {
        lo -= 1;
    }
    let mut hi = imax;
    while hi + 1 < amp.len() && amp[hi] > half {
        hi += 1;
    }
    let step = (freq[freq.len() - 1] - freq[0]).abs() / (freq.len() - 1) as f64;
    let fwhm0 = (freq[hi] - freq[lo]).abs().max(step);

    let spec = ModelSpec::new("lorentzian")
        .param(ParamSpec::free("center", freq[imax]).typical(fwhm0))
        .param(ParamSpec::positive("fwhm", fwhm0))
        .param(ParamSpec::free("amplitude", peak - floor))
        .param(ParamSpec::free("offset", floor));
    let mut r = nlls_fit(&spec, &lorentzian_model, freq, amp, None)?;
    if peakless {
        r.fail(format!(
            "no peak: max/median = {:.3} < {PEAKLESS_RATIO}",
            peak / med
        ));
    }
    Ok(r)
}
