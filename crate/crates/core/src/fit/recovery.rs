use super::engine::{nlls_fit, FitResult, ModelSpec, ParamSpec};
use super::linear::solve_normal;
use crate::dynamics::RecoveryTrace;
use crate::error::{Error, Result};

/// `amplitude · exp(-rate · t) + offset`
pub fn exponential_model(t: f64, p: &[f64]) -> f64 {
    p[0] * (-p[1] * t).exp() + p[2]
}

/// Fits a single-exponential recovery. Parameters: `amplitude`, `rate`,
/// `offset`; derived: `tau = 1/rate`.
pub fn fit_exponential_recovery(trace: &RecoveryTrace) -> Result<FitResult> {
    let t = &trace.times;
    let y = &trace.hole_amplitude;
    if t.len() != y.len() {
        return Err(Error::input("trace columns differ in length"));
    }
    if t.len() < 6 {
        return Err(Error::input(format!(
            "exponential recovery needs at least 6 points, got {}",
            t.len()
        )));
    }
    if t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::input("trace times must be ascending"));
    }
    let span = t[t.len() - 1] - t[0];
    let min_dt = t
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);

    // rate grid with amplitude and offset solved linearly at each node
    let (lo, hi) = ((0.1 / span).ln(), (10.0 / min_dt).ln());
    let mut best = (f64::INFINITY, 1.0 / span, 0.0, 0.0);
    for k in 0..=200 {
        let rate = (lo + (hi - lo) * k as f64 / 200.0).exp();
        let basis: Vec<[f64; 2]> = t
            .iter()
            .map(|&ti| [(-rate * (ti - t[0])).exp(), 1.0])
            .collect();
        if let Some([a, c]) = solve_normal(&basis, y, None) {
            let sse: f64 = basis
                .iter()
                .zip(y)
                .map(|(b, yi)| (yi - a * b[0] - c * b[1]).powi(2))
                .sum();
            if sse < best.0 {
                // shift the amplitude back to t = 0
                best = (sse, rate, a * (rate * t[0]).exp(), c);
            }
        }
    }
    let (_, rate0, a0, c0) = best;
    let spec = ModelSpec::new("exponential_recovery")
        .param(ParamSpec::free("amplitude", a0))
        .param(ParamSpec::positive("rate", rate0))
        .param(ParamSpec::free("offset", c0));
    let mut r = nlls_fit(&spec, &exponential_model, t, y, None)?;
    let rate = r.value("rate");
    let sigma_rate = r.sigma_of("rate").unwrap_or(0.0);
    r.derived
        .push(("tau".into(), 1.0 / rate, sigma_rate / (rate * rate)));
    if r.params[0] == 0.0 || r.sigma[0] > r.params[0].abs() {
        r.fail("no decaying component resolved");
    }
    Ok(r)
}
