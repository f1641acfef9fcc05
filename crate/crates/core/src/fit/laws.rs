use super::engine::{nlls_fit, FitResult, ModelSpec, ParamSpec};
use super::linear::{solve_nonnegative, solve_normal};
use crate::constants::{BOHR_MAGNETON, BOLTZMANN};
use crate::dynamics::{direct_rate, effective_temperature, flip_flop_rate};
use crate::error::{Error, Result};

/// Covariance condition number above which a relaxation fit is reported
/// as degenerate.
pub const DEGENERACY_CONDITION: f64 = 1e8;

/// `gamma0 + delta_gamma · B`
pub fn linewidth_model(b: f64, p: &[f64]) -> f64 {
    p[0] + p[1] * b
}

/// Weighted straight-line fit of FWHM against field. Parameters: `gamma0`
/// (Hz), `delta_gamma` (Hz/T). `sigmas` are per-point FWHM uncertainties.
pub fn fit_linewidth_law(
    fields: &[f64],
    widths: &[f64],
    sigmas: Option<&[f64]>,
) -> Result<FitResult> {
    if fields.len() != widths.len() {
        return Err(Error::input("field and width lengths differ"));
    }
    let mut distinct = fields.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::input(
            "the linewidth law needs at least two distinct field values",
        ));
    }
    let weights: Option<Vec<f64>> = match sigmas {
        Some(s) => {
            if s.len() != fields.len() || s.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::input("sigmas must be positive, one per point"));
            }
            Some(s.iter().map(|v| 1.0 / (v * v)).collect())
        }
        None => None,
    };
    let basis: Vec<[f64; 2]> = fields.iter().map(|&b| [1.0, b]).collect();
    let [g0, slope] = solve_normal(&basis, widths, weights.as_deref()).unwrap_or([0.0, 0.0]);
    let spec = ModelSpec::new("linewidth_law")
        .param(ParamSpec::free("gamma0", g0))
        .param(ParamSpec::free("delta_gamma", slope));
    nlls_fit(&spec, &linewidth_model, fields, widths, weights.as_deref())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AreaForm {
    /// `scale · eˣ/(1+eˣ)`, x = g μ_B B / k_B Ts
    #[default]
    Logistic,
    /// `scale · tanh(x/2)`, the lower-minus-upper population difference.
    PopulationDifference,
}

impl AreaForm {
    pub fn shape(self, x: f64) -> f64 {
        match self {
            // eˣ/(1+eˣ) written to avoid overflow
            AreaForm::Logistic => 1.0 / (1.0 + (-x).exp()),
            AreaForm::PopulationDifference => (0.5 * x).tanh(),
        }
    }
}

/// Line area versus field for a two-level system at spin temperature `ts`.
pub fn boltzmann_area(b: f64, g_eff: f64, ts: f64, scale: f64, form: AreaForm) -> f64 {
    scale * form.shape(g_eff * BOHR_MAGNETON * b / (BOLTZMANN * ts))
}

fn log_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(move |k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
}

/// Fits line areas against field to recover the spin temperature.
/// Parameters: `ts` (K), `scale`.
pub fn fit_boltzmann_temperature(
    fields: &[f64],
    areas: &[f64],
    g_eff: f64,
    form: AreaForm,
) -> Result<FitResult> {
    if fields.len() != areas.len() {
        return Err(Error::input("field and area lengths differ"));
    }
    if fields.len() < 4 {
        return Err(Error::input(format!(
            "spin-temperature fit needs at least 4 field points, got {}",
            fields.len()
        )));
    }
    let bmin = fields.iter().copied().fold(f64::INFINITY, f64::min);
    let bmax = fields.iter().copied().fold(0.0, f64::max);
    if !(bmin > 0.0 && bmax >= 2.0 * bmin) {
        return Err(Error::input(
            "field points must be positive and span at least a factor of 2",
        ));
    }
    let (ts_lo, ts_hi) = (1e-5, 1e3);
    let mut best = (f64::INFINITY, 0.1, 1.0);
    for ts in log_grid(1e-4, 1e2, 241) {
        let shape: Vec<f64> = fields
            .iter()
            .map(|&b| boltzmann_area(b, g_eff, ts, 1.0, form))
            .collect();
        let den: f64 = shape.iter().map(|s| s * s).sum();
        if den == 0.0 {
            continue;
        }
        let scale = shape.iter().zip(areas).map(|(s, a)| s * a).sum::<f64>() / den;
        let sse: f64 = shape
            .iter()
            .zip(areas)
            .map(|(s, a)| (a - scale * s).powi(2))
            .sum();
        if sse < best.0 {
            best = (sse, ts, scale);
        }
    }
    let model = move |b: f64, p: &[f64]| boltzmann_area(b, g_eff, p[0], p[1], form);
    let spec = ModelSpec::new(match form {
        AreaForm::Logistic => "boltzmann_logistic",
        AreaForm::PopulationDifference => "boltzmann_tanh",
    })
    .param(ParamSpec::positive("ts", best.1).bounded(ts_lo, ts_hi))
    .param(ParamSpec::free("scale", best.2));
    let mut r = nlls_fit(&spec, &model, fields, areas, None)?;
    let ts = r.params[0];
    if r.converged && !(r.sigma[0] < ts) {
        r.fail("spin temperature not constrained by the data (areas constant within noise)");
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepMode {
    /// x = field (T); cryostat temperature held, spin temperature fitted.
    Field,
    /// x = cryostat temperature (K) at fixed `field`; t_min fitted.
    Temperature { field: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    #[default]
    Uniform,
    /// Weights 1/R², for noise proportional to the rate.
    Relative,
}

/// `R = R_FF + R_d` as a function of the swept variable; `p = [w_d, w_ff, t]`
/// with t the spin temperature (field mode) or t_min (temperature mode).
pub fn relaxation_model(x: f64, p: &[f64], g_eff: f64, mode: SweepMode) -> f64 {
    let (b, ts) = match mode {
        SweepMode::Field => (x, p[2]),
        SweepMode::Temperature { field } => match effective_temperature(x, p[2]) {
            Ok(ts) => (field, ts),
            Err(_) => return f64::NAN,
        },
    };
    let ff = flip_flop_rate(g_eff, b, ts, p[1]).unwrap_or(f64::NAN);
    let d = direct_rate(g_eff, b, ts, p[0]).unwrap_or(f64::NAN);
    ff + d
}

/// Fits the two-channel relaxation model. Parameters: `w_d` (Hz/T⁵),
/// `w_ff` (Hz), and `ts` (field mode) or `t_min` (temperature mode), all in
/// log space.
pub fn fit_relaxation_model(
    x: &[f64],
    rates: &[f64],
    mode: SweepMode,
    g_eff: f64,
    weighting: Weighting,
) -> Result<FitResult> {
    if x.len() != rates.len() {
        return Err(Error::input("sweep and rate lengths differ"));
    }
    if x.len() < 5 {
        return Err(Error::input(format!(
            "relaxation fit needs at least 5 points, got {}",
            x.len()
        )));
    }
    if let SweepMode::Temperature { field } = mode {
        if !(field > 0.0) {
            return Err(Error::input("temperature sweep needs a positive field"));
        }
    }
    if x.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::input("sweep values must be >= 0"));
    }
    let weights: Option<Vec<f64>> = match weighting {
        Weighting::Uniform => None,
        Weighting::Relative => {
            if rates.iter().any(|r| !(*r > 0.0)) {
                return Err(Error::input("relative weighting needs positive rates"));
            }
            Some(rates.iter().map(|r| 1.0 / (r * r)).collect())
        }
    };

    // For a fixed temperature the model is linear in (w_d, w_ff).
    let mut best = (f64::INFINITY, 0.07, 1.0, 0.01);
    for t in log_grid(1e-3, 3.0, 241) {
        let basis: Vec<[f64; 2]> = x
            .iter()
            .map(|&xi| {
                [
                    relaxation_model(xi, &[1.0, 0.0, t], g_eff, mode),
                    relaxation_model(xi, &[0.0, 1.0, t], g_eff, mode),
                ]
            })
            .collect();
        let c = solve_nonnegative(&basis, rates, weights.as_deref());
        let sse: f64 = basis
            .iter()
            .zip(rates)
            .enumerate()
            .map(|(i, (row, y))| {
                weights.as_ref().map_or(1.0, |w| w[i]) * (y - c[0] * row[0] - c[1] * row[1]).powi(2)
            })
            .sum();
        if sse < best.0 {
            best = (sse, t, c[0], c[1]);
        }
    }
    let (_, t0, wd0, wff0) = best;
    let floor = 1e-12;
    let t_name = match mode {
        SweepMode::Field => "ts",
        SweepMode::Temperature { .. } => "t_min",
    };
    let spec = ModelSpec::new(match mode {
        SweepMode::Field => "relaxation_field_sweep",
        SweepMode::Temperature { .. } => "relaxation_temperature_sweep",
    })
    .param(ParamSpec::positive("w_d", wd0.max(floor)))
    .param(ParamSpec::positive("w_ff", wff0.max(floor)))
    .param(ParamSpec::positive(t_name, t0).bounded(1e-5, 1e2));
    let model = move |xi: f64, p: &[f64]| relaxation_model(xi, p, g_eff, mode);
    let mut r = nlls_fit(&spec, &model, x, rates, weights.as_deref())?;
    if r.converged && r.covariance_condition > DEGENERACY_CONDITION {
        r.warnings.push(format!(
            "degenerate: covariance condition number {:.3e} exceeds {DEGENERACY_CONDITION:e}; \
             the sweep range does not separate the B⁵ and tanh² terms",
            r.covariance_condition
        ));
    }
    Ok(r)
}
