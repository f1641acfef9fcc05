mod common;

use common::*;
use holeburn_core::dynamics::RecoveryTrace;
use holeburn_core::fit::{
    boltzmann_area, fit_boltzmann_temperature, fit_exponential_recovery, fit_linewidth_law,
    fit_lorentzian, fit_relaxation_model, nlls_fit, AreaForm, FitResult, ModelSpec, ParamSpec,
    SweepMode, Weighting, DEGENERACY_CONDITION,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

const G: f64 = 1.41;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn line_grid() -> Vec<f64> {
    linspace(3.296e9 - 250e6, 3.296e9 + 250e6, 201)
}

fn line(grid: &[f64], amp: f64) -> Vec<f64> {
    grid.iter()
        .map(|&f| lorentzian(f, 3.296e9, 52.07e6, amp))
        .collect()
}

fn exp_trace(n: usize, dt: f64) -> (Vec<f64>, Vec<f64>) {
    let t: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
    let y = t.iter().map(|t| 0.1 * (-0.0687 * t).exp()).collect();
    (t, y)
}

fn field_rates(b: &[f64]) -> Vec<f64> {
    b.iter().map(|&b| rate(G, b, 0.069, 0.05, 23.0)).collect()
}

fn temperature_rates(t: &[f64]) -> Vec<f64> {
    t.iter()
        .map(|&t| rate(G, 0.185, spin_temperature(t, 0.073), 0.03, 22.0))
        .collect()
}

fn psd_and_symmetric(r: &FitResult) {
    let n = r.covariance.len();
    let c = DMatrix::from_fn(n, n, |i, j| r.covariance[i][j]);
    let scale = c.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let d = DMatrix::from_fn(n, n, |i, j| {
        c[(i, j)] / (c[(i, i)] * c[(j, j)]).sqrt().max(f64::MIN_POSITIVE)
    });
    for i in 0..n {
        for j in 0..n {
            assert!(
                (c[(i, j)] - c[(j, i)]).abs() <= 1e-12 * scale,
                "asymmetric covariance"
            );
        }
    }
    let min = d.symmetric_eigenvalues().min();
    assert!(min >= -1e-9, "covariance not PSD: min eigenvalue {min}");
}

#[test]
fn lorentzian_round_trip() {
    let g = line_grid();
    let r = fit_lorentzian(&g, &line(&g, 1.0)).unwrap();
    assert!(r.converged);
    assert!(rel(r.value("fwhm"), 52.07e6) < 1e-6);
    assert!(rel(r.value("center"), 3.296e9) < 1e-9);
    assert!(rel(r.value("amplitude"), 1.0) < 1e-6);
}

#[test]
fn lorentzian_two_sigma_coverage() {
    let g = line_grid();
    let clean = line(&g, 1.0);
    let draws: Vec<(f64, f64)> = (0..200)
        .map(|i| {
            let y = Noise::new(100 + i).peak_scaled(&clean, 0.05);
            let r = fit_lorentzian(&g, &y).unwrap();
            assert!(r.converged);
            (r.value("fwhm"), r.sigma_of("fwhm").unwrap())
        })
        .collect();
    let c = fraction_within(&draws, 52.07e6, 2.0);
    assert!(c >= 0.90, "2σ coverage {c}");
}

#[test]
fn flat_spectrum_is_not_converged() {
    let g = line_grid();
    let r = fit_lorentzian(&g, &vec![0.3; g.len()]).unwrap();
    assert!(!r.converged);
    assert!(!r.diagnostics.is_empty());
}

#[test]
fn exponential_round_trip_and_tau() {
    let (t, y) = exp_trace(100, 0.5);
    let r = fit_exponential_recovery(&RecoveryTrace::new(t, y).unwrap()).unwrap();
    assert!(r.converged);
    assert!(rel(r.value("rate"), 0.0687) < 1e-6);
    assert!((r.value("tau") - 14.6).abs() < 0.05);
    assert!(rel(r.value("tau"), 1.0 / 0.0687) < 1e-6);
}

#[test]
fn constant_trace_is_not_converged() {
    let t: Vec<f64> = (0..50).map(|i| i as f64).collect();
    let r = fit_exponential_recovery(&RecoveryTrace::new(t, vec![0.2; 50]).unwrap()).unwrap();
    assert!(!r.converged);
}

#[test]
fn linewidth_law_exact_points() {
    let b = [0.07, 0.11, 0.167, 0.185, 0.3];
    let w: Vec<f64> = b.iter().map(|b| 17e6 + 0.21e9 * b).collect();
    let r = fit_linewidth_law(&b, &w, None).unwrap();
    assert!(rel(r.value("gamma0"), 17e6) < 1e-9);
    assert!(rel(r.value("delta_gamma"), 0.21e9) < 1e-9);
}

#[test]
fn linewidth_law_ten_percent_noise_stays_in_quoted_band() {
    let b = [0.07, 0.11, 0.167, 0.185, 0.3];
    let w: Vec<f64> = b.iter().map(|b| 17e6 + 0.21e9 * b).collect();
    let g0: Vec<f64> = (0..200)
        .map(|i| {
            let y = Noise::new(7 + i).relative(&w, 0.10);
            fit_linewidth_law(&b, &y, None).unwrap().value("gamma0")
        })
        .collect();
    let m = median(&g0);
    assert!((m - 17e6).abs() <= 4e6, "median Γ0 {m}");
}

#[test]
fn linewidth_law_two_points_interpolate() {
    let r = fit_linewidth_law(&[0.1, 0.2], &[40e6, 61e6], None).unwrap();
    assert!(rel(r.value("gamma0"), 19e6) < 1e-12);
    assert!(rel(r.value("delta_gamma"), 210e6) < 1e-12);
    assert!(r.residuals.iter().all(|e| e.abs() < 1e-6));
}

#[test]
fn linewidth_law_single_field_is_an_error() {
    assert!(fit_linewidth_law(&[0.1], &[40e6], None).is_err());
    assert!(fit_linewidth_law(&[0.1, 0.1, 0.1], &[40e6, 41e6, 39e6], None).is_err());
}

#[test]
fn boltzmann_temperature_round_trip() {
    let b = linspace(0.07, 0.3, 10);
    let a: Vec<f64> = b
        .iter()
        .map(|&b| logistic_area(G, b, 0.0819, 2.5))
        .collect();
    let r = fit_boltzmann_temperature(&b, &a, G, AreaForm::Logistic).unwrap();
    assert!(r.converged);
    assert!(rel(r.value("ts"), 0.0819) < 0.01);
    assert!(rel(r.value("scale"), 2.5) < 0.01);
}

#[test]
fn boltzmann_area_at_zero_field_is_half_scale() {
    assert_eq!(boltzmann_area(0.0, G, 0.0819, 3.0, AreaForm::Logistic), 1.5);
    assert_eq!(
        boltzmann_area(0.0, G, 0.0819, 3.0, AreaForm::PopulationDifference),
        0.0
    );
}

#[test]
fn flat_areas_are_not_converged() {
    let b = linspace(0.07, 0.3, 10);
    let r = fit_boltzmann_temperature(&b, &[0.5; 10], G, AreaForm::Logistic).unwrap();
    assert!(!r.converged);
}

#[test]
fn relaxation_noise_free_both_modes() {
    let b = linspace(0.07, 0.3, 10);
    let r = fit_relaxation_model(
        &b,
        &field_rates(&b),
        SweepMode::Field,
        G,
        Weighting::Uniform,
    )
    .unwrap();
    assert!(r.converged, "{:?}", r.diagnostics);
    assert!(rel(r.value("w_d"), 23.0) < 1e-6);
    assert!(rel(r.value("w_ff"), 0.05) < 1e-6);
    assert!(rel(r.value("ts"), 0.069) < 1e-6);

    let t = linspace(0.01, 0.3, 10);
    let mode = SweepMode::Temperature { field: 0.185 };
    let r = fit_relaxation_model(&t, &temperature_rates(&t), mode, G, Weighting::Relative).unwrap();
    assert!(r.converged, "{:?}", r.diagnostics);
    assert!(rel(r.value("w_d"), 22.0) < 1e-6);
    assert!(rel(r.value("w_ff"), 0.03) < 1e-6);
    assert!(rel(r.value("t_min"), 0.073) < 1e-6);
}

#[test]
fn relaxation_monte_carlo_medians() {
    let b = linspace(0.07, 0.3, 10);
    let clean = field_rates(&b);
    let fits: Vec<FitResult> = (0..200)
        .map(|i| {
            let y = Noise::new(900 + i).relative(&clean, 0.05);
            fit_relaxation_model(&b, &y, SweepMode::Field, G, Weighting::Relative).unwrap()
        })
        .collect();
    for (name, truth) in [("w_d", 23.0), ("w_ff", 0.05), ("ts", 0.069)] {
        let m = median(&fits.iter().map(|r| r.value(name)).collect::<Vec<_>>());
        assert!(rel(m, truth) <= 0.10, "{name} median {m}");
    }

    let t = linspace(0.01, 0.3, 10);
    let clean = temperature_rates(&t);
    let mode = SweepMode::Temperature { field: 0.185 };
    let fits: Vec<FitResult> = (0..200)
        .map(|i| {
            let y = Noise::new(1900 + i).relative(&clean, 0.05);
            fit_relaxation_model(&t, &y, mode, G, Weighting::Relative).unwrap()
        })
        .collect();
    for (name, truth) in [("w_d", 22.0), ("w_ff", 0.03), ("t_min", 0.073)] {
        let m = median(&fits.iter().map(|r| r.value(name)).collect::<Vec<_>>());
        assert!(rel(m, truth) <= 0.15, "{name} median {m}");
    }
}

#[test]
fn narrow_field_sweep_warns_about_degeneracy() {
    let b = linspace(0.184, 0.186, 6);
    let r = fit_relaxation_model(
        &b,
        &field_rates(&b),
        SweepMode::Field,
        G,
        Weighting::Uniform,
    )
    .unwrap();
    assert!(
        r.covariance_condition > DEGENERACY_CONDITION || !r.converged,
        "condition {}",
        r.covariance_condition
    );
    assert!(!r.warnings.is_empty() || !r.converged);
}

#[test]
fn quadratic_model_recovers_exact_parameters() {
    let x = linspace(0.0, 4.0, 21);
    let y: Vec<f64> = x.iter().map(|x| (x - 2.0).powi(2)).collect();
    let spec = ModelSpec::new("quadratic")
        .param(ParamSpec::free("a", 0.5))
        .param(ParamSpec::free("b", 1.0));
    let r = nlls_fit(
        &spec,
        &|x: f64, p: &[f64]| p[0] * (x - p[1]).powi(2),
        &x,
        &y,
        None,
    )
    .unwrap();
    assert!((r.value("a") - 1.0).abs() < 1e-9);
    assert!((r.value("b") - 2.0).abs() < 1e-9);
}

#[test]
fn covariance_is_symmetric_and_psd() {
    let g = line_grid();
    psd_and_symmetric(
        &fit_lorentzian(&g, &Noise::new(3).peak_scaled(&line(&g, 1.0), 0.05)).unwrap(),
    );
    let (t, y) = exp_trace(100, 0.5);
    let y = Noise::new(4).peak_scaled(&y, 0.05);
    psd_and_symmetric(&fit_exponential_recovery(&RecoveryTrace::new(t, y).unwrap()).unwrap());
    let b = linspace(0.07, 0.3, 10);
    let y = Noise::new(5).relative(&field_rates(&b), 0.05);
    psd_and_symmetric(
        &fit_relaxation_model(&b, &y, SweepMode::Field, G, Weighting::Relative).unwrap(),
    );
    let a: Vec<f64> = b
        .iter()
        .map(|&b| logistic_area(G, b, 0.0819, 1.0))
        .collect();
    let a = Noise::new(6).peak_scaled(&a, 0.05);
    psd_and_symmetric(&fit_boltzmann_temperature(&b, &a, G, AreaForm::Logistic).unwrap());
}

#[test]
fn scaling_data_leaves_shape_parameters_unchanged() {
    let c = 7.3;
    let g = line_grid();
    let y = Noise::new(11).peak_scaled(&line(&g, 1.0), 0.05);
    let ys: Vec<f64> = y.iter().map(|v| v * c).collect();
    let (a, b) = (
        fit_lorentzian(&g, &y).unwrap(),
        fit_lorentzian(&g, &ys).unwrap(),
    );
    assert!(rel(b.value("center"), a.value("center")) < 1e-9);
    assert!(rel(b.value("fwhm"), a.value("fwhm")) < 1e-9);
    assert!(rel(b.value("amplitude"), c * a.value("amplitude")) < 1e-9);

    let (t, y) = exp_trace(80, 0.5);
    let y = Noise::new(12).peak_scaled(&y, 0.05);
    let ys: Vec<f64> = y.iter().map(|v| v * c).collect();
    let a = fit_exponential_recovery(&RecoveryTrace::new(t.clone(), y).unwrap()).unwrap();
    let b = fit_exponential_recovery(&RecoveryTrace::new(t, ys).unwrap()).unwrap();
    assert!(rel(b.value("rate"), a.value("rate")) < 1e-9);
    assert!(rel(b.value("amplitude"), c * a.value("amplitude")) < 1e-9);

    let bf = linspace(0.07, 0.3, 10);
    let y = Noise::new(13).relative(&field_rates(&bf), 0.05);
    let ys: Vec<f64> = y.iter().map(|v| v * c).collect();
    let a = fit_relaxation_model(&bf, &y, SweepMode::Field, G, Weighting::Relative).unwrap();
    let b = fit_relaxation_model(&bf, &ys, SweepMode::Field, G, Weighting::Relative).unwrap();
    assert!(rel(b.value("ts"), a.value("ts")) < 1e-9);
    assert!(rel(b.value("w_d"), c * a.value("w_d")) < 1e-9);

    let y: Vec<f64> = bf
        .iter()
        .map(|&b| logistic_area(G, b, 0.0819, 1.0))
        .collect();
    let y = Noise::new(14).peak_scaled(&y, 0.03);
    let ys: Vec<f64> = y.iter().map(|v| v * c).collect();
    let a = fit_boltzmann_temperature(&bf, &y, G, AreaForm::Logistic).unwrap();
    let b = fit_boltzmann_temperature(&bf, &ys, G, AreaForm::Logistic).unwrap();
    assert!(rel(b.value("ts"), a.value("ts")) < 1e-9);
}

/// Share of 500 draws whose nominal 1σ interval covers the truth.
fn coverage<F>(seed: u64, truth: f64, trial: F) -> f64
where
    F: Fn(&mut Noise) -> (f64, f64),
{
    let draws: Vec<(f64, f64)> = (0..500).map(|i| trial(&mut Noise::new(seed + i))).collect();
    fraction_within(&draws, truth, 1.0)
}

fn assert_band(name: &str, c: f64) {
    assert!((0.60..=0.78).contains(&c), "{name}: 1σ coverage {c}");
}

#[test]
fn one_sigma_coverage_lorentzian_and_exponential() {
    let g = line_grid();
    let clean = line(&g, 1.0);
    let c = coverage(10_000, 52.07e6, |n| {
        let r = fit_lorentzian(&g, &n.peak_scaled(&clean, 0.05)).unwrap();
        (r.value("fwhm"), r.sigma_of("fwhm").unwrap())
    });
    assert_band("lorentzian fwhm", c);

    let (t, y) = exp_trace(100, 0.5);
    let c = coverage(20_000, 0.0687, |n| {
        let tr = RecoveryTrace::new(t.clone(), n.peak_scaled(&y, 0.05)).unwrap();
        let r = fit_exponential_recovery(&tr).unwrap();
        (r.value("rate"), r.sigma_of("rate").unwrap())
    });
    assert_band("recovery rate", c);
}

#[test]
fn one_sigma_coverage_laws() {
    let b = linspace(0.07, 0.3, 20);
    let w: Vec<f64> = b.iter().map(|b| 17e6 + 0.21e9 * b).collect();
    let c = coverage(30_000, 17e6, |n| {
        let r = fit_linewidth_law(&b, &n.peak_scaled(&w, 0.05), None).unwrap();
        (r.value("gamma0"), r.sigma_of("gamma0").unwrap())
    });
    assert_band("linewidth gamma0", c);

    let a: Vec<f64> = b
        .iter()
        .map(|&b| logistic_area(G, b, 0.0819, 1.0))
        .collect();
    let c = coverage(40_000, 0.0819, |n| {
        let r =
            fit_boltzmann_temperature(&b, &n.peak_scaled(&a, 0.05), G, AreaForm::Logistic).unwrap();
        (r.value("ts"), r.sigma_of("ts").unwrap())
    });
    assert_band("spin temperature", c);

    let bf = linspace(0.07, 0.3, 10);
    let clean = field_rates(&bf);
    for (name, truth) in [("w_d", 23.0), ("w_ff", 0.05), ("ts", 0.069)] {
        let c = coverage(50_000, truth, |n| {
            let r = fit_relaxation_model(
                &bf,
                &n.relative(&clean, 0.05),
                SweepMode::Field,
                G,
                Weighting::Relative,
            )
            .unwrap();
            (r.value(name), r.sigma_of(name).unwrap())
        });
        assert_band(name, c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn fits_never_increase_cost(seed in 0u64..10_000, level in 0.0f64..0.3) {
        let g = line_grid();
        let y = Noise::new(seed).peak_scaled(&line(&g, 1.0), level);
        let r = fit_lorentzian(&g, &y).unwrap();
        prop_assert!(r.cost <= r.initial_cost);

        let (t, y) = exp_trace(60, 0.5);
        let y = Noise::new(seed + 1).peak_scaled(&y, level);
        let r = fit_exponential_recovery(&RecoveryTrace::new(t, y).unwrap()).unwrap();
        prop_assert!(r.cost <= r.initial_cost);

        let b = linspace(0.07, 0.3, 10);
        let y = Noise::new(seed + 2).relative(&field_rates(&b), level);
        let r = fit_relaxation_model(&b, &y, SweepMode::Field, G, Weighting::Relative).unwrap();
        prop_assert!(r.cost <= r.initial_cost);

        let a: Vec<f64> = b.iter().map(|&b| logistic_area(G, b, 0.0819, 1.0)).collect();
        let y = Noise::new(seed + 3).peak_scaled(&a, level);
        let r = fit_boltzmann_temperature(&b, &y, G, AreaForm::Logistic).unwrap();
        prop_assert!(r.cost <= r.initial_cost);
    }

    #[test]
    fn sigma_non_negative_and_r_squared_at_most_one(seed in 0u64..10_000) {
        let b = linspace(0.07, 0.3, 8);
        let w: Vec<f64> = b.iter().map(|b| 17e6 + 0.21e9 * b).collect();
        let r = fit_linewidth_law(&b, &Noise::new(seed).relative(&w, 0.1), None).unwrap();
        prop_assert!(r.sigma.iter().all(|s| *s >= 0.0));
        prop_assert!(r.r_squared <= 1.0);
    }
}
