//! Seeded noise and seed-partitioned Monte-Carlo runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::engine::FitResult;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    /// σ_i = fraction · |y_i|
    Relative(f64),
    /// σ = fraction · max|y|, the same for every point.
    PeakScaled(f64),
}

impl NoiseModel {
    pub fn sigmas(&self, clean: &[f64]) -> Vec<f64> {
        match *self {
            NoiseModel::Relative(f) => clean.iter().map(|y| f * y.abs()).collect(),
            NoiseModel::PeakScaled(f) => {
                let peak = clean.iter().fold(0.0f64, |m, y| m.max(y.abs()));
                vec![f * peak; clean.len()]
            }
        }
    }
}

/// Independent seed for draw `index`, derived with SplitMix64 so that draws
/// do not depend on evaluation order.
pub fn draw_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Adds Gaussian noise to `clean` using a generator seeded with `seed`.
pub fn add_noise(clean: &[f64], noise: NoiseModel, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std = Normal::new(0.0, 1.0).expect("valid normal");
    clean
        .iter()
        .zip(noise.sigmas(clean))
        .map(|(y, s)| y + s * std.sample(&mut rng))
        .collect()
}

/// Runs `draws` independent trials in parallel; trial `i` receives
/// `draw_seed(seed, i)`. Results are in draw order.
pub fn monte_carlo<T, F>(draws: usize, seed: u64, trial: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync,
{
    (0..draws as u64)
        .into_par_iter()
        .map(|i| trial(draw_seed(seed, i)))
        .collect()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Residual-resampling bootstrap around any fit. `refit` receives the fitted
/// curve plus residuals drawn with replacement; the result is the spread of
/// each parameter over the refits that converged.
pub fn bootstrap<F>(
    fitted: &FitResult,
    y: &[f64],
    resamples: usize,
    seed: u64,
    refit: F,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<FitResult> + Sync,
{
    if resamples < 2 {
        return Err(Error::input("bootstrap needs at least two resamples"));
    }
    if y.len() != fitted.residuals.len() || y.is_empty() {
        return Err(Error::input("data and residuals differ in length"));
    }
    let res = &fitted.residuals;
    let curve: Vec<f64> = y.iter().zip(res).map(|(y, r)| y - r).collect();
    let runs = monte_carlo(resamples, seed, |s| {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let yb: Vec<f64> = curve
            .iter()
            .map(|c| c + res[rng.random_range(0..res.len())])
            .collect();
        refit(&yb)
    });
    let samples: Vec<Vec<f64>> = runs
        .into_iter()
        .filter_map(|r| r.ok().filter(|r| r.converged).map(|r| r.params))
        .collect();
    if samples.len() < 2 {
        return Err(Error::input("too few bootstrap refits converged"));
    }
    let m = samples.len() as f64;
    Ok((0..fitted.params.len())
        .map(|i| {
            let mean = samples.iter().map(|s| s[i]).sum::<f64>() / m;
            (samples.iter().map(|s| (s[i] - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
        })
        .collect())
}
