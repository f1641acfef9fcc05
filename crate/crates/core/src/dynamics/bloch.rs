//! Two-level Bloch equations for hole burning and saturation recovery.
//!
//! The state is (u, v, n) in the frame rotating at the drive frequency,
//! with n the population difference normalized to its thermal value:
//!
//! ```text
//! du/dt = -Γ₂ u + Δ v
//! dv/dt = -Δ u - Γ₂ v + Ω n
//! dn/dt = -Ω v - R (n - 1)
//! ```
//!
//! Ω and Δ are angular (2π × the Hz values in [`DriveParams`]).

use std::f64::consts::TAU;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    /// Rabi frequency, Hz.
    pub rabi: f64,
    /// Drive detuning from the spin packet, Hz.
    pub detuning: f64,
    /// Burn pulse length, s.
    pub burn_duration: f64,
    /// Phenomenological transverse decay rate Γ₂, s⁻¹.
    pub transverse_rate: f64,
}

impl DriveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rabi >= 0.0 && self.rabi.is_finite()) {
            return Err(Error::input(format!(
                "rabi must be >= 0, got {}",
                self.rabi
            )));
        }
        if !self.detuning.is_finite() {
            return Err(Error::input("detuning must be finite"));
        }
        if !(self.burn_duration >= 0.0 && self.burn_duration.is_finite()) {
            return Err(Error::input(format!(
                "burn_duration must be >= 0, got {}",
                self.burn_duration
            )));
        }
        if !(self.transverse_rate > 0.0 && self.transverse_rate.is_finite()) {
            return Err(Error::input(format!(
                "transverse_rate must be > 0, got {}",
                self.transverse_rate
            )));
        }
        Ok(())
    }
}

/// Hole amplitude versus time, in units of the thermal population difference.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RecoveryTrace {
    pub times: Vec<f64>,
    pub hole_amplitude: Vec<f64>,
}

impl RecoveryTrace {
    pub fn new(times: Vec<f64>, hole_amplitude: Vec<f64>) -> Result<Self> {
        if times.len() != hole_amplitude.len() {
            return Err(Error::input(format!(
                "trace columns differ in length ({} vs {})",
                times.len(),
                hole_amplitude.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::input("trace times must be strictly ascending"));
        }
        if hole_amplitude.iter().chain(&times).any(|v| !v.is_finite()) {
            return Err(Error::input("trace values must be finite"));
        }
        Ok(Self {
            times,
            hole_amplitude,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Samples with `t >= t0`, with time measured from `t0`.
    pub fn after(&self, t0: f64) -> RecoveryTrace {
        let (times, amp) = self
            .times
            .iter()
            .zip(&self.hole_amplitude)
            .filter(|(t, _)| **t >= t0 - 1e-12 * t0.abs().max(1.0))
            .map(|(t, a)| ((t - t0).max(0.0), *a))
            .unzip();
        RecoveryTrace {
            times,
            hole_amplitude: amp,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BlochEquations {
    /// Angular Rabi frequency, rad/s.
    pub omega: f64,
    /// Angular detuning, rad/s.
    pub delta: f64,
    pub transverse_rate: f64,
    pub longitudinal_rate: f64,
}

impl BlochEquations {
    pub fn derivative(&self, s: &Vector3<f64>) -> Vector3<f64> {
        let (u, v, n) = (s.x, s.y, s.z);
        Vector3::new(
            -self.transverse_rate * u + self.delta * v,
            -self.delta * u - self.transverse_rate * v + self.omega * n,
            -self.omega * v - self.longitudinal_rate * (n - 1.0),
        )
    }

    /// One classical fourth-order Runge-Kutta step.
    pub fn rk4_step(&self, s: &Vector3<f64>, h: f64) -> Vector3<f64> {
        let k1 = self.derivative(s);
        let k2 = self.derivative(&(s + k1 * (h / 2.0)));
        let k3 = self.derivative(&(s + k2 * (h / 2.0)));
        let k4 = self.derivative(&(s + k3 * h));
        s + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
    }
}

/// Largest admissible integration step, `0.1 / max(Ω, |Δ|, Γ₂, R)` with
/// all rates in Hz.
pub fn max_stable_step(drive: &DriveParams, r: f64) -> f64 {
    let fastest = drive
        .rabi
        .max(drive.detuning.abs())
        .max(drive.transverse_rate)
        .max(r);
    0.1 / fastest
}

/// Integrates a resonant burn pulse of `drive.burn_duration` followed by
/// `observe_duration` of free recovery. Times start at the beginning of the
/// burn; the burn end is always one of the sample times.
pub fn simulate_hole_burning(
    drive: &DriveParams,
    r: f64,
    observe_duration: f64,
    step: f64,
) -> Result<RecoveryTrace> {
    drive.validate()?;
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::input(format!(
            "longitudinal rate must be >= 0, got {r}"
        )));
    }
    if !(observe_duration >= 0.0 && observe_duration.is_finite()) {
        return Err(Error::input("observe_duration must be >= 0"));
    }
    let bound = max_stable_step(drive, r);
    if !(step > 0.0 && step <= bound) {
        return Err(Error::input(format!(
            "step {step} s violates the stability bound 0 < step <= 0.1/max(rabi, |detuning|, transverse_rate, R) = {bound} s"
        )));
    }

    let burn = BlochEquations {
        omega: TAU * drive.rabi,
        delta: TAU * drive.detuning,
        transverse_rate: drive.transverse_rate,
        longitudinal_rate: r,
    };
    let free = BlochEquations { omega: 0.0, ..burn };

    let mut state = Vector3::new(0.0, 0.0, 1.0);
    let mut times = vec![0.0];
    let mut amp = vec![0.0];
    let mut t = 0.0;
    for (eqs, end) in [
        (burn, drive.burn_duration),
        (free, drive.burn_duration + observe_duration),
    ] {
        let n_steps = ((end - t) / step).ceil() as usize;
        let start = t;
        for k in 1..=n_steps {
            let next = if k == n_steps {
                end
            } else {
                start + k as f64 * step
            };
            let h = next - t;
            if h <= 0.0 {
                continue;
            }
            state = eqs.rk4_step(&state, h);
            t = next;
            times.push(t);
            amp.push(1.0 - state.z);
        }
    }
    Ok(RecoveryTrace {
        times,
        hole_amplitude: amp,
    })
}

/// Hole amplitude at the end of the burn pulse for each burn duration.
pub fn burn_duration_scan(
    drive: &DriveParams,
    r: f64,
    durations: &[f64],
    step: f64,
) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    durations
        .par_iter()
        .map(|&d| {
            let run = DriveParams {
                burn_duration: d,
                ..*drive
            };
            let trace = simulate_hole_burning(&run, r, 0.0, step)?;
            Ok(*trace.hole_amplitude.last().unwrap_or(&0.0))
        })
        .collect()
}
