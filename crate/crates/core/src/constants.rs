//! Exact SI constants used throughout the crate.

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380649e-23;
/// Planck constant, J·s.
pub const PLANCK: f64 = 6.62607015e-34;
/// Bohr magneton, J/T.
pub const BOHR_MAGNETON: f64 = 9.2740100783e-24;
/// μ_B/h in Hz/T (≈ 13.996 GHz/T).
pub const BOHR_MAGNETON_HZ_PER_T: f64 = BOHR_MAGNETON / PLANCK;

/// Empirical polarization threshold slope, tesla per kelvin of spin temperature.
pub const POLARIZATION_SLOPE_T_PER_K: f64 = 2.0;
