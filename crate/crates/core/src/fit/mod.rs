//! Least-squares engine and the physical model fits built on it.

mod engine;
mod laws;
mod linear;
mod lineshape;
pub mod montecarlo;
mod recovery;
mod report;

pub use engine::{
    nlls_fit, FitResult, ModelSpec, ParamSpec, Transform, COST_TOLERANCE, MAX_ITERATIONS,
};
pub use laws::{
    boltzmann_area, fit_boltzmann_temperature, fit_linewidth_law, fit_relaxation_model,
    linewidth_model, relaxation_model, AreaForm, SweepMode, Weighting, DEGENERACY_CONDITION,
};
pub use lineshape::{fit_lorentzian, lorentzian_model, PEAKLESS_RATIO};
pub use montecarlo::bootstrap;
pub use recovery::{exponential_model, fit_exponential_recovery};
pub use report::format_report;
