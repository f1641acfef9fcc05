//! Absorption lineshapes, field-frequency maps and spectral-hole profiles.

mod hole;
mod lineshape;
mod synth;

pub use hole::{
    apply_spectral_hole, evolve_hole, step_rate_profile, HoleProfile, HoleProfileParams,
    HoleSnapshot,
};
pub use lineshape::{linewidth_at, lorentzian, uniform_grid, LinewidthModel, LorentzianLine};
pub use synth::{
    ensemble_lines, synthesize_absorption, synthesize_field_map, SpectrometerSetup, SpectrumGrid,
};
