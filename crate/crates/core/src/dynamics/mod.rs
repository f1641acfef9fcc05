//! Relaxation laws, spin temperature, Bloch hole-burning simulation and
//! microwave power bookkeeping.

mod bloch;
mod link;
mod rates;

pub use bloch::{
    burn_duration_scan, max_stable_step, simulate_hole_burning, BlochEquations, DriveParams,
    RecoveryTrace,
};
pub use link::{
    dbm_to_watts, link_budget, rabi_frequency, watts_to_dbm, LinkBudget, LinkBudgetResult,
    DEFAULT_CONVENTION_FACTOR, DEFAULT_KAPPA,
};
pub use rates::{
    direct_rate, effective_temperature, flip_flop_rate, polarization_field,
    rate_at_spin_temperature, rate_scan, reduced_splitting, total_relaxation_rate, RateBreakdown,
    RateScanRow, RelaxationParams,
};
