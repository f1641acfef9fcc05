//! Simulation and fitting toolkit for microwave spin spectroscopy and
//! spectral hole burning in rare-earth-doped crystals.
//!
//! The crate is organised by physical layer:
//!
//! - [`spin`]: spin Hamiltonian, eigenlevels and allowed transitions
//! - [`spectrum`]: Lorentzian lineshapes, absorption maps and hole profiles
//! - [`dynamics`]: relaxation laws, Bloch hole-burning simulation, link budgets
//! - [`fit`]: Levenberg-Marquardt engine and the physical model fits
//! - [`config`] and [`io`]: experiment configuration and plot-ready exports
//!
//! All quantities are SI internally (T, Hz, K, J, s).

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod constants;
pub mod dynamics;
mod error;
pub mod fit;
pub mod io;
pub mod spectrum;
pub mod spin;
pub mod units;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
