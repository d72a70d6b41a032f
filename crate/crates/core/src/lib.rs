//! Ultrafast dissipative spin-state dynamics of multilevel electronic systems
//! driven by X-ray pulse trains.
//!
//! The pipeline is: load the spin-free electronic structure, diagonalize
//! H_CI + V_SOC, build Bloch relaxation and Auger decay in the SOC basis,
//! propagate the reduced density matrix with an adaptive Runge–Kutta–Fehlberg
//! integrator, and analyze spin-resolved populations.

pub mod analysis;
pub mod config;
pub mod dissipation;
pub mod error;
pub mod field;
pub mod linalg;
pub mod modelgen;
pub mod propagator;
pub mod quad;
pub mod run;
pub mod structure;
mod textfmt;
pub mod units;

pub use error::{Error, Result};
