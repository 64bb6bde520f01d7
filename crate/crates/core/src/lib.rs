//! Explicit K-symplectic integrators for nonseparable non-canonical
//! Hamiltonian systems.
//!
//! The phase space is extended to several copies bound by a quadratic
//! restraint, the augmented Hamiltonian is split into pieces whose flows are
//! known in closed form, and those flows are composed into first, second and
//! fourth order Poisson maps. Explicit Runge–Kutta baselines and a set of
//! long-run diagnostics are included for comparison.

pub mod baselines;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod extension;
pub mod flows;
pub mod phasecore;

pub use error::{Error, Result};
