//! Simulation and verification laboratory for local times of rough
//! stochastic processes.
//!
//! The crate provides:
//! - exact samplers for fractional Brownian motion and related Gaussian
//!   processes (`gaussian`), a second-chaos process built from squared
//!   Gaussian band functionals (`rosenblatt`), and Young/Milstein solvers
//!   for SDEs driven by rough paths (`sde`), unified behind
//!   [`sim::PathSampler`];
//! - local-time estimators: an occupation histogram and a truncated
//!   Fourier inversion (`localtime`);
//! - Monte Carlo verification of moment, tail, scaling and oscillation
//!   laws for the estimated local times (`laws`);
//! - exact combinatorial and quadrature identities backing those laws
//!   (`analytics`);
//! - deterministic, stream-indexed randomness (`rng`) so every experiment
//!   is replayable bit for bit.

pub mod analytics;
pub mod error;
pub mod gaussian;
pub mod grid;
pub mod laws;
pub mod localtime;
pub mod numeric;
pub mod process;
pub mod quad;
pub mod rng;
pub mod rosenblatt;
pub mod sde;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use process::{FieldKind, ProcessClass, ProcessSpec, SamplePath, SdeScheme};
pub use rng::{RngStream, StreamFamily, StreamId};
