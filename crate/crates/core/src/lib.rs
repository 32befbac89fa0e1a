//! Pseudospectral simulator and energy diagnostics for the two-dimensional
//! tropical climate model without thermal diffusion,
//!
//! ```text
//! du/dt + u.grad u + mu u + grad p + div(v (x) v) = 0,   div u = 0,
//! dv/dt + u.grad v + v.grad u - nu Lap v + grad theta = 0,
//! dtheta/dt + u.grad theta + div v = 0,
//! ```
//!
//! on a periodic square, with large initial data built from Fourier modes
//! concentrated near the anti-diagonal `xi1 + xi2 = 0`.
//!
//! Modules, bottom-up:
//! - [`grid`]: torus, FFTs, spectral and vector fields, dealiasing, Leray projection;
//! - [`norms`]: Sobolev and `W^{s,inf}` norms, energy functionals, inequality probes;
//! - [`initial`]: cone-supported data, perturbations and the smallness condition;
//! - [`linear`]: closed-form linear flow and the forcing it generates;
//! - [`dynamics`]: right-hand sides of the full and perturbation systems;
//! - [`integrator`]: integrating-factor RK4 with blow-up detection;
//! - [`diagnostics`]: per-sample rows, Gronwall envelope and decay verdicts;
//! - [`harness`]: configuration files, runs, sweeps and artifacts.

pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod harness;
pub mod initial;
pub mod integrator;
pub mod linear;
pub mod norms;

pub use error::{Result, TcmError};
pub use grid::{Grid, MultiIndex, RealField, SpectralField, VectorField};
