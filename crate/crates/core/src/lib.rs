//! Pseudospectral laboratory for the theta-equation
//! `(1 - ∂²) u_t + (1 - theta ∂²)(u²/2)_x = (1 - 4 theta)(u_x²/2)_x`
//! on a periodic box.

pub mod analysis;
pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod lagrangian;
pub mod runner;
pub mod scenarios;
pub mod spectral;

pub use dynamics::{evolve, SimConfig, ThetaParam, Trajectory};
pub use error::{Error, Result};
pub use spectral::{Field, Grid};
