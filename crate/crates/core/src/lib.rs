//! Numerical toolkit for the sharp `L^p` norm of the quadratically perturbed
//! Riesz operator `(R1^2 - R2^2, tau I)` on the plane.
//!
//! The lower bound is produced by laminates (probability measures on
//! symmetric 2x2 matrices) and the functions whose Hessians realize them;
//! the upper bound machinery is the Burkholder-type majorant `U >= v` and the
//! heat-martingale transform. Every construction is cross-checked by an
//! independent route: closed forms against quadrature, grid Hessians against
//! Fourier multipliers, Monte Carlo against the spectral oracle.
//!
//! Module map:
//!
//! * [`params`], [`burkholder`] - constants and the functions `u`, `v`, `U`.
//! * [`matrix`], [`measures`], [`quadrature`] - matrix measures and the
//!   continuous laminates.
//! * [`staircase`] - finite prelaminate trees approximating the laminates.
//! * [`grid`], [`realization`] - grid functions whose Hessians realize a tree.
//! * [`spectral`] - periodic FFT multipliers.
//! * [`martingale`] - heat-martingale simulation.
//! * [`cli`] - the `rieszcert` command line.

pub mod burkholder;
pub mod cli;
pub mod error;
pub mod grid;
pub mod martingale;
pub mod matrix;
pub mod measures;
pub mod params;
pub mod quadrature;
pub mod realization;
pub mod spectral;
pub mod staircase;
pub mod stats;

pub use error::{Error, Result};
pub use matrix::SymMat2;
pub use params::Params;
