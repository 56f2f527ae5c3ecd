//! Boltzmann gain operator Q⁺, its oscillatory Fourier symbol, and a harness
//! that checks the sharp Sobolev regularizing estimates numerically.
//!
//! Modules, bottom-up:
//!
//! * [`geometry`]: pre-collision map, bilinear phase, critical points.
//! * [`partitions`]: dyadic partitions of unity and the region classifier.
//! * [`analytic`]: closed-form test functions and their textual grammar.
//! * [`grid`]: velocity grids, DFT, `D^s`, Lebesgue and Sobolev norms.
//! * [`symbol`]: the symbol `a(x,ξ)` by quadrature and by stationary phase.
//! * [`collision`]: Q⁺, the loss term, the Radon transform family, oracles.
//! * [`verify`]: suites producing [`verify::EstimateReport`]s.
//! * [`config`], [`report`]: configuration and report emission for the CLI.

pub mod analytic;
pub mod collision;
pub mod config;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod partitions;
pub mod quadrature;
pub mod report;
pub mod symbol;
pub mod verify;

pub use analytic::AnalyticFn;
pub use error::{Error, Result};
pub use geometry::Vec3;
pub use grid::{GridFunction, VelocityGrid};
