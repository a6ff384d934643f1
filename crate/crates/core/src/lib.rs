//! Continuous-time Bayesian persuasion with costly delay.
//!
//! A sender reveals information about a binary state through a Brownian
//! signal and pays an increasing convex cost of delay. The receiver approves
//! once her posterior reaches a threshold. This crate simulates the belief
//! diffusion (optionally garbled), evaluates exit-time costs in closed form
//! and by Monte Carlo, and solves the sender's reduced problem of choosing
//! the lower stopping belief.
//!
//! Module map:
//! - [`model`]: parameters, terminal laws, garbling policies, hitting statistics
//! - [`dynamics`]: natural-scale path simulation with time change, Euler oracle
//! - [`closed_forms`]: exit-time Laplace transform, moments, potential integrals
//! - [`costs`]: delay cost models, expected cost, increasing-convex-order checks
//! - [`solver`]: the one-dimensional sender problem and comparative statics

pub mod closed_forms;
pub mod costs;
pub mod dynamics;
mod error;
pub mod model;
pub mod optimize;
pub mod quadrature;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
pub use model::{GarblingPolicy, HittingStats, ModelParams, TerminalLaw};
