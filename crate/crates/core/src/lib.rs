//! Simulation of a 1-D cell/chemoattractant chemotaxis system and recovery
//! of the concentration-dependent chemotactic sensitivity a(c) from noisy
//! space-time measurements by Tikhonov-regularized output least squares.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod inversion;
pub mod pde;
pub mod presets;
pub mod regselect;
pub mod sensitivity;
pub mod synth;
pub mod tridiag;

pub use error::{Error, Result};
pub use grid::{PhysicalParams, SimulationGrid};
pub use inversion::{InversionResult, LmConfig, TikhonovProblem};
pub use pde::{SolverOptions, StateField, StateTrajectory, Transport};
pub use sensitivity::{AnalyticSensitivity, BasisMassMatrix, Sensitivity, SensitivityFunction};
pub use synth::NoisyData;
