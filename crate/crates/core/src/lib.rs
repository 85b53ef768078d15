//! Numerical workbench for Lipschitz-constrained Q-functions.
//!
//! - [`problems`]: control problems with analytic oracles.
//! - [`grid`]: tensor grids, multilinear interpolation, the `FIELD v1` format.
//! - [`solver`]: semi-Lagrangian fixed-point solver for `Q^L_p` and the classical `Q`.
//! - [`action`] / [`rollout`]: closed-form `l_p` maximizers, box and tangent-cone
//!   handling, and trajectory rollouts.
//! - [`penalty`]: penalized rewards approximating a box constraint on the action.
//! - [`hjdqn`]: the p-HJDQN learning algorithm on a small MLP.
//! - [`lab`]: sweeps and reports; [`cli`] is the command-line front end.

pub mod action;
pub mod cli;
pub mod config;
pub mod error;
pub mod grid;
pub mod hjdqn;
pub mod lab;
pub mod penalty;
pub mod problems;
pub mod rollout;
pub mod solver;

pub use action::{BoxConstraint, NormIndex};
pub use error::{Error, Result};
pub use grid::{Axis, Grid, ScalarField};
pub use problems::ControlProblem;
pub use solver::{QTable, SolverConfig};
