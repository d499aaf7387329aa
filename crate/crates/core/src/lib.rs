//! Parallel-in-time integration by multigrid reduction in time with truncated
//! local coarse grids (AT-MGRIT).
//!
//! The solver works on the space-time system
//!
//! ```text
//! u_0 = g_0,    u_i = Φ_i(u_{i-1}) + g_i,   i = 1..N_t
//! ```
//!
//! and replaces the sequential coarsest-level solve of MGRIT/Parareal by
//! independent forward solves on overlapping windows of at most `k` coarse
//! points. Choosing `k = N_T + 1` recovers Parareal (two levels) or MGRIT
//! (more levels) exactly.
//!
//! Modules:
//! - [`state`] and [`app`]: the state-vector and problem contracts,
//! - [`grids`]: temporal hierarchies, CF-splittings, local coarse grids,
//! - [`solver`]: relaxation, transfer and cycle kernels plus the sequential driver,
//! - [`runtime`]: a simulated multi-rank driver built on message passing,
//! - [`theory`]: dense two-level error propagators and the convergence bound,
//! - [`problems`]: Dahlquist, 1D heat and 2D Gray–Scott applications.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod error;
pub mod grids;
pub mod problems;
pub mod runtime;
pub mod solver;
pub mod state;
pub mod theory;

pub use app::{Application, ForcingConvention, Norm, StepInfo};
pub use error::{Error, Result};
pub use grids::{build_hierarchy, CfSplitting, Hierarchy, LocalCoarseGrid, TimeGrid};
pub use solver::{
    solve, ConvergenceReport, CycleMode, InitialGuess, Relaxation, SolverConfig, SpaceTimeState,
};
pub use state::{random_state, StateVector, Vector};
