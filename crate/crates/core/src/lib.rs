//! Simulation and estimate verification for the nonlocal degenerate
//! parabolic model of grain-boundary motion
//!
//! ```text
//! h_t = a1 (|h_x| h_x / 2 + B h_x)_x - (a2 sigma + a3)(|h_x| + B)
//! sigma(x) = kbeta * P.V. int_R h_x(y) / (x - y) dy
//! ```
//!
//! on a periodic interval, together with its `kappa`-regularization
//! `|p| -> sqrt(p^2 + kappa^2)`.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod evolution;
pub mod grid;
pub mod initial;
pub mod io;
mod linalg;
pub mod model;
pub mod monitors;
pub mod regularization;
pub mod stress;
pub mod studies;

pub use error::{Error, Result};
pub use evolution::{run, Evolver, Scheme, StabilityPolicy, StepperConfig};
pub use grid::{
    backward_difference, derivative_x, forward_difference, make_grid, second_derivative_x, Field,
    Grid,
};
pub use initial::Preset;
pub use linalg::CyclicTridiagonal;
pub use model::{validate_initial_data, ModelParams, Snapshot, Trajectory, ValidationReport};
pub use monitors::{build_report, lp_norm, EstimateReport, TestFunction};
pub use regularization::{abs_kappa, flux_kappa, flux_kappa_error_bound, RegAbs};
pub use stress::{sigma_total, SigmaMethod, StressOperator};
