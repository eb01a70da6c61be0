//! Finite-volume simulation and analysis of the two-species chemotaxis
//! system with signal absorption
//!
//! ```text
//! u_t = Δu - χ₁ ∇·(u ∇w)
//! v_t = Δv - χ₂ ∇·(v ∇w)
//! w_t = Δw - (αu + βv) w
//! ```
//!
//! on an axis-aligned box with zero-flux boundaries.
//!
//! - [`model`]: parameters, grid, states and initial data
//! - [`weight`]: the tangent-kernel weight function and the threshold
//!   construction of admissible `(p, eps)`
//! - [`solver`]: conservative fluxes and explicit time stepping
//! - [`diagnostics`]: masses, energies, the weighted functional and the
//!   checks run against a completed simulation

pub mod diagnostics;
pub mod error;
pub mod model;
pub mod solver;
pub mod weight;

pub use diagnostics::{DecayFit, DiagnosticsRecord, TheoremReport};
pub use error::{DiagnosticsError, ModelError, SolverError, WeightError};
pub use model::{Advection, Grid, InitialData, ModelParams, Profile, ScenarioConfig, State};
pub use solver::{RunOutcome, RunOutput, SchemeOptions};
pub use weight::WeightFunction;
