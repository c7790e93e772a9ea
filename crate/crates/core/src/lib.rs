//! Dual variational formulation of conservative fluid-type systems on the
//! periodic line: entropy machinery, a convex dual solver, consistency and
//! Dafermos harnesses, and exact Burgers structures.

pub mod burgers_exact;
pub mod consistency;
pub mod dafermos;
pub mod dual_solver;
pub mod error;
pub mod framework;
pub mod grid;
pub mod linalg;
pub mod models;
pub mod series;

pub use error::{Error, Result};
pub use framework::{EntropyTimeline, StrongSolutionRecord, WeightProfile};
pub use grid::{MatrixField, SpaceOps, SpaceTimeGrid, StateField, Stencil, TimeLayout};
pub use models::{FluidKind, Model};

/// Library version recorded in run reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
