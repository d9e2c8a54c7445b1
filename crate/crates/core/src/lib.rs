//! Euler–Poincaré reduction on Lie groups and homogeneous spaces.
//!
//! The crate realizes reduced Lagrangian mechanics numerically: coordinate Lie
//! algebras ([`algebra`]), actions on advected parameters ([`actions`]), reduced
//! Lagrangians ([`lagrangian`]), residuals and integration of the four equation
//! families ([`dynamics`]), and executable invariance checks for the path-group
//! action that makes homogeneous-space reduction well defined ([`invariance`]).
//! Five mechanical systems come fully wired in [`systems`].

pub mod actions;
pub mod algebra;
pub mod convergence;
pub mod dynamics;
pub mod error;
pub mod invariance;
pub mod lagrangian;
pub mod lattice;
pub mod sampling;
pub mod systems;
pub mod verification;

pub use actions::{ActionDescriptor, ActionKind, AdvectedState, CocycleKind};
pub use algebra::{AlgElem, Algebra, DualElem, GroupElem};
pub use dynamics::{EPState, EquationFamily, Trajectory};
pub use error::{EpError, Result};
pub use invariance::{CheckReport, CurvePair, HPath, Schedule};
pub use lagrangian::{Kernel, ReducedLagrangian, SpinLagrangian};
pub use lattice::Grid;
pub use systems::{build_system, Conserved, SystemBundle, SystemName, SystemParams};
