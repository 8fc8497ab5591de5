//! Numerical realisation of a quasi-static complete-damage model.
//!
//! The displacement `u` solves the degenerate elliptic problem
//! `−div(T_δ(z)∇u) = g` and the damage `z ∈ (0, 1]` evolves by the
//! irreversible parabolic inclusion
//! `α(z_t) + z_t − Δz + ψ′(z) ∋ −½ T_δ′(z)|∇u|²`, `α = ∂I_{(−∞,0]}`.
//!
//! Modules, bottom-up: [`grid`] (fields, stencils, quadrature),
//! [`potentials`] (truncation, potential, barrier and existence time),
//! [`elliptic`] (displacement solves), [`vi_stepper`] (one implicit damage
//! step), [`simulator`] (coupled runs, energy ledger, certificate and
//! experiment suites).

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod elliptic;
pub mod error;
pub mod grid;
mod linalg;
pub mod par;
pub mod potentials;
pub mod simulator;
pub mod vi_stepper;

pub use error::{Error, Result};
pub use grid::{BoundaryMode, Field, Grid, NormReport};
pub use par::Execution;
pub use potentials::{CoefficientLaw, IdentityFloor, PotentialSpec, Stiffness, TruncationParams};
