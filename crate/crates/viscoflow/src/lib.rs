//! Steady incompressible viscoplastic (Bingham-type) flow on staggered grids,
//! with a regularized variational-inequality solver, an optimal-control layer
//! over bounded admissible force sets, and a diagnostics suite that checks the
//! underlying energy identities and inequalities numerically.

pub mod calculus;
pub mod config;
pub mod control;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod rheology;
pub mod solver;

pub use error::Error;
