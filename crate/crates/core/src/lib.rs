//! Weighted-space solvability of a fourth-order operator-differential
//! equation on the half-line, with a finite-dimensional model of the
//! operator coefficient.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certifier;
pub mod error;
pub mod grid;
pub mod manufactured;
pub mod operator;
pub mod pencil;
pub mod perturbed;
pub mod principal;
pub mod verifier;

pub use certifier::{SolvabilityCertificate, Verdict};
pub use error::{Error, Result};
pub use grid::{Grid, WeightedGridFunction};
pub use operator::{OperatorModel, PerturbationSet};
pub use perturbed::NeumannOptions;
pub use principal::{BoundaryCorrection, PrincipalSolver, SolveReport, SolveStatus};
