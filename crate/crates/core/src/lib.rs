//! One-class classification with contradictions (universum learning).
//!
//! The crate covers the inductive one-class hinge objective (DOC), its
//! universum extension with a Δ-insensitive contradiction loss (DOC³), a
//! cost-sensitive binary baseline, exact linear dual solvers linking the
//! hinge form to the ν-SVM, Rademacher-complexity bounds with the
//! train/universum correlation Σ(γ), and AUC-based evaluation.

pub mod cli;
pub mod complexity;
pub mod datasets;
pub mod duality;
pub mod error;
pub mod evaluation;
pub mod losses;
pub mod models;
pub mod training;

pub use error::{Error, Result};
