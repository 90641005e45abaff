//! Regression estimators compared against the neural nets: linear-model
//! variants, CART regression trees and Gaussian-process regression.
//!
//! All fits are pure functions of their inputs and deterministic; models
//! are immutable after fitting. Inputs are assumed z-scored and targets
//! normalized by the caller, matching the rest of the pipeline.

pub mod gpr;
pub mod linear;
pub mod tree;

pub use gpr::{fit_gpr, GprHyper, GprKernel, GprModel};
pub use linear::{fit_linear, LinearModel, LinearVariant, Term};
pub use tree::{fit_tree, TreeModel};
