//! Fault-location estimation for mixed overhead/underground transmission
//! lines, working from the distance relay's R-X impedance display.
//!
//! A mixed line combines overhead sections with underground cable sections
//! whose per-km impedances differ strongly, which is what makes single-ended
//! impedance relaying misjudge cable faults. This crate reproduces that
//! setting at desk scale and estimates fault distance from relay-screen
//! texture instead:
//!
//! 1. [`simulator`]: quasi-steady phasor model of the mixed line; solves
//!    pre-fault load flow and single-line-to-ground faults.
//! 2. [`relay`]: ground-loop impedance, the fault-inception R-X trajectory
//!    and mho zone characteristics.
//! 3. [`raster`]: deterministic rasterization of a trajectory plus zones
//!    into a fixed-window grayscale image (binary PGM).
//! 4. [`glcm`]: gray-level co-occurrence matrices and a 20-statistic
//!    texture feature vector per image.
//! 5. [`mlp`]: from-scratch multilayer perceptron with LM, SCG and GDX
//!    trainers, feed-forward and cascade topologies.
//! 6. [`regression`]: linear-family, CART tree and Gaussian-process
//!    regressors over the same features.
//! 7. [`eval`]: dataset splits, RMSE / percent-error metrics and report
//!    export.
//! 8. [`config`] / [`pipeline`]: config-driven orchestration of the whole
//!    chain with persisted artifacts at every stage.
//!
//! Everything is deterministic given the config and master seed; two runs
//! with the same inputs produce byte-identical artifacts.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod eval;
pub mod glcm;
pub mod linalg;
pub mod mlp;
pub mod model;
pub mod pipeline;
pub mod raster;
pub mod regression;
pub mod relay;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};
