//! Simulation engine for a periodically driven hybrid optomechanical system:
//! an atomic ensemble and a movable mirror coupled through a driven cavity.
//!
//! The pipeline runs from the classical first moments (direct integration or
//! a Floquet double series in the radiation-pressure coupling), through the
//! covariance matrix of the linearized Gaussian fluctuations, to entanglement,
//! squeezing, phonon-number and Wigner-function diagnostics.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod engineering;
pub mod error;
pub mod floquet;
pub mod fluctuations;
pub mod measures;
pub mod model;
pub mod moments;
pub mod numerics;
pub mod output;
pub mod recipes;
pub mod runner;

pub use error::{Result, SimError};
pub use model::{
    drive_value, validate_params, CovarianceMatrix, DriveSpec, EngineeredCoupling, FirstMoments,
    SystemParams, TimeGrid, ValidationReport,
};
