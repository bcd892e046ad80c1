//! Small dense kernels: adaptive ODE stepping, real eigenvalues, linear solves.

pub mod eigen;
pub mod linalg;
pub mod ode;

pub use eigen::{eigenvalues_real, spectral_abscissa};
pub use linalg::{solve_linear, LuDecomposition};
pub use ode::{integrate_dense, ode_step, Dopri5, StepResult, StepperConfig};
