use thiserror::Error;

/// Errors raised by the simulation pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepFailure { t: f64, h: f64 },

    #[error("state diverged at t = {t}: |y| = {magnitude:e} exceeds guard")]
    Diverged { t: f64, magnitude: f64 },

    #[error("singular denominator in {context}: modulus {modulus:e}")]
    SingularDenominator { context: String, modulus: f64 },

    #[error("degenerate exponents s{i} and s{j} (|s{i} - s{j}| = {gap:e})")]
    DegenerateExponents { i: usize, j: usize, gap: f64 },

    #[error("unphysical covariance matrix at t = {t}: symplectic eigenvalue {nu} < 1/2")]
    Unphysical { t: f64, nu: f64 },

    #[error("drift matrix is not Hurwitz (max real eigenvalue {max_re:e})")]
    NotStable { max_re: f64 },

    #[error("eigenvalue iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("singular matrix (pivot {pivot:e})")]
    Singular { pivot: f64 },

    #[error("non-physical two-mode covariance matrix (discriminant {discriminant:e})")]
    NonPhysical { discriminant: f64 },

    #[error("matrix is not positive definite (det = {det:e})")]
    NonPositive { det: f64 },

    #[error("singular covariance matrix (det = {det:e})")]
    SingularCm { det: f64 },

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
