//! Linearized Gaussian fluctuations: drift and diffusion matrices, Lyapunov
//! propagation of the covariance matrix and stability of the linearization.

use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector, Matrix6};

use crate::engineering::ExactSynthesis;
use crate::error::{Result, SimError};
use crate::floquet::FloquetSolution;
use crate::model::{
    CovarianceMatrix, DriveSpec, EngineeredCoupling, FirstMoments, SystemParams, TimeGrid,
    VACUUM_VARIANCE,
};
use crate::moments::{integrate_first_moments, rhs_into};
use crate::numerics::eigen::spectral_abscissa;
use crate::numerics::linalg::solve_linear;
use crate::numerics::ode::{integrate_dense, StepperConfig};

/// Variances beyond this magnitude are treated as a dynamical instability.
pub const DIVERGENCE_BOUND: f64 = 1e12;
/// Allowed undershoot of the symplectic eigenvalues below the vacuum value.
pub const PHYSICALITY_SLACK: f64 = 1e-6;

/// Drift matrix `A(t)` on `(dq, dp, dX, dY, dx, dy)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftMatrix(pub Matrix6<f64>);

/// Diagonal diffusion matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionMatrix(pub Matrix6<f64>);

pub fn build_drift(
    params: &SystemParams,
    q_mean: f64,
    a_mean: num_complex::Complex64,
) -> DriftMatrix {
    let SystemParams {
        omega_m: w,
        delta_a,
        kappa: k,
        gamma_m,
        g,
        delta_c,
        gamma_a,
        g0_collective: g0,
        ..
    } = *params;
    let detuning = delta_a - g * q_mean;
    let gx = SQRT_2 * g * a_mean.re;
    let gy = SQRT_2 * g * a_mean.im;
    #[rustfmt::skip]
    let a = Matrix6::new(
        0.0,  w,        0.0,        0.0,       0.0,       0.0,
        -w,   -gamma_m, gx,         gy,        0.0,       0.0,
        -gy,  0.0,      -k,         detuning,  0.0,       g0,
        gx,   0.0,      -detuning,  -k,        -g0,       0.0,
        0.0,  0.0,      0.0,        g0,        -gamma_a,  delta_c,
        0.0,  0.0,      -g0,        0.0,       -delta_c,  -gamma_a,
    );
    DriftMatrix(a)
}

pub fn build_diffusion(params: &SystemParams) -> DiffusionMatrix {
    let m = Matrix6::from_diagonal(&nalgebra::Vector6::new(
        0.0,
        params.gamma_m * (2.0 * params.n_th + 1.0),
        params.kappa,
        params.kappa,
        params.gamma_a,
        params.gamma_a,
    ));
    DiffusionMatrix(m)
}

impl DriftMatrix {
    pub fn from_moments(params: &SystemParams, m: &FirstMoments) -> Self {
        build_drift(params, m.q, m.a)
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_iterator(6, 6, self.0.iter().copied())
    }

    /// Largest real part of the eigenvalues.
    pub fn spectral_abscissa(&self) -> Result<f64> {
        spectral_abscissa(&self.to_dmatrix())
    }
}

/// `A V + V A^T + D`, exactly symmetric for symmetric `V`.
pub fn lyapunov_rhs(a: &Matrix6<f64>, v: &Matrix6<f64>, d: &Matrix6<f64>) -> Matrix6<f64> {
    let m = a * v;
    m + m.transpose() + d
}

/// Where the drift matrix takes its mean values from.
#[derive(Debug, Clone)]
pub enum MomentSource {
    /// Mean values integrated jointly with the covariance matrix.
    Integrated {
        drive: DriveSpec,
        init: FirstMoments,
    },
    /// Truncated Floquet series.
    Floquet(FloquetSolution),
    /// Closed-form mean values of an engineered coupling.
    Engineered { target: EngineeredCoupling },
    /// Time-independent mean values (constant drive at its fixed point).
    Static(FirstMoments),
}

#[allow(clippy::large_enum_variant)]
enum Resolved<'a> {
    Integrated(&'a DriveSpec, FirstMoments),
    Floquet(&'a FloquetSolution),
    Engineered(ExactSynthesis),
    Static(FirstMoments),
}

impl MomentSource {
    fn resolve(&self, params: &SystemParams) -> Result<Resolved<'_>> {
        Ok(match self {
            MomentSource::Integrated { drive, init } => Resolved::Integrated(drive, *init),
            MomentSource::Floquet(sol) => Resolved::Floquet(sol),
            MomentSource::Engineered { target } => {
                Resolved::Engineered(ExactSynthesis::new(params, target)?)
            }
            MomentSource::Static(m) => Resolved::Static(*m),
        })
    }

    /// Mean values at `t`, integrating from `t = 0` when necessary.
    pub fn moments_at(
        &self,
        params: &SystemParams,
        times: &[f64],
        cfg: &StepperConfig,
    ) -> Result<Vec<FirstMoments>> {
        Ok(match self.resolve(params)? {
            Resolved::Integrated(drive, init) => {
                integrate_first_moments(params, drive, &init, &TimeGrid(times.to_vec()), cfg)?
                    .into_iter()
                    .map(|s| s.state)
                    .collect()
            }
            Resolved::Floquet(sol) => times.iter().map(|&t| sol.evaluate(params.g, t)).collect(),
            Resolved::Engineered(syn) => times.iter().map(|&t| syn.moments(t)).collect(),
            Resolved::Static(m) => vec![m; times.len()],
        })
    }
}

/// One sample of a covariance-matrix trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmSample {
    pub t: f64,
    pub moments: FirstMoments,
    pub cm: CovarianceMatrix,
}

fn unpack(y: &[f64]) -> Matrix6<f64> {
    Matrix6::from_column_slice(&y[..36])
}

fn check_sample(t: f64, cm: &CovarianceMatrix) -> Result<()> {
    if let Some(bad) =
        cm.0.iter()
            .find(|v| !v.is_finite() || v.abs() > DIVERGENCE_BOUND)
    {
        return Err(SimError::Diverged {
            t,
            magnitude: bad.abs(),
        });
    }
    let nu = cm.min_symplectic_eigenvalue()?;
    if nu < VACUUM_VARIANCE - PHYSICALITY_SLACK {
        return Err(SimError::Unphysical { t, nu });
    }
    Ok(())
}

fn symmetrize_in_place(y: &mut [f64]) -> bool {
    let mut changed = false;
    for i in 0..6 {
        for j in (i + 1)..6 {
            let (u, l) = (y[j * 6 + i], y[i * 6 + j]);
            if u != l {
                let m = 0.5 * (u + l);
                y[j * 6 + i] = m;
                y[i * 6 + j] = m;
                changed = true;
            }
        }
    }
    changed
}

/// Propagates `dV/dt = A(t) V + V A(t)^T + D` from `t = 0` and samples on `grid`.
///
/// `V` is symmetrized after each accepted step; samples are checked for
/// divergence and for symplectic eigenvalues below the vacuum value.
pub fn integrate_lyapunov(
    params: &SystemParams,
    source: &MomentSource,
    v0: &CovarianceMatrix,
    grid: &TimeGrid,
    cfg: &StepperConfig,
) -> Result<Vec<CmSample>> {
    let nu0 = v0.min_symplectic_eigenvalue()?;
    if nu0 < VACUUM_VARIANCE - PHYSICALITY_SLACK {
        return Err(SimError::Unphysical { t: 0.0, nu: nu0 });
    }
    let d = build_diffusion(params).0;
    let resolved = source.resolve(params)?;
    let mut cfg = *cfg;
    cfg.overflow_guard = cfg.overflow_guard.max(DIVERGENCE_BOUND);
    let v0 = v0.symmetrized();

    let mut y0: Vec<f64> = v0.0.as_slice().to_vec();
    if let Resolved::Integrated(_, init) = &resolved {
        y0.extend_from_slice(&init.to_array());
    }
    let moments_of = |t: f64, y: &[f64]| -> FirstMoments {
        match &resolved {
            Resolved::Integrated(..) => FirstMoments::from_slice(&y[36..]),
            Resolved::Floquet(sol) => sol.evaluate(params.g, t),
            Resolved::Engineered(syn) => syn.moments(t),
            Resolved::Static(m) => *m,
        }
    };

    let mut out = Vec::with_capacity(grid.times().len());
    integrate_dense(
        |t, y, dy| {
            let m = moments_of(t, y);
            let a = DriftMatrix::from_moments(params, &m).0;
            let dv = lyapunov_rhs(&a, &unpack(y), &d);
            dy[..36].copy_from_slice(dv.as_slice());
            if let Resolved::Integrated(drive, _) = &resolved {
                rhs_into(params, *drive, t, &y[36..], &mut dy[36..]);
            }
        },
        0.0,
        &y0,
        grid.times(),
        &cfg,
        |y| symmetrize_in_place(&mut y[..36]),
        |t, y| {
            let cm = CovarianceMatrix(unpack(y)).symmetrized();
            check_sample(t, &cm)?;
            out.push(CmSample {
                t,
                moments: moments_of(t, y),
                cm,
            });
            Ok(())
        },
    )?;
    Ok(out)
}

/// Solves `A X + X A^T + D = 0` for symmetric `X` (any dimension), using the
/// `n (n + 1) / 2` independent entries as unknowns.
pub fn solve_lyapunov(a: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let index: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let m = index.len();
    let mut op = DMatrix::<f64>::zeros(m, m);
    for (col, &(k, l)) in index.iter().enumerate() {
        let mut e = DMatrix::<f64>::zeros(n, n);
        e[(k, l)] = 1.0;
        e[(l, k)] = 1.0;
        let ae = a * &e;
        let img = &ae + ae.transpose();
        for (row, &(i, j)) in index.iter().enumerate() {
            op[(row, col)] = img[(i, j)];
        }
    }
    let rhs = DVector::from_iterator(
        m,
        index.iter().map(|&(i, j)| -0.5 * (d[(i, j)] + d[(j, i)])),
    );
    let x = solve_linear(&op, &rhs)?;
    let mut out = DMatrix::<f64>::zeros(n, n);
    for (&(i, j), v) in index.iter().zip(x.iter()) {
        out[(i, j)] = *v;
        out[(j, i)] = *v;
    }
    Ok(out)
}

/// Algebraic steady state of the covariance matrix for a constant drift.
pub fn steady_state_lyapunov(a: &DriftMatrix, d: &DiffusionMatrix) -> Result<CovarianceMatrix> {
    let max_re = a.spectral_abscissa()?;
    if max_re >= 0.0 {
        return Err(SimError::NotStable { max_re });
    }
    let x = solve_lyapunov(
        &a.to_dmatrix(),
        &DMatrix::from_iterator(6, 6, d.0.iter().copied()),
    )?;
    Ok(CovarianceMatrix(Matrix6::from_iterator(x.iter().copied())))
}

/// `max |dV/dt|` for the given drift and covariance matrix.
pub fn lyapunov_rate(a: &DriftMatrix, v: &CovarianceMatrix, d: &DiffusionMatrix) -> f64 {
    lyapunov_rhs(&a.0, &v.0, &d.0).amax()
}

/// Steady-state test `max |dV/dt| < 1e-8 max |D|`.
pub fn is_stationary(a: &DriftMatrix, v: &CovarianceMatrix, d: &DiffusionMatrix) -> bool {
    lyapunov_rate(a, v, d) < 1e-8 * d.0.amax()
}

/// Outcome of sampling the drift spectrum over one period.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub stable: bool,
    /// Maximum over samples of the largest real part of the eigenvalues.
    pub margin: f64,
    pub samples: usize,
}

/// Tolerance on the largest real part below which the system is stable.
pub const STABILITY_TOLERANCE: f64 = 1e-10;

/// Stability of the linearization sampled along the given mean values.
pub fn stability_of(params: &SystemParams, moments: &[FirstMoments]) -> Result<StabilityReport> {
    let mut margin = f64::NEG_INFINITY;
    for m in moments {
        if !m.is_finite() {
            return Ok(StabilityReport {
                stable: false,
                margin: f64::INFINITY,
                samples: moments.len(),
            });
        }
        margin = margin.max(DriftMatrix::from_moments(params, m).spectral_abscissa()?);
    }
    Ok(StabilityReport {
        stable: margin < -STABILITY_TOLERANCE,
        margin,
        samples: moments.len(),
    })
}

/// Samples the drift spectrum at `samples_per_period` equally spaced times
/// over `[t_start, t_start + period)`.
pub fn stability_check(
    params: &SystemParams,
    source: &MomentSource,
    t_start: f64,
    period: f64,
    samples_per_period: usize,
    cfg: &StepperConfig,
) -> Result<StabilityReport> {
    let n = samples_per_period.max(1);
    let times: Vec<f64> = (0..n)
        .map(|k| t_start + period * k as f64 / n as f64)
        .collect();
    let moments = match source.moments_at(params, &times, cfg) {
        Ok(m) => m,
        Err(SimError::Diverged { .. }) => {
            return Ok(StabilityReport {
                stable: false,
                margin: f64::INFINITY,
                samples: 0,
            })
        }
        Err(e) => return Err(e),
    };
    stability_of(params, &moments)
}
