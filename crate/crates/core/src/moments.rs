//! Classical mean-value dynamics of the mirror, cavity and atoms.

use num_complex::Complex64;

use crate::error::{Result, SimError};
use crate::model::{Drive, FirstMoments, SystemParams, TimeGrid};
use crate::numerics::ode::{integrate_dense, StepperConfig};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// One sample of a first-moment trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub state: FirstMoments,
}

/// Time derivative of the mean values under the nonlinear mean-field equations.
pub fn first_moment_rhs<D: Drive + ?Sized>(
    params: &SystemParams,
    drive: &D,
    t: f64,
    state: &FirstMoments,
) -> FirstMoments {
    let SystemParams {
        omega_m,
        delta_a,
        kappa,
        gamma_m,
        g,
        delta_c,
        gamma_a,
        g0_collective: g0,
        ..
    } = *params;
    let FirstMoments { q, p, a, c } = *state;
    FirstMoments {
        q: omega_m * p,
        p: -omega_m * q - gamma_m * p + g * a.norm_sqr(),
        a: -(kappa + I * (delta_a - g * q)) * a - I * g0 * c + drive.value(t),
        c: -(gamma_a + I * delta_c) * c - I * g0 * a,
    }
}

/// Slice form of [`first_moment_rhs`] on `[q, p, Re a, Im a, Re c, Im c]`.
pub(crate) fn rhs_into<D: Drive + ?Sized>(
    params: &SystemParams,
    drive: &D,
    t: f64,
    y: &[f64],
    dy: &mut [f64],
) {
    let d = first_moment_rhs(params, drive, t, &FirstMoments::from_slice(y));
    dy[..6].copy_from_slice(&d.to_array());
}

/// Integrates the mean-field equations and returns the state on `grid`.
pub fn integrate_first_moments<D: Drive + ?Sized>(
    params: &SystemParams,
    drive: &D,
    init: &FirstMoments,
    grid: &TimeGrid,
    cfg: &StepperConfig,
) -> Result<Vec<TrajectorySample>> {
    let mut out = Vec::with_capacity(grid.times().len());
    integrate_dense(
        |t, y, dy| rhs_into(params, drive, t, y, dy),
        0.0,
        &init.to_array(),
        grid.times(),
        cfg,
        |_| false,
        |t, y| {
            out.push(TrajectorySample {
                t,
                state: FirstMoments::from_slice(y),
            });
            Ok(())
        },
    )?;
    Ok(out)
}

/// Effective optomechanical coupling `G = sqrt(2) g <a>`.
pub fn effective_coupling(g: f64, a_mean: Complex64) -> Complex64 {
    std::f64::consts::SQRT_2 * g * a_mean
}

/// Effective cavity detuning `delta_a - g <q>`.
pub fn effective_detuning(params: &SystemParams, q_mean: f64) -> f64 {
    params.delta_a - params.g * q_mean
}

/// Dressed cavity response denominator `kappa + i Delta + G0^2 / (gamma_a + i Delta_c)`.
fn dressed_denominator(params: &SystemParams, detuning: f64) -> Complex64 {
    params.kappa
        + I * detuning
        + params.g0_collective.powi(2) / (params.gamma_a + I * params.delta_c)
}

fn stationary_state(params: &SystemParams, e0: Complex64, detuning: f64) -> Result<FirstMoments> {
    let den = dressed_denominator(params, detuning);
    if den.norm() < 1e-12 {
        return Err(SimError::SingularDenominator {
            context: "stationary cavity amplitude".into(),
            modulus: den.norm(),
        });
    }
    let a = e0 / den;
    let atom_den = params.gamma_a + I * params.delta_c;
    if atom_den.norm() < 1e-12 {
        return Err(SimError::SingularDenominator {
            context: "stationary atomic amplitude".into(),
            modulus: atom_den.norm(),
        });
    }
    Ok(FirstMoments {
        q: params.g * a.norm_sqr() / params.omega_m,
        p: 0.0,
        a,
        c: -I * params.g0_collective * a / atom_den,
    })
}

/// Stationary mean values for a constant drive `e0`, on the branch reached
/// from `q = 0`.
///
/// Solves `q = g |a(q)|^2 / omega_m` by damped fixed-point iteration; when
/// the iteration does not settle (near bistability) the lowest root of the
/// scalar equation is bracketed instead.
pub fn steady_state_moments(params: &SystemParams, e0: Complex64) -> Result<FirstMoments> {
    let map = |q: f64| -> Result<f64> {
        let s = stationary_state(params, e0, params.delta_a - params.g * q)?;
        Ok(s.q)
    };
    let mut q = 0.0;
    let mut converged = false;
    for damping in [0.5, 0.1, 0.02] {
        q = 0.0;
        for _ in 0..5000 {
            let next = (1.0 - damping) * q + damping * map(q)?;
            let done = (next - q).abs() <= 1e-13 * next.abs().max(1.0);
            q = next;
            if done {
                converged = true;
                break;
            }
        }
        if converged {
            break;
        }
    }
    if !converged {
        q = lowest_fixed_point(&map)?;
    }
    stationary_state(params, e0, params.delta_a - params.g * q)
}

fn lowest_fixed_point(map: &dyn Fn(f64) -> Result<f64>) -> Result<f64> {
    let h = |q: f64| -> Result<f64> { Ok(map(q)? - q) };
    // h(0) > 0 and h(q) < 0 once q exceeds the largest attainable value of map.
    let upper = {
        let mut hi = map(0.0)?.max(1.0);
        while h(hi)? > 0.0 {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(SimError::Diverged {
                    t: 0.0,
                    magnitude: hi,
                });
            }
        }
        hi
    };
    let steps = 20_000;
    let mut lo = 0.0;
    let mut h_lo = h(lo)?;
    let mut hi = upper;
    for k in 1..=steps {
        let q = upper * k as f64 / steps as f64;
        let hq = h(q)?;
        if h_lo > 0.0 && hq <= 0.0 {
            hi = q;
            break;
        }
        lo = q;
        h_lo = hq;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Stationary state with the *effective* detuning `Delta_a = delta_a - g q`
/// prescribed. Returns the parameters with the bare detuning back-computed
/// at this working point, together with the mean values.
pub fn steady_state_at_detuning(
    params: &SystemParams,
    effective_detuning: f64,
    e0: Complex64,
) -> Result<(SystemParams, FirstMoments)> {
    let state = stationary_state(params, e0, effective_detuning)?;
    let resolved = SystemParams {
        delta_a: effective_detuning + params.g * state.q,
        ..*params
    };
    Ok((resolved, state))
}
