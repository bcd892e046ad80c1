//! Dormand-Prince 5(4) integrator with error control and 4th-order dense output.
//!
//! Complex states are handled by the callers through real/imaginary
//! interleaving; the integrator only sees `&[f64]`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Error-control settings shared by every integration in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepperConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub overflow_guard: f64,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_step: 0.1,
            overflow_guard: 1e12,
        }
    }
}

impl StepperConfig {
    /// Defaults with `max_step = period / 50` for modulated problems, `0.1` otherwise.
    pub fn for_period(period: Option<f64>) -> Self {
        Self {
            max_step: period.map_or(0.1, |tau| tau / 50.0),
            ..Self::default()
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.rel_tol > 0.0) {
            out.push("rel_tol must be positive".into());
        }
        if !(self.abs_tol > 0.0) {
            out.push("abs_tol must be positive".into());
        }
        if !(self.max_step > 0.0) {
            out.push("max_step must be positive".into());
        }
        if !(self.overflow_guard > 0.0) {
            out.push("overflow_guard must be positive".into());
        }
        out
    }
}

/// One accepted step together with its dense-output polynomial.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub t: f64,
    pub t_next: f64,
    pub y_next: Vec<f64>,
    /// Scaled RMS local error estimate of the accepted step (<= 1).
    pub error: f64,
    /// Step size proposed for the next step.
    pub h_next: f64,
    dense: [Vec<f64>; 5],
}

impl StepResult {
    /// Continuous extension on `[t, t_next]`, 4th order accurate.
    pub fn interpolate(&self, t: f64, out: &mut [f64]) {
        let h = self.t_next - self.t;
        let theta = (t - self.t) / h;
        let theta1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = &self.dense;
        for i in 0..out.len() {
            out[i] = r1[i] + theta * (r2[i] + theta1 * (r3[i] + theta * (r4[i] + theta1 * r5[i])));
        }
    }
}

struct Workspace {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y1: Vec<f64>,
    err: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            y1: vec![0.0; n],
            err: vec![0.0; n],
        }
    }
}

fn rk_stages<F>(f: &mut F, t: f64, y: &[f64], h: f64, ws: &mut Workspace)
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let Workspace { k, tmp, y1, err } = ws;
    let (k1, rest) = k.split_at_mut(1);
    let (k2, rest) = rest.split_at_mut(1);
    let (k3, rest) = rest.split_at_mut(1);
    let (k4, rest) = rest.split_at_mut(1);
    let (k5, rest) = rest.split_at_mut(1);
    let (k6, k7) = rest.split_at_mut(1);
    let (k1, k2, k3, k4, k5, k6, k7) = (
        &k1[0], &mut k2[0], &mut k3[0], &mut k4[0], &mut k5[0], &mut k6[0], &mut k7[0],
    );

    for i in 0..n {
        tmp[i] = y[i] + h * A21 * k1[i];
    }
    f(t + C2 * h, tmp, k2);
    for i in 0..n {
        tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
    }
    f(t + C3 * h, tmp, k3);
    for i in 0..n {
        tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
    }
    f(t + C4 * h, tmp, k4);
    for i in 0..n {
        tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
    }
    f(t + C5 * h, tmp, k5);
    for i in 0..n {
        tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
    }
    f(t + h, tmp, k6);
    for i in 0..n {
        y1[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
    }
    f(t + h, y1, k7);
    for i in 0..n {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
}

fn error_norm(y: &[f64], ws: &Workspace, cfg: &StepperConfig) -> f64 {
    let n = y.len();
    let sum: f64 = (0..n)
        .map(|i| {
            let sc = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(ws.y1[i].abs());
            let e = ws.err[i] / sc;
            e * e
        })
        .sum();
    (sum / n as f64).sqrt()
}

fn initial_step<F>(f: &mut F, t: f64, y: &[f64], f0: &[f64], cfg: &StepperConfig) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let sc: Vec<f64> = y
        .iter()
        .map(|v| cfg.abs_tol + cfg.rel_tol * v.abs())
        .collect();
    let rms = |v: &dyn Fn(usize) -> f64| {
        ((0..n).map(|i| (v(i) / sc[i]).powi(2)).sum::<f64>() / n as f64).sqrt()
    };
    let d0 = rms(&|i| y[i]);
    let d1 = rms(&|i| f0[i]);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(cfg.max_step);
    let y1: Vec<f64> = (0..n).map(|i| y[i] + h0 * f0[i]).collect();
    let mut f1 = vec![0.0; n];
    f(t + h0, &y1, &mut f1);
    let d2 = rms(&|i| f1[i] - f0[i]) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(cfg.max_step)
}

/// Adaptive Dormand-Prince integrator holding its current state.
pub struct Dopri5<F> {
    f: F,
    cfg: StepperConfig,
    t: f64,
    y: Vec<f64>,
    h: f64,
    ws: Workspace,
    evaluations: usize,
}

impl<F> Dopri5<F>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    pub fn new(mut f: F, t0: f64, y0: &[f64], cfg: StepperConfig) -> Self {
        let mut ws = Workspace::new(y0.len());
        f(t0, y0, &mut ws.k[0]);
        let h = initial_step(&mut f, t0, y0, &ws.k[0], &cfg);
        Self {
            f,
            cfg,
            t: t0,
            y: y0.to_vec(),
            h,
            ws,
            evaluations: 2,
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    /// Advances by one accepted step, not crossing `t_limit`.
    pub fn step(&mut self, t_limit: f64) -> Result<StepResult> {
        let mut h = self.h.min(self.cfg.max_step).min(t_limit - self.t);
        let mut rejected = false;
        loop {
            if h < 1e-14 * self.t.abs().max(1.0) {
                return Err(SimError::StepFailure { t: self.t, h });
            }
            rk_stages(&mut self.f, self.t, &self.y, h, &mut self.ws);
            self.evaluations += 6;
            let err = error_norm(&self.y, &self.ws, &self.cfg);
            if err.is_finite() && err <= 1.0 {
                let fac_max = if rejected { 1.0 } else { FAC_MAX };
                let fac = if err == 0.0 {
                    fac_max
                } else {
                    (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, fac_max)
                };
                let t_next = if t_limit - (self.t + h) <= 1e-14 * t_limit.abs().max(1.0) {
                    t_limit
                } else {
                    self.t + h
                };
                let n = self.y.len();
                let k = &self.ws.k;
                let y1 = &self.ws.y1;
                let mut r2 = vec![0.0; n];
                let mut r3 = vec![0.0; n];
                let mut r4 = vec![0.0; n];
                let mut r5 = vec![0.0; n];
                for i in 0..n {
                    let ydiff = y1[i] - self.y[i];
                    let bspl = h * k[0][i] - ydiff;
                    r2[i] = ydiff;
                    r3[i] = bspl;
                    r4[i] = ydiff - h * k[6][i] - bspl;
                    r5[i] = h
                        * (D1 * k[0][i]
                            + D3 * k[2][i]
                            + D4 * k[3][i]
                            + D5 * k[4][i]
                            + D6 * k[5][i]
                            + D7 * k[6][i]);
                }
                let result = StepResult {
                    t: self.t,
                    t_next,
                    y_next: y1.clone(),
                    error: err,
                    h_next: h * fac,
                    dense: [self.y.clone(), r2, r3, r4, r5],
                };
                let guard = self.cfg.overflow_guard;
                if let Some(bad) = y1.iter().find(|v| !v.is_finite() || v.abs() > guard) {
                    return Err(SimError::Diverged {
                        t: t_next,
                        magnitude: bad.abs(),
                    });
                }
                self.t = t_next;
                self.y.copy_from_slice(y1);
                let (first, rest) = self.ws.k.split_at_mut(1);
                first[0].copy_from_slice(&rest[5]);
                self.h = h * fac;
                return Ok(result);
            }
            rejected = true;
            let fac = if err.is_finite() {
                (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, 1.0)
            } else {
                FAC_MIN
            };
            h *= fac;
        }
    }

    /// Replaces the current state (e.g. after a projection); refreshes the
    /// cached derivative.
    pub fn reset_state(&mut self, y: &[f64]) {
        self.y.copy_from_slice(y);
        (self.f)(self.t, &self.y, &mut self.ws.k[0]);
        self.evaluations += 1;
    }
}

/// Single adaptive step from `(t, y)`: retries internally until the local
/// error is accepted. Returns the step together with its error estimate.
pub fn ode_step<F>(f: F, t: f64, y: &[f64], cfg: &StepperConfig) -> Result<StepResult>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let mut stepper = Dopri5::new(f, t, y, *cfg);
    stepper.step(t + cfg.max_step)
}

/// Integrates from `t0` and reports the state at every time in `t_out`
/// (ascending, all `>= t0`) via dense interpolation.
///
/// `project` may modify the state after every accepted step and must return
/// `true` when it did so.
pub fn integrate_dense<F, P, O>(
    f: F,
    t0: f64,
    y0: &[f64],
    t_out: &[f64],
    cfg: &StepperConfig,
    mut project: P,
    mut observe: O,
) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    P: FnMut(&mut [f64]) -> bool,
    O: FnMut(f64, &[f64]) -> Result<()>,
{
    debug_assert!(t_out.windows(2).all(|w| w[0] <= w[1]));
    let mut stepper = Dopri5::new(f, t0, y0, *cfg);
    let mut buf = vec![0.0; y0.len()];
    let mut next = 0;
    while next < t_out.len() && t_out[next] <= t0 {
        observe(t_out[next], y0)?;
        next += 1;
    }
    let Some(&t_end) = t_out.last() else {
        return Ok(y0.to_vec());
    };
    while stepper.t() < t_end {
        let step = stepper.step(t_end)?;
        while next < t_out.len() && t_out[next] <= step.t_next {
            if t_out[next] == step.t_next {
                observe(t_out[next], &step.y_next)?;
            } else {
                step.interpolate(t_out[next], &mut buf);
                observe(t_out[next], &buf)?;
            }
            next += 1;
        }
        let mut y = stepper.y().to_vec();
        if project(&mut y) {
            stepper.reset_state(&y);
        }
    }
    Ok(stepper.y().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn exp_decay(rel_tol: f64) -> f64 {
        let cfg = StepperConfig {
            rel_tol,
            abs_tol: rel_tol * 1e-3,
            max_step: 1.0,
            ..Default::default()
        };
        let y = integrate_dense(
            |_, y, dy| dy[0] = -y[0],
            0.0,
            &[1.0],
            &[1.0],
            &cfg,
            |_| false,
            |_, _| Ok(()),
        )
        .unwrap();
        (y[0] - (-1.0f64).exp()).abs() / (-1.0f64).exp()
    }

    #[test]
    fn scalar_exponential() {
        assert!(exp_decay(1e-9) < 1e-9);
    }

    #[test]
    fn tighter_tolerance_reduces_error() {
        let coarse = exp_decay(1e-5);
        let fine = exp_decay(1e-5 / 16.0);
        assert!(coarse / fine >= 4.0, "coarse {coarse:e} fine {fine:e}");
    }

    #[test]
    fn harmonic_oscillator_energy_drift() {
        let cfg = StepperConfig::default();
        let t_end = 100.0 * 2.0 * std::f64::consts::PI;
        let y = integrate_dense(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            &[1.0, 0.0],
            &[t_end],
            &cfg,
            |_| false,
            |_, _| Ok(()),
        )
        .unwrap();
        let energy = 0.5 * (y[0] * y[0] + y[1] * y[1]);
        assert!((energy - 0.5).abs() / 0.5 <= 1e-6);
        assert_relative_eq!(y[0], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn dense_output_is_fourth_order() {
        // Sample a rotating solution between steps and compare with the exact value.
        let cfg = StepperConfig {
            max_step: 0.5,
            ..Default::default()
        };
        let ts: Vec<f64> = (0..200).map(|i| i as f64 * 0.0731).collect();
        integrate_dense(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            &[1.0, 0.0],
            &ts,
            &cfg,
            |_| false,
            |t, y| {
                assert!((y[0] - t.cos()).abs() < 1e-8, "t = {t}");
                assert!((y[1] + t.sin()).abs() < 1e-8, "t = {t}");
                Ok(())
            },
        )
        .unwrap();
    }

    #[test]
    fn overflow_guard_trips() {
        let cfg = StepperConfig {
            overflow_guard: 1e6,
            max_step: 1.0,
            ..Default::default()
        };
        let err = integrate_dense(
            |_, y, dy| dy[0] = y[0],
            0.0,
            &[1.0],
            &[100.0],
            &cfg,
            |_| false,
            |_, _| Ok(()),
        )
        .unwrap_err();
        assert!(matches!(err, SimError::Diverged { .. }));
    }

    #[test]
    fn finite_time_blowup_underflows() {
        // y' = y^2 from y(0) = 1 blows up at t = 1.
        let cfg = StepperConfig {
            overflow_guard: f64::INFINITY,
            ..Default::default()
        };
        let err = integrate_dense(
            |_, y, dy| dy[0] = y[0] * y[0],
            0.0,
            &[1.0],
            &[2.0],
            &cfg,
            |_| false,
            |_, _| Ok(()),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            SimError::StepFailure { .. } | SimError::Diverged { .. }
        ));
    }

    #[test]
    fn single_step_reports_error_estimate() {
        let cfg = StepperConfig::default();
        let s = ode_step(|_, y, dy| dy[0] = -y[0], 0.0, &[1.0], &cfg).unwrap();
        assert!(s.t_next > 0.0 && s.error <= 1.0);
        assert_relative_eq!(s.y_next[0], (-s.t_next).exp(), max_relative = 1e-9);
    }

    #[test]
    fn deterministic() {
        let run = || {
            integrate_dense(
                |t, y, dy| dy[0] = -y[0] + t.sin(),
                0.0,
                &[0.3],
                &[5.0],
                &StepperConfig::default(),
                |_| false,
                |_, _| Ok(()),
            )
            .unwrap()
        };
        assert_eq!(run()[0].to_bits(), run()[0].to_bits());
    }
}
