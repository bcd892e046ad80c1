//! Drive synthesis for a prescribed effective coupling `G(t) = G1 + G2 exp(-i Omega t)`.
//!
//! Fixing `<a(t)> = G(t) / (sqrt(2) g)` turns the mechanical and atomic
//! mean-field equations into linear, inhomogeneous ODEs whose Laplace-domain
//! solution is a sum of exponentials `sum_i k_i exp(s_i t)`. The cavity
//! equation then yields the drive that realises the target. The exponential
//! sums correspond to initial conditions `q(0) = p(0) = c(0) = 0` with
//! `a(0) = (G1 + G2) / (sqrt(2) g)`.

use std::f64::consts::SQRT_2;

use num_complex::Complex64;

use crate::error::{Result, SimError};
use crate::model::{Drive, DriveSpec, EngineeredCoupling, FirstMoments, SystemParams};

const I: Complex64 = Complex64::new(0.0, 1.0);
const DEGENERACY: f64 = 1e-10;

/// Exponents `s_1..s_7` and amplitudes `k_1..k_7` (stored zero-based).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceCoefficients {
    pub s: [Complex64; 7],
    pub k: [Complex64; 7],
}

fn validate(params: &SystemParams, target: &EngineeredCoupling) -> Result<()> {
    let v = target.violations(params);
    if v.is_empty() {
        Ok(())
    } else {
        Err(SimError::InvalidConfig(v))
    }
}

fn ensure_distinct(s: &[Complex64; 7], pairs: &[(usize, usize)]) -> Result<()> {
    for &(i, j) in pairs {
        let gap = (s[i] - s[j]).norm();
        if gap < DEGENERACY {
            return Err(SimError::DegenerateExponents {
                i: i + 1,
                j: j + 1,
                gap,
            });
        }
    }
    Ok(())
}

pub fn laplace_coefficients(
    params: &SystemParams,
    target: &EngineeredCoupling,
) -> Result<LaplaceCoefficients> {
    validate(params, target)?;
    let SystemParams {
        omega_m,
        gamma_m,
        g,
        delta_c,
        gamma_a,
        g0_collective: g0,
        ..
    } = *params;
    let EngineeredCoupling { g1, g2, big_omega } = *target;

    let root = Complex64::new(gamma_m * gamma_m - 4.0 * omega_m * omega_m, 0.0).sqrt();
    let s1 = (-gamma_m + root) / 2.0;
    let s2 = (-gamma_m - root) / 2.0;
    let s3 = Complex64::new(0.0, -big_omega);
    let s4 = Complex64::new(0.0, big_omega);
    let s5 = Complex64::new(0.0, 0.0);
    let s6 = s3;
    let s7 = -(gamma_a + I * delta_c);
    let s = [s1, s2, s3, s4, s5, s6, s7];
    ensure_distinct(
        &s,
        &[
            (0, 1),
            (0, 2),
            (0, 3),
            (1, 2),
            (1, 3),
            (2, 3),
            (4, 5),
            (4, 6),
            (5, 6),
        ],
    )?;

    let sum_sq = (g1 + g2).powi(2);
    let sq_sum = g1 * g1 + g2 * g2;
    let mech = |i: usize| -> Complex64 {
        let num = sum_sq * s[i] * s[i] + sq_sum * big_omega * big_omega;
        let den: Complex64 = (0..4).filter(|&j| j != i).map(|j| s[i] - s[j]).product();
        num / (2.0 * g * den)
    };
    let atom = |i: usize| -> Complex64 {
        let num = -I * g0 * (g1 + g2) * s[i] + g0 * g1 * big_omega;
        let den: Complex64 = (4..7).filter(|&j| j != i).map(|j| s[i] - s[j]).product();
        num / (SQRT_2 * g * den)
    };
    let k = [
        mech(0),
        mech(1),
        mech(2),
        mech(3),
        atom(4),
        atom(5),
        atom(6),
    ];
    Ok(LaplaceCoefficients { s, k })
}

impl LaplaceCoefficients {
    fn momentum(&self, t: f64) -> (Complex64, Complex64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for i in 0..4 {
            let term = self.k[i] * (self.s[i] * t).exp();
            p += term;
            dp += self.s[i] * term;
        }
        (p, dp)
    }

    /// Mean values at time `t` from the exponential sums.
    pub fn moments(
        &self,
        params: &SystemParams,
        target: &EngineeredCoupling,
        t: f64,
    ) -> FirstMoments {
        let a = target.value(t) / (SQRT_2 * params.g);
        let (p, dp) = self.momentum(t);
        let q = (-dp - params.gamma_m * p + params.g * a.norm_sqr()) / params.omega_m;
        let c = (4..7).map(|i| self.k[i] * (self.s[i] * t).exp()).sum();
        FirstMoments {
            q: q.re,
            p: p.re,
            a,
            c,
        }
    }

    /// Imaginary residue of `p` and `q`, which vanish analytically.
    pub fn reality_defect(
        &self,
        params: &SystemParams,
        target: &EngineeredCoupling,
        t: f64,
    ) -> f64 {
        let a = target.value(t) / (SQRT_2 * params.g);
        let (p, dp) = self.momentum(t);
        let q = (-dp - params.gamma_m * p + params.g * a.norm_sqr()) / params.omega_m;
        p.im.abs().max(q.im.abs())
    }
}

/// Full time-dependent mean values realising the target coupling.
pub fn transient_first_moments(
    params: &SystemParams,
    target: &EngineeredCoupling,
    t: f64,
) -> Result<FirstMoments> {
    Ok(laplace_coefficients(params, target)?.moments(params, target, t))
}

fn off_resonance(params: &SystemParams, target: &EngineeredCoupling) -> Result<f64> {
    let d = target.big_omega.powi(2) - params.omega_m.powi(2);
    if d.abs() < 1e-9 {
        return Err(SimError::SingularDenominator {
            context: "Omega^2 - omega_m^2".into(),
            modulus: d.abs(),
        });
    }
    Ok(d)
}

/// Long-time periodic mean values (decaying exponentials dropped).
pub fn asymptotic_first_moments(
    params: &SystemParams,
    target: &EngineeredCoupling,
    t: f64,
) -> Result<FirstMoments> {
    let d = off_resonance(params, target)?;
    let SystemParams {
        omega_m,
        g,
        delta_c,
        gamma_a,
        g0_collective: g0,
        ..
    } = *params;
    let EngineeredCoupling { g1, g2, big_omega } = *target;
    let em = Complex64::from_polar(1.0, -big_omega * t);
    let ep = Complex64::from_polar(1.0, big_omega * t);
    let a = target.value(t) / (SQRT_2 * g);
    let p = I * g1 * g2 * big_omega / (2.0 * g * d) * (em - ep);
    let q =
        (g1 * g1 + g2 * g2) / (2.0 * g * omega_m) - g1 * g2 * omega_m / (2.0 * g * d) * (em + ep);
    let c = -I * g0 * g1 / (SQRT_2 * g * (gamma_a + I * delta_c))
        + g0 * g2 / (SQRT_2 * I * g * (gamma_a + I * (delta_c - big_omega))) * em;
    Ok(FirstMoments {
        q: q.re,
        p: p.re,
        a,
        c,
    })
}

/// The four drive components `E_2, E_1, E_0, E_-1` of the periodic synthesis.
pub fn modulation_components(
    params: &SystemParams,
    target: &EngineeredCoupling,
) -> Result<DriveSpec> {
    validate(params, target)?;
    let d = off_resonance(params, target)?;
    let SystemParams {
        omega_m,
        delta_a,
        kappa,
        g,
        delta_c,
        gamma_a,
        g0_collective: g0,
        ..
    } = *params;
    let EngineeredCoupling {
        g1,
        g2,
        big_omega: w,
    } = *target;
    let r = 2.0 * SQRT_2 * g;
    let e2 = I * g1 * g2 * g2 * omega_m / (r * d);
    let em1 = I * g1 * g1 * g2 * omega_m / (r * d);
    let e1 = g2 / (SQRT_2 * g) * (kappa + I * (delta_a - w))
        - I * g2 / (r * omega_m) * (2.0 * g1 * g1 + g2 * g2 - g1 * g1 * w * w / d)
        + g0 * g0 * g2 / (SQRT_2 * g * (gamma_a + I * (delta_c - w)));
    let e0 = g1 / (SQRT_2 * g) * (kappa + I * delta_a)
        - I * g1 / (r * omega_m) * (g1 * g1 + 2.0 * g2 * g2 - g2 * g2 * w * w / d)
        + g0 * g0 * g1 / (SQRT_2 * g * (gamma_a + I * delta_c));
    Ok(DriveSpec::new(w, [(2, e2), (1, e1), (0, e0), (-1, em1)]))
}

/// Exact drive `E(t) = a' + (kappa + i delta_a) a - i g a q + i G0 c` built
/// from the transient mean values; not a finite Fourier series.
#[derive(Debug, Clone, Copy)]
pub struct ExactSynthesis {
    params: SystemParams,
    target: EngineeredCoupling,
    coefficients: LaplaceCoefficients,
}

impl ExactSynthesis {
    pub fn new(params: &SystemParams, target: &EngineeredCoupling) -> Result<Self> {
        Ok(Self {
            params: *params,
            target: *target,
            coefficients: laplace_coefficients(params, target)?,
        })
    }

    pub fn moments(&self, t: f64) -> FirstMoments {
        self.coefficients.moments(&self.params, &self.target, t)
    }
}

impl Drive for ExactSynthesis {
    fn value(&self, t: f64) -> Complex64 {
        let p = &self.params;
        let m = self.moments(t);
        let a_dot = -I
            * self.target.big_omega
            * self.target.g2
            * Complex64::from_polar(1.0, -self.target.big_omega * t)
            / (SQRT_2 * p.g);
        a_dot + (p.kappa + I * p.delta_a) * m.a - I * p.g * m.a * m.q + I * p.g0_collective * m.c
    }
}

pub fn exact_drive(
    params: &SystemParams,
    target: &EngineeredCoupling,
    t: f64,
) -> Result<Complex64> {
    Ok(ExactSynthesis::new(params, target)?.value(t))
}

/// Initial mean values implied by the exponential-sum solution.
pub fn synthesis_initial_state(params: &SystemParams, target: &EngineeredCoupling) -> FirstMoments {
    FirstMoments {
        q: 0.0,
        p: 0.0,
        a: Complex64::new((target.g1 + target.g2) / (SQRT_2 * params.g), 0.0),
        c: Complex64::new(0.0, 0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::first_moment_rhs;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn fig6() -> (SystemParams, EngineeredCoupling) {
        (
            SystemParams::engineering_preset(),
            EngineeredCoupling {
                g1: 1.2,
                g2: 0.1,
                big_omega: 2.0,
            },
        )
    }

    #[test]
    fn undamped_roots() {
        let (mut p, t) = fig6();
        p.gamma_m = 0.0;
        let c = laplace_coefficients(&p, &t).unwrap();
        assert!((c.s[0] - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        assert!((c.s[1] - Complex64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn quadratic_roots_fig6() {
        let (p, t) = fig6();
        let c = laplace_coefficients(&p, &t).unwrap();
        // (-1e-3 +- i sqrt(4 - 1e-6)) / 2
        let im = (4.0f64 - 1e-6).sqrt() / 2.0;
        assert!((c.s[0] - Complex64::new(-5e-4, im)).norm() < 1e-15);
        assert!((c.s[1] - Complex64::new(-5e-4, -im)).norm() < 1e-15);
        assert_relative_eq!((c.s[0] + c.s[1]).re, -p.gamma_m, max_relative = 1e-12);
        assert_relative_eq!(
            (c.s[0] * c.s[1]).re,
            p.omega_m.powi(2),
            max_relative = 1e-12
        );
        assert_eq!(c.s[2], Complex64::new(0.0, -2.0));
        assert_eq!(c.s[3], Complex64::new(0.0, 2.0));
        assert_eq!(c.s[4], Complex64::new(0.0, 0.0));
        assert_eq!(c.s[5], c.s[2]);
        assert_eq!(c.s[6], Complex64::new(-1e-3, 1.0));
    }

    #[test]
    fn constant_coupling_amplitudes_recompute() {
        // Independent evaluation of the partial-fraction numerators with G2 = 0.
        let (p, mut t) = fig6();
        t.g2 = 0.0;
        let c = laplace_coefficients(&p, &t).unwrap();
        let (g0, g1, w, g) = (p.g0_collective, t.g1, t.big_omega, p.g);
        let s5 = Complex64::new(0.0, 0.0);
        let s6 = Complex64::new(0.0, -w);
        let s7 = Complex64::new(-p.gamma_a, -p.delta_c);
        let k6 = (-I * g0 * g1 * s6 + g0 * g1 * w) / (SQRT_2 * g * (s6 - s5) * (s6 - s7));
        // -i G0 G1 (-i Omega) + G0 G1 Omega = -G0 G1 Omega + G0 G1 Omega = 0.
        assert!(k6.norm() < 1e-12);
        assert!((c.k[5] - k6).norm() < 1e-12);
        let k5 = g0 * g1 * w / (SQRT_2 * g * (s5 - s6) * (s5 - s7));
        assert!((c.k[4] - k5).norm() <= 1e-12 * k5.norm());
    }

    #[test]
    fn momentum_at_origin_is_amplitude_sum() {
        let (p, t) = fig6();
        let c = laplace_coefficients(&p, &t).unwrap();
        let m = transient_first_moments(&p, &t, 0.0).unwrap();
        let sum: Complex64 = c.k[..4].iter().sum();
        assert!((m.p - sum.re).abs() < 1e-9 * c.k[0].norm());
        assert!(sum.im.abs() < 1e-9 * c.k[0].norm());
        // Zero initial conditions of the exponential-sum solution.
        assert!(m.p.abs() < 1e-9 * c.k[0].norm());
        assert!(m.q.abs() < 1e-9 * (t.g1 * t.g1 / p.g));
        assert!(m.c.norm() < 1e-9 * c.k[4].norm());
    }

    #[test]
    fn transient_satisfies_mean_field_equations() {
        // q' = omega_m p and the p, c equations hold along the exponential sums;
        // the exact synthesis closes the cavity equation.
        let (p, t) = fig6();
        let drive = ExactSynthesis::new(&p, &t).unwrap();
        let h = 1e-4;
        for time in [0.5, 3.0, 40.0] {
            let m = drive.moments(time);
            let fwd = drive.moments(time + h);
            let bwd = drive.moments(time - h);
            let rhs = first_moment_rhs(&p, &drive, time, &m);
            let dq = (fwd.q - bwd.q) / (2.0 * h);
            let dp = (fwd.p - bwd.p) / (2.0 * h);
            let da = (fwd.a - bwd.a) / (2.0 * h);
            let dc = (fwd.c - bwd.c) / (2.0 * h);
            assert!((dq - rhs.q).abs() <= 1e-6 * m.q.abs(), "q at {time}");
            assert!((dp - rhs.p).abs() <= 1e-6 * m.q.abs(), "p at {time}");
            assert!(
                (da - rhs.a).norm() <= 1e-6 * p.kappa * m.a.norm(),
                "a at {time}"
            );
            assert!(
                (dc - rhs.c).norm() <= 1e-6 * m.c.norm().max(1.0),
                "c at {time}"
            );
            assert!(drive.coefficients.reality_defect(&p, &t, time) <= 1e-9 * m.q.abs());
        }
    }

    #[test]
    fn asymptote_constant_coupling() {
        let (p, mut t) = fig6();
        t.g2 = 0.0;
        for time in [0.0, 1.0, 7.3] {
            let m = asymptotic_first_moments(&p, &t, time).unwrap();
            assert_relative_eq!(
                m.q,
                t.g1 * t.g1 / (2.0 * p.g * p.omega_m),
                max_relative = 1e-14
            );
            assert_eq!(m.p, 0.0);
        }
    }

    #[test]
    fn asymptote_periodic_and_static_offset() {
        let (p, t) = fig6();
        let tau = t.period();
        let x = asymptotic_first_moments(&p, &t, 0.3).unwrap();
        let y = asymptotic_first_moments(&p, &t, 0.3 + tau).unwrap();
        assert!((x.q - y.q).abs() <= 1e-12 * x.q.abs());
        assert!((x.c - y.c).norm() <= 1e-12 * x.c.norm());
        // Static offset (1.44 + 0.01) / (2e-3) = 725; the oscillating part averages out.
        let avg: f64 = (0..64)
            .map(|k| {
                asymptotic_first_moments(&p, &t, k as f64 * tau / 64.0)
                    .unwrap()
                    .q
            })
            .sum::<f64>()
            / 64.0;
        assert_relative_eq!(avg, 725.0, max_relative = 1e-12);
    }

    #[test]
    fn transient_approaches_asymptote() {
        let (p, t) = fig6();
        let time = 50.0 * t.period();
        let full = transient_first_moments(&p, &t, time).unwrap();
        let asym = asymptotic_first_moments(&p, &t, time).unwrap();
        let c = laplace_coefficients(&p, &t).unwrap();
        // Undecayed mechanical part of q ~ |s| |k1| e^{-gamma_m t / 2} (two conjugate terms),
        // plus the gamma_m p term dropped by the asymptote.
        let envelope = 2.0 * c.k[0].norm() * (-p.gamma_m * time / 2.0).exp() * 2.0 / p.omega_m
            + p.gamma_m * 2.0 * c.k[2].norm() / p.omega_m
            + 1e-9 * full.q.abs();
        assert!(
            (full.q - asym.q).abs() <= envelope,
            "{} vs {}",
            full.q,
            asym.q
        );
        let atom_env = c.k[6].norm() * (-p.gamma_a * time).exp() + 1e-9 * full.c.norm();
        assert!((full.c - asym.c).norm() <= atom_env);
    }

    #[test]
    fn approximate_k3() {
        let (p, t) = fig6();
        let c = laplace_coefficients(&p, &t).unwrap();
        let approx =
            I * t.g1 * t.g2 * t.big_omega / (2.0 * p.g * (t.big_omega.powi(2) - p.omega_m.powi(2)));
        assert!((c.k[2] - approx).norm() <= 1e-2 * c.k[2].norm());
    }

    #[test]
    fn components_constant_coupling() {
        let (p, mut t) = fig6();
        t.g2 = 0.0;
        let d = modulation_components(&p, &t).unwrap();
        assert_eq!(d.component(2), Complex64::new(0.0, 0.0));
        assert_eq!(d.component(1), Complex64::new(0.0, 0.0));
        assert_eq!(d.component(-1), Complex64::new(0.0, 0.0));
        // E_0 = (G1/sqrt2 g)(kappa + i delta_a) - i G1^3/(2 sqrt2 g omega_m) + G0^2 G1/(sqrt2 g (gamma_a + i Delta_c))
        let s2g = SQRT_2 * p.g;
        let e0 = t.g1 / s2g * Complex64::new(p.kappa, p.delta_a)
            - I * t.g1.powi(3) / (2.0 * s2g * p.omega_m)
            + p.g0_collective.powi(2) * t.g1 / (s2g * Complex64::new(p.gamma_a, p.delta_c));
        assert!((d.component(0) - e0).norm() <= 1e-12 * e0.norm());
    }

    #[test]
    fn component_ratio() {
        let (p, t) = fig6();
        let d = modulation_components(&p, &t).unwrap();
        let ratio = d.component(-1) / d.component(2);
        assert_relative_eq!(ratio.re, t.g1 / t.g2, max_relative = 1e-12);
        assert!(ratio.im.abs() < 1e-12);
        assert_eq!(d.components.len(), 4);
        assert_eq!(d.big_omega, t.big_omega);
    }

    #[test]
    fn components_close_the_asymptotic_cavity_equation() {
        // Residual of the cavity equation along the asymptote is the dropped gamma_m p term.
        let (p, t) = fig6();
        let d = modulation_components(&p, &t).unwrap();
        let h = 1e-5;
        for k in 0..8 {
            let time = k as f64 * PI / 8.0;
            let m = asymptotic_first_moments(&p, &t, time).unwrap();
            let fwd = asymptotic_first_moments(&p, &t, time + h).unwrap();
            let bwd = asymptotic_first_moments(&p, &t, time - h).unwrap();
            let rhs = first_moment_rhs(&p, &d, time, &m);
            let da = (fwd.a - bwd.a) / (2.0 * h);
            assert!((da - rhs.a).norm() <= 1e-6 * p.kappa * m.a.norm());
        }
    }

    #[test]
    fn resonant_modulation_rejected() {
        let (p, mut t) = fig6();
        t.big_omega = 1.0;
        assert!(modulation_components(&p, &t).is_err());
        assert!(matches!(
            asymptotic_first_moments(&p, &t, 0.0),
            Err(SimError::SingularDenominator { .. })
        ));
    }

    #[test]
    fn degenerate_atomic_exponent_rejected() {
        // s7 = -(gamma_a + i Delta_c) coincides with s6 = -i Omega when gamma_a = 0, Delta_c = Omega.
        let (mut p, t) = fig6();
        p.gamma_a = 0.0;
        p.delta_c = t.big_omega;
        assert!(matches!(
            laplace_coefficients(&p, &t),
            Err(SimError::DegenerateExponents { i: 6, j: 7, .. })
        ));
    }
}
