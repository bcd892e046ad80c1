//! Perturbative periodic solution of the mean-field equations.
//!
//! The asymptotic mean values are expanded as
//! `<O(t)> = sum_j sum_n O[n, j] exp(+i n Omega t) g^j`
//! while the drive is `E(t) = sum_n E_n exp(-i n Omega t)`, so the zeroth
//! order cavity coefficient at harmonic `n` is seeded by `E_{-n}`. Higher
//! orders follow from convolutions of lower layers.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::model::{DriveSpec, FirstMoments, SystemParams};

const I: Complex64 = Complex64::new(0.0, 1.0);
const SINGULAR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    Q,
    P,
    A,
    C,
}

/// Truncation orders of the double series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FloquetOrders {
    pub j_max: usize,
    pub n_max: usize,
}

impl Default for FloquetOrders {
    fn default() -> Self {
        Self { j_max: 6, n_max: 5 }
    }
}

/// Coefficient table `O[n, j]` for `|n| <= n_max`, `0 <= j <= j_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct FloquetSolution {
    pub j_max: usize,
    pub n_max: usize,
    pub big_omega: f64,
    // Layout: [j][n + n_max].
    q: Vec<Vec<Complex64>>,
    p: Vec<Vec<Complex64>>,
    a: Vec<Vec<Complex64>>,
    c: Vec<Vec<Complex64>>,
}

impl FloquetSolution {
    fn empty(j_max: usize, n_max: usize, big_omega: f64) -> Self {
        let layer = || vec![vec![Complex64::new(0.0, 0.0); 2 * n_max + 1]; j_max + 1];
        Self {
            j_max,
            n_max,
            big_omega,
            q: layer(),
            p: layer(),
            a: layer(),
            c: layer(),
        }
    }

    fn table(&self, obs: Observable) -> &Vec<Vec<Complex64>> {
        match obs {
            Observable::Q => &self.q,
            Observable::P => &self.p,
            Observable::A => &self.a,
            Observable::C => &self.c,
        }
    }

    fn table_mut(&mut self, obs: Observable) -> &mut Vec<Vec<Complex64>> {
        match obs {
            Observable::Q => &mut self.q,
            Observable::P => &mut self.p,
            Observable::A => &mut self.a,
            Observable::C => &mut self.c,
        }
    }

    fn index(&self, n: i64) -> Option<usize> {
        (n.unsigned_abs() as usize <= self.n_max).then(|| (n + self.n_max as i64) as usize)
    }

    /// `O[n, j]`; zero outside the truncation window.
    pub fn coefficient(&self, obs: Observable, n: i64, j: usize) -> Complex64 {
        match self.index(n) {
            Some(k) if j <= self.j_max => self.table(obs)[j][k],
            _ => Complex64::new(0.0, 0.0),
        }
    }

    /// Overwrites one coefficient (mainly for building test fixtures).
    pub fn set_coefficient(&mut self, obs: Observable, n: i64, j: usize, value: Complex64) {
        let k = self.index(n).expect("harmonic outside truncation window");
        self.table_mut(obs)[j][k] = value;
    }

    /// Zero table with the given orders.
    pub fn zeros(j_max: usize, n_max: usize, big_omega: f64) -> Self {
        Self::empty(j_max, n_max, big_omega)
    }

    /// Sums the truncated series at time `t` for coupling `g`.
    pub fn evaluate(&self, g: f64, t: f64) -> FirstMoments {
        let phases: Vec<Complex64> = (-(self.n_max as i64)..=self.n_max as i64)
            .map(|n| Complex64::from_polar(1.0, n as f64 * self.big_omega * t))
            .collect();
        let sum = |table: &Vec<Vec<Complex64>>| -> Complex64 {
            let mut total = Complex64::new(0.0, 0.0);
            let mut gj = 1.0;
            for layer in table {
                let s: Complex64 = layer.iter().zip(&phases).map(|(o, e)| o * e).sum();
                total += s * gj;
                gj *= g;
            }
            total
        };
        FirstMoments {
            q: sum(&self.q).re,
            p: sum(&self.p).re,
            a: sum(&self.a),
            c: sum(&self.c),
        }
    }
}

fn cavity_atom_denominator(params: &SystemParams, n_omega: f64) -> Complex64 {
    (params.kappa + I * (params.delta_a + n_omega))
        * (params.gamma_a + I * (params.delta_c + n_omega))
        + params.g0_collective.powi(2)
}

fn check(den: Complex64, context: impl FnOnce() -> String) -> Result<Complex64> {
    if den.norm() < SINGULAR {
        return Err(SimError::SingularDenominator {
            context: context(),
            modulus: den.norm(),
        });
    }
    Ok(den)
}

fn require_modulation(drive: &DriveSpec) -> Result<()> {
    if !(drive.big_omega > 0.0) {
        return Err(SimError::InvalidConfig(vec![
            "the Floquet series requires Omega > 0".into(),
        ]));
    }
    Ok(())
}

fn fill_zero_order(
    params: &SystemParams,
    drive: &DriveSpec,
    sol: &mut FloquetSolution,
) -> Result<()> {
    let n_max = sol.n_max as i64;
    for n in -n_max..=n_max {
        let n_omega = n as f64 * drive.big_omega;
        let den = check(cavity_atom_denominator(params, n_omega), || {
            format!("zero-order cavity/atom response at n = {n}")
        })?;
        let e = drive.component(-n as i32);
        let k = (n + n_max) as usize;
        sol.a[0][k] = (I * (n_omega + params.delta_c) + params.gamma_a) * e / den;
        sol.c[0][k] = params.g0_collective * e / (I * den);
    }
    Ok(())
}

/// Zeroth-order layer (`j = 0`) of the series.
pub fn floquet_zero_order(
    params: &SystemParams,
    drive: &DriveSpec,
    n_max: usize,
) -> Result<FloquetSolution> {
    require_modulation(drive)?;
    let mut sol = FloquetSolution::empty(0, n_max, drive.big_omega);
    fill_zero_order(params, drive, &mut sol)?;
    Ok(sol)
}

/// Full coefficient table up to order `j_max` and harmonic bound `n_max`.
pub fn floquet_recurse(
    params: &SystemParams,
    drive: &DriveSpec,
    j_max: usize,
    n_max: usize,
) -> Result<FloquetSolution> {
    require_modulation(drive)?;
    if n_max < 1 {
        return Err(SimError::InvalidConfig(vec![
            "n_max must be at least 1".into()
        ]));
    }
    let omega = drive.big_omega;
    let wm = params.omega_m;
    let mut sol = FloquetSolution::empty(j_max, n_max, omega);
    fill_zero_order(params, drive, &mut sol)?;
    let nm = n_max as i64;
    let idx = |n: i64| -> Option<usize> { (n.abs() <= nm).then(|| (n + nm) as usize) };

    for j in 1..=j_max {
        // Mechanics first: layer j of q depends on cavity layers < j.
        for n in -nm..=nm {
            let n_omega = n as f64 * omega;
            let mut conv = Complex64::new(0.0, 0.0);
            for k in 0..j {
                let l = j - k - 1;
                for m in -nm..=nm {
                    if let (Some(im), Some(inm)) = (idx(m), idx(n + m)) {
                        conv += sol.a[k][im].conj() * sol.a[l][inm];
                    }
                }
            }
            let den = check(
                Complex64::new(wm * wm - n_omega * n_omega, params.gamma_m * n_omega),
                || format!("mechanical response at n = {n} (n Omega close to omega_m)"),
            )?;
            let kq = (n + nm) as usize;
            sol.q[j][kq] = wm * conv / den;
            sol.p[j][kq] = I * n_omega / wm * sol.q[j][kq];
        }
        for n in -nm..=nm {
            let n_omega = n as f64 * omega;
            let mut conv = Complex64::new(0.0, 0.0);
            for k in 0..j {
                let l = j - k - 1;
                for m in -nm..=nm {
                    if let (Some(im), Some(inm)) = (idx(m), idx(n - m)) {
                        conv += sol.a[k][im] * sol.q[l][inm];
                    }
                }
            }
            let den = check(cavity_atom_denominator(params, n_omega), || {
                format!("cavity/atom response at n = {n}, order {j}")
            })?;
            let ka = (n + nm) as usize;
            sol.a[j][ka] = I * (params.gamma_a + I * (params.delta_c + n_omega)) * conv / den;
            sol.c[j][ka] = params.g0_collective * conv / den;
        }
    }
    Ok(sol)
}

pub fn evaluate_floquet(sol: &FloquetSolution, g: f64, t: f64) -> FirstMoments {
    sol.evaluate(g, t)
}
