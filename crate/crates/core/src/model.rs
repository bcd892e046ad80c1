//! Physical parameters, drive specification and state containers.
//!
//! All rates, detunings and frequencies are expressed in units of the
//! mechanical frequency; time is measured in units of its inverse. The
//! quadratures carry a `1/sqrt(2)` normalisation, so the vacuum variance
//! is `1/2` throughout.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2, Matrix6};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::numerics::eigen::eigenvalues_real;

/// Largest harmonic index accepted in a [`DriveSpec`] unless overridden.
pub const DEFAULT_MAX_HARMONIC: i32 = 8;

/// Vacuum variance of a single quadrature.
pub const VACUUM_VARIANCE: f64 = 0.5;

/// Physical parameters of the atom + cavity + mirror system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    #[serde(default = "one")]
    pub omega_m: f64,
    pub delta_a: f64,
    pub kappa: f64,
    pub gamma_m: f64,
    pub g: f64,
    #[serde(alias = "Delta_c")]
    pub delta_c: f64,
    pub gamma_a: f64,
    #[serde(alias = "G0")]
    pub g0_collective: f64,
    #[serde(default)]
    pub n_th: f64,
}

fn one() -> f64 {
    1.0
}

impl SystemParams {
    /// Parameter set of the modulated-drive entanglement study
    /// (`kappa = 2`, `g = 1e-5`, `G0 = 1`).
    pub fn entanglement_preset() -> Self {
        Self {
            omega_m: 1.0,
            delta_a: 1.0,
            kappa: 2.0,
            gamma_m: 1e-3,
            g: 1e-5,
            delta_c: -1.0,
            gamma_a: 0.1,
            g0_collective: 1.0,
            n_th: 0.0,
        }
    }

    /// Parameter set of the engineered-coupling study (`kappa = 10`, `g = 1e-3`).
    pub fn engineering_preset() -> Self {
        Self {
            omega_m: 1.0,
            delta_a: 1.0,
            kappa: 10.0,
            gamma_m: 1e-3,
            g: 1e-3,
            delta_c: -1.0,
            gamma_a: 1e-3,
            g0_collective: 1.0,
            n_th: 0.0,
        }
    }

    /// Parameter set of the unresolved-sideband squeezing study
    /// (`kappa = 10`, `G0 = 6`, `gamma_m = 1e-6`).
    pub fn squeezing_preset() -> Self {
        Self {
            omega_m: 1.0,
            delta_a: 1.0,
            kappa: 10.0,
            gamma_m: 1e-6,
            g: 5e-5,
            delta_c: -1.1,
            gamma_a: 1e-3,
            g0_collective: 6.0,
            n_th: 0.0,
        }
    }

    /// Returns the list of violated parameter invariants.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let fields = [
            ("omega_m", self.omega_m),
            ("delta_a", self.delta_a),
            ("kappa", self.kappa),
            ("gamma_m", self.gamma_m),
            ("g", self.g),
            ("delta_c", self.delta_c),
            ("gamma_a", self.gamma_a),
            ("g0_collective", self.g0_collective),
            ("n_th", self.n_th),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                out.push(format!("{name} must be finite"));
            }
        }
        if self.omega_m <= 0.0 {
            out.push("omega_m must be positive".into());
        }
        if self.kappa <= 0.0 {
            out.push("kappa must be positive".into());
        }
        if self.gamma_m <= 0.0 {
            out.push("gamma_m must be positive".into());
        }
        if self.gamma_a < 0.0 {
            out.push("gamma_a must be non-negative".into());
        }
        if self.n_th < 0.0 {
            out.push("n_th must be non-negative".into());
        }
        if self.g < 0.0 {
            out.push("g must be non-negative".into());
        }
        if self.g0_collective < 0.0 {
            out.push("g0_collective must be non-negative".into());
        }
        out
    }
}

/// Periodic drive `E(t) = sum_n E_n exp(-i n Omega t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "DriveSpecWire", from = "DriveSpecWire")]
pub struct DriveSpec {
    pub big_omega: f64,
    pub components: BTreeMap<i32, Complex64>,
}

impl DriveSpec {
    pub fn constant(e0: Complex64) -> Self {
        let mut components = BTreeMap::new();
        components.insert(0, e0);
        Self {
            big_omega: 0.0,
            components,
        }
    }

    pub fn new(big_omega: f64, components: impl IntoIterator<Item = (i32, Complex64)>) -> Self {
        Self {
            big_omega,
            components: components.into_iter().collect(),
        }
    }

    /// The modulated drive of the entanglement study: `E_0 = 15e4`, `E_{+-1} = 3e4`, `Omega = 2`.
    pub fn entanglement_preset() -> Self {
        Self::new(
            2.0,
            [
                (-1, Complex64::new(3e4, 0.0)),
                (0, Complex64::new(15e4, 0.0)),
                (1, Complex64::new(3e4, 0.0)),
            ],
        )
    }

    /// The modulated drive of the squeezing study: `E_0 = 12e4`, `E_{+-1} = 2e4`, `Omega = 2`.
    pub fn squeezing_preset() -> Self {
        Self::new(
            2.0,
            [
                (-1, Complex64::new(2e4, 0.0)),
                (0, Complex64::new(12e4, 0.0)),
                (1, Complex64::new(2e4, 0.0)),
            ],
        )
    }

    pub fn component(&self, n: i32) -> Complex64 {
        self.components.get(&n).copied().unwrap_or_default()
    }

    pub fn e0(&self) -> Complex64 {
        self.component(0)
    }

    pub fn is_modulated(&self) -> bool {
        self.big_omega != 0.0
    }

    /// True when the drive value does not depend on time.
    pub fn is_constant(&self) -> bool {
        !self.is_modulated()
            || self
                .components
                .iter()
                .all(|(&n, e)| n == 0 || e.norm() == 0.0)
    }

    /// Modulation period `2 pi / Omega`; `None` for a constant drive.
    pub fn period(&self) -> Option<f64> {
        self.is_modulated().then(|| 2.0 * PI / self.big_omega)
    }

    pub fn max_harmonic(&self) -> i32 {
        self.components.keys().map(|n| n.abs()).max().unwrap_or(0)
    }

    pub fn violations(&self, max_harmonic: i32) -> Vec<String> {
        let mut out = Vec::new();
        if !self.big_omega.is_finite() || self.big_omega < 0.0 {
            out.push("Omega must be finite and non-negative".into());
        }
        for (&n, e) in &self.components {
            if !(e.re.is_finite() && e.im.is_finite()) {
                out.push(format!("drive component E_{n} must be finite"));
            }
            if n.abs() > max_harmonic {
                out.push(format!(
                    "drive component E_{n} exceeds the harmonic bound {max_harmonic}"
                ));
            }
            if self.big_omega == 0.0 && n != 0 && e.norm() != 0.0 {
                out.push(format!(
                    "drive consistency: E_{n} is nonzero but Omega = 0 admits only E_0"
                ));
            }
        }
        out
    }

    /// Evaluates the drive amplitude at time `t`.
    pub fn value(&self, t: f64) -> Complex64 {
        if !self.is_modulated() {
            return self.e0();
        }
        self.components
            .iter()
            .map(|(&n, &e)| e * Complex64::from_polar(1.0, -(n as f64) * self.big_omega * t))
            .sum()
    }
}

/// Anything that supplies a complex drive amplitude `E(t)`.
pub trait Drive: Sync {
    fn value(&self, t: f64) -> Complex64;
}

impl Drive for DriveSpec {
    fn value(&self, t: f64) -> Complex64 {
        DriveSpec::value(self, t)
    }
}

/// JSON shape: `{"Omega": r, "components": [{"n": int, "re": r, "im": r}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriveSpecWire {
    #[serde(rename = "Omega")]
    pub omega: f64,
    pub components: Vec<DriveComponentWire>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriveComponentWire {
    pub n: i32,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl From<DriveSpec> for DriveSpecWire {
    fn from(d: DriveSpec) -> Self {
        // Descending n, matching the E_2, E_1, E_0, E_-1 listing order.
        let components = d
            .components
            .iter()
            .rev()
            .map(|(&n, e)| DriveComponentWire {
                n,
                re: e.re,
                im: e.im,
            })
            .collect();
        Self {
            omega: d.big_omega,
            components,
        }
    }
}

impl From<DriveSpecWire> for DriveSpec {
    fn from(w: DriveSpecWire) -> Self {
        let mut components = BTreeMap::new();
        for c in w.components {
            *components.entry(c.n).or_insert(Complex64::new(0.0, 0.0)) +=
                Complex64::new(c.re, c.im);
        }
        Self {
            big_omega: w.omega,
            components,
        }
    }
}

/// Outcome of [`validate_params`]; empty means the configuration is usable.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn contains(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.contains(needle))
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(SimError::InvalidConfig(self.violations))
        }
    }
}

pub fn validate_params(params: &SystemParams, drive: &DriveSpec) -> ValidationReport {
    let mut violations = params.violations();
    violations.extend(drive.violations(DEFAULT_MAX_HARMONIC));
    ValidationReport { violations }
}

pub fn drive_value(drive: &DriveSpec, t: f64) -> Complex64 {
    drive.value(t)
}

/// Classical mean values of the mirror, cavity and atomic modes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FirstMoments {
    pub q: f64,
    pub p: f64,
    pub a: Complex64,
    pub c: Complex64,
}

impl FirstMoments {
    pub const DIM: usize = 6;

    pub fn zero() -> Self {
        Self::default()
    }

    /// Packs into `[q, p, Re a, Im a, Re c, Im c]`.
    pub fn to_array(&self) -> [f64; 6] {
        [self.q, self.p, self.a.re, self.a.im, self.c.re, self.c.im]
    }

    pub fn from_slice(y: &[f64]) -> Self {
        Self {
            q: y[0],
            p: y[1],
            a: Complex64::new(y[2], y[3]),
            c: Complex64::new(y[4], y[5]),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Target effective coupling `G(t) = G1 + G2 exp(-i Omega t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineeredCoupling {
    #[serde(rename = "G1")]
    pub g1: f64,
    #[serde(rename = "G2")]
    pub g2: f64,
    #[serde(rename = "Omega")]
    pub big_omega: f64,
}

impl EngineeredCoupling {
    pub fn period(&self) -> f64 {
        2.0 * PI / self.big_omega
    }

    pub fn violations(&self, params: &SystemParams) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.g1 >= 0.0 && self.g2 >= 0.0) {
            out.push("G1 and G2 must be non-negative".into());
        }
        if !(self.big_omega > 0.0) {
            out.push("engineered coupling requires Omega > 0".into());
        }
        if (self.big_omega - params.omega_m).abs() < 1e-9 {
            out.push("engineered coupling requires Omega != omega_m".into());
        }
        if params.g <= 0.0 {
            out.push("engineered coupling requires g > 0".into());
        }
        out
    }

    /// Target coupling at time `t`.
    pub fn value(&self, t: f64) -> Complex64 {
        self.g1 + self.g2 * Complex64::from_polar(1.0, -self.big_omega * t)
    }
}

/// Output sampling times, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid(pub Vec<f64>);

impl TimeGrid {
    /// `points` equally spaced times on `[start, end]` (both included).
    pub fn linspace(start: f64, end: f64, points: usize) -> Self {
        match points {
            0 => Self(Vec::new()),
            1 => Self(vec![end]),
            _ => Self(
                (0..points)
                    .map(|i| start + (end - start) * i as f64 / (points - 1) as f64)
                    .collect(),
            ),
        }
    }

    /// Samples periods `[from, to]` of length `period` with `per_period`
    /// points per period, endpoints included.
    pub fn periods(period: f64, from: f64, to: f64, per_period: usize) -> Self {
        let points = ((to - from) * per_period as f64).round() as usize + 1;
        Self::linspace(from * period, to * period, points)
    }

    pub fn times(&self) -> &[f64] {
        &self.0
    }

    pub fn end(&self) -> Option<f64> {
        self.0.last().copied()
    }
}

/// 6x6 symmetrized covariance matrix over `(dq, dp, dX, dY, dx, dy)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceMatrix(pub Matrix6<f64>);

impl CovarianceMatrix {
    pub fn vacuum() -> Self {
        Self(Matrix6::identity() * VACUUM_VARIANCE)
    }

    /// Thermal mirror with occupation `n_th`, cavity and atoms in vacuum.
    pub fn thermal_initial(n_th: f64) -> Self {
        let mut v = Matrix6::identity() * VACUUM_VARIANCE;
        v[(0, 0)] = n_th + VACUUM_VARIANCE;
        v[(1, 1)] = n_th + VACUUM_VARIANCE;
        Self(v)
    }

    pub fn matrix(&self) -> &Matrix6<f64> {
        &self.0
    }

    pub fn symmetrized(mut self) -> Self {
        self.symmetrize();
        self
    }

    pub fn symmetrize(&mut self) {
        for k in 0..6 {
            for l in (k + 1)..6 {
                let m = 0.5 * (self.0[(k, l)] + self.0[(l, k)]);
                self.0[(k, l)] = m;
                self.0[(l, k)] = m;
            }
        }
    }

    pub fn asymmetry(&self) -> f64 {
        (self.0 - self.0.transpose()).abs().max()
    }

    /// Upper triangle in row-major order: `v11, v12, ..., v16, v22, ..., v66`.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(21);
        for k in 0..6 {
            for l in k..6 {
                out.push(self.0[(k, l)]);
            }
        }
        out
    }

    pub fn mechanical_block(&self) -> Matrix2<f64> {
        self.0.fixed_view::<2, 2>(0, 0).into_owned()
    }

    pub fn symplectic_eigenvalues(&self) -> Result<Vec<f64>> {
        symplectic_eigenvalues(&DMatrix::from_column_slice(6, 6, self.0.as_slice()))
    }

    pub fn min_symplectic_eigenvalue(&self) -> Result<f64> {
        Ok(self
            .symplectic_eigenvalues()?
            .into_iter()
            .fold(f64::INFINITY, f64::min))
    }
}

/// Symplectic eigenvalues of a covariance matrix ordered as the quadrature
/// pairs `(q_1, p_1, q_2, p_2, ...)`, ascending.
///
/// Computed from the spectrum of `J V`, whose eigenvalues are `+-i nu_k`.
pub fn symplectic_eigenvalues(v: &DMatrix<f64>) -> Result<Vec<f64>> {
    let dim = v.nrows();
    assert!(dim.is_multiple_of(2) && v.ncols() == dim);
    let jv = DMatrix::from_fn(dim, dim, |r, c| {
        if r % 2 == 0 {
            v[(r + 1, c)]
        } else {
            -v[(r - 1, c)]
        }
    });
    let eig = eigenvalues_real(&jv)?;
    let mut nus: Vec<f64> = eig.iter().map(|z| z.norm()).collect();
    nus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // Each symplectic eigenvalue appears twice (+i nu, -i nu).
    Ok(nus.chunks(2).map(|c| 0.5 * (c[0] + c[1])).collect())
}
