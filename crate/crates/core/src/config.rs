//! JSON experiment configuration and its resolution into a runnable setup.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::engineering::{
    asymptotic_first_moments, modulation_components, synthesis_initial_state,
};
use crate::error::{Result, SimError};
use crate::floquet::{floquet_recurse, FloquetOrders};
use crate::fluctuations::MomentSource;
use crate::model::{
    CovarianceMatrix, DriveSpec, EngineeredCoupling, FirstMoments, SystemParams, TimeGrid,
    DEFAULT_MAX_HARMONIC,
};
use crate::moments::{steady_state_at_detuning, steady_state_moments};
use crate::numerics::ode::StepperConfig;

/// Quantities a run can emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    FirstMoments,
    Coupling,
    Cm,
    #[serde(rename = "EN", alias = "en")]
    EntanglementNegativity,
    Variance,
    Neff,
    Squeezing,
    Wigner,
    Stability,
    Comparison,
}

impl OutputKind {
    pub fn needs_cm(self) -> bool {
        matches!(
            self,
            OutputKind::Cm
                | OutputKind::EntanglementNegativity
                | OutputKind::Variance
                | OutputKind::Neff
                | OutputKind::Squeezing
                | OutputKind::Wigner
        )
    }

    pub fn is_measure(self) -> bool {
        matches!(
            self,
            OutputKind::EntanglementNegativity
                | OutputKind::Variance
                | OutputKind::Neff
                | OutputKind::Squeezing
        )
    }
}

/// First-moment source feeding the drift matrix.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentSourceKind {
    /// Numerical integration of the mean-field equations.
    #[default]
    Integrated,
    /// Truncated Floquet series.
    Floquet,
    /// Closed-form exponential sums of an engineered coupling.
    Laplace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Zero,
    /// `q = p = c = 0`, `a = (G1 + G2) / (sqrt(2) g)` for an engineered coupling.
    Synthesis,
    /// Fixed point of the constant part of the drive.
    Stationary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsWire {
    #[serde(default)]
    pub q: f64,
    #[serde(default)]
    pub p: f64,
    #[serde(default)]
    pub re_a: f64,
    #[serde(default)]
    pub im_a: f64,
    #[serde(default)]
    pub re_c: f64,
    #[serde(default)]
    pub im_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitMoments {
    Named(InitKind),
    Explicit(MomentsWire),
}

impl Default for InitMoments {
    fn default() -> Self {
        InitMoments::Named(InitKind::Zero)
    }
}

/// Initial conditions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitSpec {
    pub moments: InitMoments,
    /// Initial mechanical occupation; defaults to the bath occupation `n_th`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_th: Option<f64>,
    /// Explicit initial covariance matrix: 21 upper-triangle entries, row-major.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cm: Option<Vec<f64>>,
}

/// Sampling window, in the unit of the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub from: f64,
    pub to: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl SweepAxis {
    pub fn values(&self) -> Vec<f64> {
        TimeGrid::linspace(self.min, self.max, self.points).0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WignerSpec {
    /// Sampling times, in the unit of the horizon.
    pub times: Vec<f64>,
    #[serde(default = "default_sigmas")]
    pub sigmas: f64,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_sigmas() -> f64 {
    crate::measures::DEFAULT_WIGNER_SIGMAS
}

fn default_points() -> usize {
    crate::measures::DEFAULT_WIGNER_POINTS
}

fn default_samples() -> usize {
    64
}

/// A named modification of the base configuration, run alongside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub label: String,
    /// Scalar overrides, keyed like sweep axes.
    #[serde(default)]
    pub set: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moment_source: Option<MomentSourceKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steady_state: Option<bool>,
    /// Keep only the `n = 0` drive component.
    #[serde(default)]
    pub constant_drive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub params: SystemParams,
    /// Effective cavity detuning `delta_a - g q` imposed at the working
    /// point; the bare `delta_a` is back-computed.
    #[serde(default, alias = "Delta_a", skip_serializing_if = "Option::is_none")]
    pub effective_detuning: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive: Option<DriveSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engineered: Option<EngineeredCoupling>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon_periods: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<Window>,
    #[serde(default = "default_samples")]
    pub samples_per_period: usize,
    #[serde(default)]
    pub outputs: Vec<OutputKind>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepAxis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub numerics: Option<StepperConfig>,
    #[serde(default)]
    pub floquet: FloquetOrders,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default)]
    pub moment_source: MomentSourceKind,
    /// Stationary analysis (fixed point plus algebraic covariance matrix)
    /// instead of time integration.
    #[serde(default)]
    pub steady_state: bool,
    #[serde(default = "default_samples")]
    pub stability_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wigner: Option<WignerSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<Variant>,
}

/// Scalar names accepted by sweeps and variant overrides.
pub const SCALAR_NAMES: &[&str] = &[
    "omega_m",
    "delta_a",
    "kappa",
    "gamma_m",
    "g",
    "delta_c",
    "Delta_c",
    "gamma_a",
    "g0_collective",
    "G0",
    "n_th",
    "E",
    "E0",
    "E1",
    "Omega",
    "G1",
    "G2",
    "Delta_a",
    "effective_detuning",
];

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| SimError::InvalidConfig(vec![format!("config: {e}")]))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Modulation period of the drive or engineered coupling, if any.
    pub fn period(&self) -> Option<f64> {
        let omega = match (&self.drive, &self.engineered) {
            (Some(d), None) => d.big_omega,
            (None, Some(e)) => e.big_omega,
            _ => return None,
        };
        (omega > 0.0).then(|| 2.0 * PI / omega)
    }

    /// Length of one horizon unit: the period, or the absolute time unit.
    pub fn time_unit(&self) -> f64 {
        if self.horizon_periods.is_some() {
            self.period().unwrap_or(f64::NAN)
        } else {
            1.0
        }
    }

    pub fn horizon(&self) -> Option<f64> {
        match (self.horizon_periods, self.horizon_time) {
            (Some(n), None) => Some(n * self.time_unit()),
            (None, Some(t)) => Some(t),
            _ => None,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = self.params.violations();
        match (&self.drive, &self.engineered) {
            (Some(d), None) => out.extend(d.violations(DEFAULT_MAX_HARMONIC)),
            (None, Some(e)) => out.extend(e.violations(&self.params)),
            (Some(_), Some(_)) => out.push("drive and engineered are mutually exclusive".into()),
            (None, None) => out.push("one of drive or engineered is required".into()),
        }
        if self.horizon_periods.is_some() && self.horizon_time.is_some() {
            out.push("horizon_periods and horizon_time are mutually exclusive".into());
        }
        if self.horizon_periods.is_some() && self.period().is_none() {
            out.push("horizon_periods requires Omega > 0".into());
        }
        if let Some(h) = self.horizon() {
            if !(h > 0.0) {
                out.push("horizon must be positive".into());
            }
        } else if !self.steady_state && self.sweep.is_empty() && !self.outputs.is_empty() {
            out.push("a horizon is required unless steady_state is set".into());
        }
        if let Some(w) = self.window {
            if !(w.from >= 0.0 && w.from <= w.to) {
                out.push("window must satisfy 0 <= from <= to".into());
            }
            if let Some(h) = self.horizon() {
                if w.to * self.time_unit() > h * (1.0 + 1e-12) {
                    out.push("window must end within the horizon".into());
                }
            }
        }
        if self.samples_per_period == 0 || self.stability_samples == 0 {
            out.push("sample counts must be positive".into());
        }
        if self.sweep.len() > 2 {
            out.push("at most two sweep axes".into());
        }
        for axis in &self.sweep {
            if !SCALAR_NAMES.contains(&axis.name.as_str()) {
                out.push(format!("sweep axis {} is not a scalar field", axis.name));
            }
            if axis.points == 0 {
                out.push(format!("sweep axis {} needs points > 0", axis.name));
            }
        }
        for v in &self.variants {
            for name in v.set.keys() {
                if !SCALAR_NAMES.contains(&name.as_str()) {
                    out.push(format!(
                        "variant {}: {} is not a scalar field",
                        v.label, name
                    ));
                }
            }
        }
        if let Some(n) = &self.numerics {
            out.extend(n.violations());
        }
        if self.steady_state {
            if self.drive.as_ref().is_some_and(|d| !d.is_constant()) {
                out.push("steady_state requires an unmodulated drive".into());
            }
            if self.engineered.is_some_and(|e| e.g2 != 0.0) {
                out.push("steady_state requires G2 = 0".into());
            }
        }
        if self.effective_detuning.is_some()
            && self.drive.as_ref().is_some_and(|d| !d.is_constant())
        {
            out.push(
                "effective detuning requires an unmodulated drive or an engineered coupling".into(),
            );
        }
        if self.moment_source == MomentSourceKind::Laplace && self.engineered.is_none() {
            out.push("laplace moment source requires an engineered coupling".into());
        }
        if let Some(cm) = &self.init.cm {
            if cm.len() != 21 {
                out.push("init.cm needs 21 upper-triangle entries".into());
            }
        }
        if let InitMoments::Named(InitKind::Synthesis) = self.init.moments {
            if self.engineered.is_none() {
                out.push("synthesis init requires an engineered coupling".into());
            }
        }
        if let Some(w) = &self.wigner {
            if w.points < 2 || !(w.sigmas > 0.0) {
                out.push("wigner grid needs points >= 2 and sigmas > 0".into());
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(SimError::InvalidConfig(v))
        }
    }

    /// Copy with one scalar field replaced.
    pub fn with_scalar(&self, name: &str, value: f64) -> Result<Self> {
        let mut c = self.clone();
        let p = &mut c.params;
        let missing = || {
            SimError::InvalidConfig(vec![format!(
                "{name} needs a matching drive or engineered block"
            )])
        };
        match name {
            "omega_m" => p.omega_m = value,
            "delta_a" => p.delta_a = value,
            "kappa" => p.kappa = value,
            "gamma_m" => p.gamma_m = value,
            "g" => p.g = value,
            "delta_c" | "Delta_c" => p.delta_c = value,
            "gamma_a" => p.gamma_a = value,
            "g0_collective" | "G0" => p.g0_collective = value,
            "n_th" => p.n_th = value,
            "Delta_a" | "effective_detuning" => c.effective_detuning = Some(value),
            "E" | "E0" => {
                let d = c.drive.as_mut().ok_or_else(missing)?;
                d.components.insert(0, Complex64::new(value, 0.0));
            }
            "E1" => {
                let d = c.drive.as_mut().ok_or_else(missing)?;
                d.components.insert(1, Complex64::new(value, 0.0));
                d.components.insert(-1, Complex64::new(value, 0.0));
            }
            "Omega" => match (&mut c.drive, &mut c.engineered) {
                (Some(d), _) => d.big_omega = value,
                (None, Some(e)) => e.big_omega = value,
                _ => return Err(missing()),
            },
            "G1" => c.engineered.as_mut().ok_or_else(missing)?.g1 = value,
            "G2" => c.engineered.as_mut().ok_or_else(missing)?.g2 = value,
            other => {
                return Err(SimError::InvalidConfig(vec![format!(
                    "unknown scalar {other}"
                )]))
            }
        }
        Ok(c)
    }

    /// The configuration of a variant: overrides applied, variants dropped.
    pub fn variant(&self, v: &Variant) -> Result<Self> {
        let mut c = self.clone();
        c.variants.clear();
        if v.constant_drive {
            if let Some(d) = c.drive.as_mut() {
                d.components.retain(|&n, _| n == 0);
            }
        }
        for (name, value) in &v.set {
            c = c.with_scalar(name, *value)?;
        }
        if let Some(m) = v.moment_source {
            c.moment_source = m;
        }
        if let Some(s) = v.steady_state {
            c.steady_state = s;
        }
        Ok(c)
    }

    /// Configuration with an arbitrary set of overrides, used by sweeps.
    pub fn with_scalars(&self, values: &[(&str, f64)]) -> Result<Self> {
        values
            .iter()
            .try_fold(self.clone(), |c, (n, v)| c.with_scalar(n, *v))
    }

    pub fn resolve(&self) -> Result<Experiment> {
        self.validate()?;
        let period = self.period();
        let unit = self.time_unit();
        let mut params = self.params;

        let mut stationary = None;
        if let Some(e) = &self.engineered {
            if let Some(det) = self.effective_detuning {
                let q_static = (e.g1 * e.g1 + e.g2 * e.g2) / (2.0 * params.g * params.omega_m);
                params.delta_a = det + params.g * q_static;
            }
            if e.g2 == 0.0 {
                stationary = Some(asymptotic_first_moments(&params, e, 0.0)?);
            }
        } else if let Some(d) = &self.drive {
            if d.is_constant() {
                if let Some(det) = self.effective_detuning {
                    let (resolved, state) = steady_state_at_detuning(&params, det, d.e0())?;
                    params = resolved;
                    stationary = Some(state);
                }
            }
        }

        let drive = match (&self.drive, &self.engineered) {
            (Some(d), _) => d.clone(),
            (None, Some(e)) => modulation_components(&params, e)?,
            (None, None) => unreachable!("validated"),
        };
        if stationary.is_none()
            && (self.steady_state || self.init.moments == InitMoments::Named(InitKind::Stationary))
        {
            stationary = Some(steady_state_moments(&params, drive.e0())?);
        }

        let init_moments = match self.init.moments {
            InitMoments::Named(InitKind::Zero) => FirstMoments::zero(),
            InitMoments::Named(InitKind::Synthesis) => {
                synthesis_initial_state(&params, self.engineered.as_ref().expect("validated"))
            }
            InitMoments::Named(InitKind::Stationary) => stationary.expect("computed above"),
            InitMoments::Explicit(w) => FirstMoments {
                q: w.q,
                p: w.p,
                a: Complex64::new(w.re_a, w.im_a),
                c: Complex64::new(w.re_c, w.im_c),
            },
        };

        let v0 = match &self.init.cm {
            Some(upper) => {
                let mut m = nalgebra::Matrix6::zeros();
                let mut k = 0;
                for i in 0..6 {
                    for j in i..6 {
                        m[(i, j)] = upper[k];
                        m[(j, i)] = upper[k];
                        k += 1;
                    }
                }
                CovarianceMatrix(m)
            }
            None => CovarianceMatrix::thermal_initial(self.init.n_th.unwrap_or(params.n_th)),
        };

        let source = if self.steady_state {
            MomentSource::Static(stationary.expect("computed above"))
        } else {
            match self.moment_source {
                MomentSourceKind::Integrated => MomentSource::Integrated {
                    drive: drive.clone(),
                    init: init_moments,
                },
                MomentSourceKind::Floquet => MomentSource::Floquet(floquet_recurse(
                    &params,
                    &drive,
                    self.floquet.j_max,
                    self.floquet.n_max,
                )?),
                MomentSourceKind::Laplace => MomentSource::Engineered {
                    target: self.engineered.expect("validated"),
                },
            }
        };

        let horizon = self.horizon();
        let grid = match horizon {
            Some(h) => {
                let (from, to) = self.window.map_or((0.0, h / unit), |w| (w.from, w.to));
                // Unmodulated runs sample against the mechanical period.
                let sample_period = period.unwrap_or(2.0 * PI / params.omega_m);
                let per_unit = self.samples_per_period as f64 * unit / sample_period;
                let points = ((to - from) * per_unit).round() as usize + 1;
                TimeGrid::linspace(from * unit, to * unit, points)
            }
            None => TimeGrid(Vec::new()),
        };

        let wigner_times = self
            .wigner
            .as_ref()
            .map(|w| w.times.iter().map(|t| t * unit).collect())
            .unwrap_or_default();

        Ok(Experiment {
            params,
            drive,
            engineered: self.engineered,
            period,
            horizon,
            grid,
            wigner_times,
            source,
            init_moments,
            stationary,
            v0,
            stepper: self
                .numerics
                .unwrap_or_else(|| StepperConfig::for_period(period)),
            floquet: self.floquet,
            steady_state: self.steady_state,
            stability_samples: self.stability_samples,
        })
    }
}

/// A configuration resolved into concrete inputs.
#[derive(Debug, Clone)]
pub struct Experiment {
    /// Parameters with any effective-detuning constraint applied.
    pub params: SystemParams,
    /// Drive actually applied (synthesised for engineered couplings).
    pub drive: DriveSpec,
    pub engineered: Option<EngineeredCoupling>,
    pub period: Option<f64>,
    /// Absolute end time.
    pub horizon: Option<f64>,
    /// Absolute sampling times.
    pub grid: TimeGrid,
    pub wigner_times: Vec<f64>,
    pub source: MomentSource,
    pub init_moments: FirstMoments,
    /// Fixed point of a constant drive, when one was computed.
    pub stationary: Option<FirstMoments>,
    pub v0: CovarianceMatrix,
    pub stepper: StepperConfig,
    pub floquet: FloquetOrders,
    pub steady_state: bool,
    pub stability_samples: usize,
}
