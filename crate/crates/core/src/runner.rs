//! Experiment orchestration: single runs with their variants, Floquet/ODE
//! comparisons and parameter sweeps, plus file emission.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Experiment, ExperimentConfig, OutputKind};
use crate::error::{Result, SimError};
use crate::floquet::floquet_recurse;
use crate::fluctuations::{
    build_diffusion, integrate_lyapunov, stability_of, steady_state_lyapunov, CmSample,
    DriftMatrix, MomentSource, StabilityReport,
};
use crate::measures::{
    atom_mirror_negativity, ellipse, mean_phonon_number, squeezing_parameter, wigner_grid, Ellipse,
    WignerGrid,
};
use crate::model::{CovarianceMatrix, DriveSpec, DriveSpecWire, SystemParams, TimeGrid};
use crate::moments::{effective_coupling, integrate_first_moments, TrajectorySample};
use crate::output::{
    cm_table, first_moments_table, wigner_table, CsvTable, COUPLING_HEADER, MEASURES_HEADER,
};

/// One row of the measures table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasureRow {
    pub t: f64,
    #[serde(rename = "EN")]
    pub en: f64,
    pub v11: f64,
    pub v22: f64,
    pub neff: f64,
    pub r_db: f64,
}

impl MeasureRow {
    pub fn from_cm(t: f64, cm: &CovarianceMatrix) -> Result<Self> {
        Ok(Self {
            t,
            en: atom_mirror_negativity(cm)?,
            v11: cm.0[(0, 0)],
            v22: cm.0[(1, 1)],
            neff: mean_phonon_number(cm),
            r_db: squeezing_parameter(&cm.mechanical_block())?.r_db,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WignerSnapshot {
    pub t: f64,
    pub grid: WignerGrid,
    pub ellipse: Ellipse,
}

/// Maximum relative deviation between the Floquet series and the integrated
/// mean values over the final two periods, per observable
/// (`max |series - ode| / max |ode|`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub from: f64,
    pub to: f64,
    pub q: f64,
    pub p: f64,
    pub a: f64,
    pub c: f64,
}

/// Stability summary together with the per-sample spectral abscissa.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityTrace {
    pub report: StabilityReport,
    pub samples: Vec<(f64, f64)>,
}

/// In-memory results of one run.
#[derive(Debug, Clone, Default)]
pub struct RunData {
    pub moments: Vec<TrajectorySample>,
    pub cm: Vec<CmSample>,
    pub measures: Vec<MeasureRow>,
    pub stability: Option<StabilityTrace>,
    pub wigner: Vec<WignerSnapshot>,
    pub comparison: Option<ComparisonReport>,
}

fn merged_times(grid: &[f64], extra: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = grid.iter().chain(extra).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    all
}

fn contains(sorted: &[f64], t: f64) -> bool {
    sorted.binary_search_by(|x| x.total_cmp(&t)).is_ok()
}

/// Spectral abscissa sampled over the last period (or last mechanical
/// period for a constant drive) before the horizon.
pub fn stability_trace(exp: &Experiment) -> Result<StabilityTrace> {
    let n = exp.stability_samples.max(1);
    let (times, moments) = match (&exp.source, exp.horizon) {
        (MomentSource::Static(m), _) => (vec![f64::INFINITY], vec![*m]),
        (_, Some(h)) => {
            let span = exp.period.unwrap_or(2.0 * PI / exp.params.omega_m);
            let start = (h - span).max(0.0);
            let times: Vec<f64> = (0..n).map(|k| start + span * k as f64 / n as f64).collect();
            match exp.source.moments_at(&exp.params, &times, &exp.stepper) {
                Ok(m) => (times, m),
                Err(SimError::Diverged { t, .. }) => {
                    return Ok(StabilityTrace {
                        report: StabilityReport {
                            stable: false,
                            margin: f64::INFINITY,
                            samples: 0,
                        },
                        samples: vec![(t, f64::INFINITY)],
                    })
                }
                Err(e) => return Err(e),
            }
        }
        (_, None) => {
            return Err(SimError::InvalidConfig(vec![
                "stability of a time-dependent run needs a horizon".into(),
            ]))
        }
    };
    let report = stability_of(&exp.params, &moments)?;
    let samples = times
        .iter()
        .zip(&moments)
        .map(|(&t, m)| {
            Ok((
                t,
                DriftMatrix::from_moments(&exp.params, m).spectral_abscissa()?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StabilityTrace { report, samples })
}

/// Runs both first-moment sources and compares them over the last two periods.
pub fn compare_sources(cfg: &ExperimentConfig) -> Result<ComparisonReport> {
    let exp = cfg.resolve()?;
    compare_resolved(cfg, &exp)
}

fn compare_resolved(cfg: &ExperimentConfig, exp: &Experiment) -> Result<ComparisonReport> {
    let (Some(tau), Some(h)) = (exp.period, exp.horizon) else {
        return Err(SimError::InvalidConfig(vec![
            "comparison needs Omega > 0 and a horizon".into(),
        ]));
    };
    let from = (h - 2.0 * tau).max(0.0);
    let grid = TimeGrid::linspace(from, h, 2 * cfg.samples_per_period + 1);
    let ode = integrate_first_moments(
        &exp.params,
        &exp.drive,
        &exp.init_moments,
        &grid,
        &exp.stepper,
    )?;
    let series = floquet_recurse(
        &exp.params,
        &exp.drive,
        exp.floquet.j_max,
        exp.floquet.n_max,
    )?;
    let mut diff = [0.0f64; 4];
    let mut scale = [0.0f64; 4];
    for s in &ode {
        let f = series.evaluate(exp.params.g, s.t);
        let pairs = [
            (f.q - s.state.q).abs(),
            (f.p - s.state.p).abs(),
            (f.a - s.state.a).norm(),
            (f.c - s.state.c).norm(),
        ];
        let mags = [
            s.state.q.abs(),
            s.state.p.abs(),
            s.state.a.norm(),
            s.state.c.norm(),
        ];
        for k in 0..4 {
            diff[k] = diff[k].max(pairs[k]);
            scale[k] = scale[k].max(mags[k]);
        }
    }
    let rel = |k: usize| {
        if scale[k] > 0.0 {
            diff[k] / scale[k]
        } else {
            diff[k]
        }
    };
    Ok(ComparisonReport {
        from,
        to: h,
        q: rel(0),
        p: rel(1),
        a: rel(2),
        c: rel(3),
    })
}

/// Executes one configuration (variants and sweeps are ignored) in memory.
pub fn simulate(cfg: &ExperimentConfig) -> Result<RunData> {
    let exp = cfg.resolve()?;
    let outputs: BTreeSet<OutputKind> = cfg.outputs.iter().copied().collect();
    let needs_cm = outputs.iter().any(|o| o.needs_cm());
    let wants_measures = outputs.iter().any(|o| o.is_measure());
    let wants_wigner = outputs.contains(&OutputKind::Wigner);
    let mut data = RunData::default();

    if exp.steady_state {
        let m = exp.stationary.expect("stationary point resolved");
        let stab = stability_trace(&exp)?;
        if needs_cm {
            if !stab.report.stable {
                return Err(SimError::NotStable {
                    max_re: stab.report.margin,
                });
            }
            let a = DriftMatrix::from_moments(&exp.params, &m);
            let cm = steady_state_lyapunov(&a, &build_diffusion(&exp.params))?;
            data.cm.push(CmSample {
                t: f64::INFINITY,
                moments: m,
                cm,
            });
            if wants_wigner {
                for &t in &exp.wigner_times {
                    data.wigner.push(snapshot(cfg, t, &cm)?);
                }
            }
        }
        data.moments.push(TrajectorySample {
            t: f64::INFINITY,
            state: m,
        });
        if outputs.contains(&OutputKind::Stability) {
            data.stability = Some(stab);
        }
    } else {
        let grid = exp.grid.times();
        if needs_cm {
            let extra: &[f64] = if wants_wigner { &exp.wigner_times } else { &[] };
            let times = merged_times(grid, extra);
            let samples = integrate_lyapunov(
                &exp.params,
                &exp.source,
                &exp.v0,
                &TimeGrid(times),
                &exp.stepper,
            )?;
            for s in samples {
                if wants_wigner && contains(extra, s.t) {
                    data.wigner.push(snapshot(cfg, s.t, &s.cm)?);
                }
                if contains(grid, s.t) {
                    data.moments.push(TrajectorySample {
                        t: s.t,
                        state: s.moments,
                    });
                    data.cm.push(s);
                }
            }
        } else if outputs.contains(&OutputKind::FirstMoments)
            || outputs.contains(&OutputKind::Coupling)
        {
            let moments = exp.source.moments_at(&exp.params, grid, &exp.stepper)?;
            data.moments = grid
                .iter()
                .zip(moments)
                .map(|(&t, state)| TrajectorySample { t, state })
                .collect();
        }
        if outputs.contains(&OutputKind::Stability) {
            data.stability = Some(stability_trace(&exp)?);
        }
        if outputs.contains(&OutputKind::Comparison) {
            data.comparison = Some(compare_resolved(cfg, &exp)?);
        }
    }
    if wants_measures {
        data.measures = data
            .cm
            .iter()
            .map(|s| MeasureRow::from_cm(s.t, &s.cm))
            .collect::<Result<_>>()?;
    }
    Ok(data)
}

fn snapshot(cfg: &ExperimentConfig, t: f64, cm: &CovarianceMatrix) -> Result<WignerSnapshot> {
    let spec = cfg
        .wigner
        .as_ref()
        .expect("wigner times come from the wigner block");
    let block = cm.mechanical_block();
    Ok(WignerSnapshot {
        t,
        grid: wigner_grid(&block, spec.sigmas, spec.points)?,
        ellipse: ellipse(&block)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Stable,
    Unstable,
    Failed,
}

impl CellStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CellStatus::Stable => "stable",
            CellStatus::Unstable => "unstable",
            CellStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub coords: Vec<f64>,
    pub status: CellStatus,
    /// Stationary value, or the maximum over the final period.
    pub en: Option<f64>,
    pub margin: Option<f64>,
    pub min_symplectic: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axes: Vec<String>,
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn count(&self, status: CellStatus) -> usize {
        self.cells.iter().filter(|c| c.status == status).count()
    }

    pub fn table(&self) -> CsvTable {
        let mut header = self.axes.join(",");
        header.push_str(",status,EN");
        let mut t = CsvTable::new(&header);
        for c in &self.cells {
            let en = c.en.map(crate::output::format_number).unwrap_or_default();
            t.mixed_row(&c.coords, &[c.status.as_str(), &en]);
        }
        t
    }
}

fn failed(coords: Vec<f64>, e: SimError) -> SweepCell {
    SweepCell {
        coords,
        status: CellStatus::Failed,
        en: None,
        margin: None,
        min_symplectic: None,
        error: Some(e.to_string()),
    }
}

fn unstable(coords: Vec<f64>, margin: f64) -> SweepCell {
    SweepCell {
        coords,
        status: CellStatus::Unstable,
        en: None,
        margin: Some(margin),
        min_symplectic: None,
        error: None,
    }
}

/// Evaluates a single sweep cell; failures are reported in the cell.
pub fn evaluate_cell(cfg: &ExperimentConfig, coords: Vec<f64>) -> SweepCell {
    let exp = match cfg.resolve() {
        Ok(e) => e,
        Err(e) => return failed(coords, e),
    };
    let stab = match stability_trace(&exp) {
        Ok(s) => s,
        Err(e) => return failed(coords, e),
    };
    if !stab.report.stable {
        return unstable(coords, stab.report.margin);
    }
    let result: Result<(f64, f64)> = (|| {
        if exp.steady_state {
            let m = exp.stationary.expect("stationary point resolved");
            let a = DriftMatrix::from_moments(&exp.params, &m);
            let cm = steady_state_lyapunov(&a, &build_diffusion(&exp.params))?;
            Ok((
                atom_mirror_negativity(&cm)?,
                cm.min_symplectic_eigenvalue()?,
            ))
        } else {
            let h = exp.horizon.expect("validated horizon");
            let span = exp.period.unwrap_or(2.0 * PI / exp.params.omega_m);
            let grid = TimeGrid::linspace((h - span).max(0.0), h, cfg.samples_per_period + 1);
            let samples =
                integrate_lyapunov(&exp.params, &exp.source, &exp.v0, &grid, &exp.stepper)?;
            let mut en = 0.0f64;
            let mut nu = f64::INFINITY;
            for s in &samples {
                en = en.max(atom_mirror_negativity(&s.cm)?);
                nu = nu.min(s.cm.min_symplectic_eigenvalue()?);
            }
            Ok((en, nu))
        }
    })();
    match result {
        Ok((en, nu)) => SweepCell {
            coords,
            status: CellStatus::Stable,
            en: Some(en),
            margin: Some(stab.report.margin),
            min_symplectic: Some(nu),
            error: None,
        },
        Err(SimError::Diverged { .. }) | Err(SimError::NotStable { .. }) => {
            unstable(coords, stab.report.margin)
        }
        Err(e) => failed(coords, e),
    }
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| SimError::InvalidConfig(vec![format!("worker pool: {e}")]))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Evaluates every cell of the configured 1-D or 2-D sweep, first axis outermost.
pub fn run_sweep(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<SweepResult> {
    let mut base = cfg.clone();
    base.sweep.clear();
    base.variants.clear();
    base.validate()?;
    if cfg.sweep.is_empty() {
        return Err(SimError::InvalidConfig(vec![
            "no sweep axes configured".into()
        ]));
    }
    cfg.validate()?;
    let axes: Vec<String> = cfg.sweep.iter().map(|a| a.name.clone()).collect();
    let mut points: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in &cfg.sweep {
        points = points
            .into_iter()
            .flat_map(|prefix| {
                axis.values().into_iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    let cells = with_pool(jobs, || {
        points
            .into_par_iter()
            .map(|coords| {
                let named: Vec<(&str, f64)> = axes
                    .iter()
                    .map(String::as_str)
                    .zip(coords.iter().copied())
                    .collect();
                match base.with_scalars(&named) {
                    Ok(c) => evaluate_cell(&c, coords),
                    Err(e) => failed(coords, e),
                }
            })
            .collect()
    })?;
    Ok(SweepResult { axes, cells })
}

#[derive(Debug, Clone, Serialize)]
pub struct WignerManifest {
    pub t: f64,
    pub file: String,
    pub minor_variance: f64,
    pub major_variance: f64,
    pub angle: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityManifest {
    pub stable: bool,
    pub margin: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub params: SystemParams,
    pub drive: DriveSpecWire,
    pub period: Option<f64>,
    pub horizon: Option<f64>,
    pub files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilityManifest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub wigner: Vec<WignerManifest>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepManifest {
    pub file: String,
    pub cells: usize,
    pub stable: usize,
    pub unstable: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub runs: Vec<RunManifest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepManifest>,
}

impl Manifest {
    fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config: cfg.clone(),
            runs: Vec::new(),
            sweep: None,
        }
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn io_error(path: &Path, e: std::io::Error) -> SimError {
    SimError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write_table(dir: &Path, name: String, table: &CsvTable, files: &mut Vec<String>) -> Result<()> {
    let path = dir.join(&name);
    table.write(&path).map_err(|e| io_error(&path, e))?;
    files.push(name);
    Ok(())
}

fn coupling_table(
    data: &RunData,
    g: f64,
    target: Option<&crate::model::EngineeredCoupling>,
) -> CsvTable {
    let mut t = CsvTable::new(COUPLING_HEADER);
    for s in &data.moments {
        let num = effective_coupling(g, s.state.a);
        let want = target.map_or(num_complex::Complex64::new(f64::NAN, f64::NAN), |e| {
            e.value(s.t)
        });
        t.row(&[s.t, num.re, num.im, want.re, want.im]);
    }
    t
}

fn measures_table(rows: &[MeasureRow]) -> CsvTable {
    let mut t = CsvTable::new(MEASURES_HEADER);
    for r in rows {
        t.row(&[r.t, r.en, r.v11, r.v22, r.neff, r.r_db]);
    }
    t
}

fn emit_run(cfg: &ExperimentConfig, label: Option<&str>, dir: &Path) -> Result<RunManifest> {
    let exp = cfg.resolve()?;
    let mut files = Vec::new();
    let name = |stem: &str| match label {
        Some(l) => format!("{stem}_{l}.csv"),
        None => format!("{stem}.csv"),
    };
    let mut manifest = RunManifest {
        label: label.map(str::to_owned),
        params: exp.params,
        drive: DriveSpecWire::from(exp.drive.clone()),
        period: exp.period,
        horizon: exp.horizon,
        files: Vec::new(),
        stability: None,
        comparison: None,
        wigner: Vec::new(),
    };
    if cfg.outputs.is_empty() {
        return Ok(manifest);
    }
    let data = simulate(cfg)?;
    let outputs: BTreeSet<OutputKind> = cfg.outputs.iter().copied().collect();
    if outputs.contains(&OutputKind::FirstMoments) {
        write_table(
            dir,
            name("first_moments"),
            &first_moments_table(&data.moments),
            &mut files,
        )?;
    }
    if outputs.contains(&OutputKind::Coupling) {
        let table = coupling_table(&data, exp.params.g, exp.engineered.as_ref());
        write_table(dir, name("coupling"), &table, &mut files)?;
    }
    if outputs.contains(&OutputKind::Cm) {
        write_table(dir, name("cm"), &cm_table(&data.cm), &mut files)?;
    }
    if outputs.iter().any(|o| o.is_measure()) {
        write_table(
            dir,
            name("measures"),
            &measures_table(&data.measures),
            &mut files,
        )?;
    }
    if let Some(s) = &data.stability {
        let mut t = CsvTable::new("t,max_re");
        for &(time, re) in &s.samples {
            t.row(&[time, re]);
        }
        write_table(dir, name("stability"), &t, &mut files)?;
        manifest.stability = Some(StabilityManifest {
            stable: s.report.stable,
            margin: s.report.margin,
            samples: s.report.samples,
        });
    }
    if let Some(c) = data.comparison {
        let mut t = CsvTable::new("from,to,q,p,a,c");
        t.row(&[c.from, c.to, c.q, c.p, c.a, c.c]);
        write_table(dir, name("comparison"), &t, &mut files)?;
        manifest.comparison = Some(c);
    }
    for (k, w) in data.wigner.iter().enumerate() {
        let stem = format!("wigner_{k}");
        let file = name(&stem);
        write_table(dir, file.clone(), &wigner_table(&w.grid), &mut files)?;
        manifest.wigner.push(WignerManifest {
            t: w.t,
            file,
            minor_variance: w.ellipse.minor_variance,
            major_variance: w.ellipse.major_variance,
            angle: w.ellipse.angle,
        });
    }
    manifest.files = files;
    Ok(manifest)
}

/// Summary returned by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
}

/// Runs the configuration (base run plus variants, or the sweep) and writes
/// CSV files and `manifest.json` into `out_dir`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    jobs: Option<usize>,
) -> Result<RunSummary> {
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| io_error(out_dir, e))?;
    let mut manifest = Manifest::new(cfg);
    if !cfg.sweep.is_empty() {
        if !cfg.outputs.is_empty() {
            let result = run_sweep(cfg, jobs)?;
            let file = "sweep.csv".to_string();
            let path = out_dir.join(&file);
            result
                .table()
                .write(&path)
                .map_err(|e| io_error(&path, e))?;
            manifest.sweep = Some(SweepManifest {
                file,
                cells: result.cells.len(),
                stable: result.count(CellStatus::Stable),
                unstable: result.count(CellStatus::Unstable),
                failed: result.count(CellStatus::Failed),
            });
        }
    } else {
        let mut runs: Vec<(Option<String>, ExperimentConfig)> = vec![(None, {
            let mut base = cfg.clone();
            base.variants.clear();
            base
        })];
        for v in &cfg.variants {
            runs.push((Some(v.label.clone()), cfg.variant(v)?));
        }
        let results: Vec<Result<RunManifest>> = with_pool(jobs, || {
            runs.par_iter()
                .map(|(label, c)| emit_run(c, label.as_deref(), out_dir))
                .collect()
        })?;
        for r in results {
            manifest.runs.push(r?);
        }
    }
    let path = out_dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| io_error(&path, e))?;
    Ok(RunSummary {
        out_dir: out_dir.to_path_buf(),
        manifest,
    })
}

/// Synthesised drive for the configured engineered coupling.
pub fn engineered_drive(cfg: &ExperimentConfig) -> Result<DriveSpec> {
    cfg.validate()?;
    let exp = cfg.resolve()?;
    if exp.engineered.is_none() {
        return Err(SimError::InvalidConfig(vec![
            "engineer-drive needs an engineered block".into(),
        ]));
    }
    Ok(exp.drive)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short_fig2() -> ExperimentConfig {
        let mut c = crate::recipes::load("fig5a").unwrap();
        c.horizon_periods = Some(4.0);
        c.window = Some(crate::config::Window { from: 3.0, to: 4.0 });
        c.samples_per_period = 8;
        c.variants.clear();
        c
    }

    #[test]
    fn measures_match_cm() {
        let data = simulate(&short_fig2()).unwrap();
        assert_eq!(data.cm.len(), 9);
        assert_eq!(data.measures.len(), 9);
        for (m, s) in data.measures.iter().zip(&data.cm) {
            assert_eq!(m.t, s.t);
            assert_eq!(m.v11, s.cm.0[(0, 0)]);
            assert_eq!(m.en, atom_mirror_negativity(&s.cm).unwrap());
        }
        assert!(data.stability.unwrap().report.samples > 0);
    }

    #[test]
    fn comparison_without_optomechanical_coupling_is_exact() {
        let mut c = crate::recipes::load("fig2").unwrap();
        c.params.g = 0.0;
        c.horizon_periods = Some(30.0);
        c.window = None;
        let r = compare_sources(&c).unwrap();
        assert!(r.a <= 1e-6 && r.c <= 1e-6, "{r:?}");
    }

    #[test]
    fn zeroth_order_misses_mechanics() {
        let mut c = crate::recipes::load("fig2").unwrap();
        c.floquet.j_max = 0;
        let r = compare_sources(&c).unwrap();
        assert_eq!(r.q, 1.0);
    }

    #[test]
    fn sweep_reports_unstable_cells_without_aborting() {
        let mut c = crate::recipes::load("fig4a").unwrap();
        c.sweep[0].points = 3;
        c.sweep[0].max = 3e5;
        c.sweep[1].points = 3;
        c.sweep[1].min = 0.1;
        c.sweep[1].max = 2.0;
        let r = run_sweep(&c, Some(2)).unwrap();
        assert_eq!(r.cells.len(), 9);
        assert!(r.count(CellStatus::Unstable) > 0);
        assert!(r.count(CellStatus::Stable) > 0);
        let text = r.table().as_str().to_owned();
        assert!(text.starts_with("E,G0,status,EN\n"));
        assert!(text.contains(",unstable,\n"));
        // Cells are independent: a single-cell evaluation reproduces the sweep entry.
        let cell = &r.cells[4];
        let alone = evaluate_cell(
            &c.with_scalars(&[("E", cell.coords[0]), ("G0", cell.coords[1])])
                .unwrap(),
            cell.coords.clone(),
        );
        assert_eq!(&alone, cell);
    }

    #[test]
    fn steady_state_run() {
        let mut c = crate::recipes::load("fig4b").unwrap();
        c.sweep.clear();
        c.params.g0_collective = 1.0;
        c.outputs = vec![OutputKind::EntanglementNegativity, OutputKind::Stability];
        let data = simulate(&c).unwrap();
        assert_eq!(data.measures.len(), 1);
        assert!(data.measures[0].t.is_infinite());
        assert!(data.measures[0].en > 0.0);
        assert!(data.stability.unwrap().report.stable);
    }
}
