use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use optomech::config::{ExperimentConfig, OutputKind, WignerSpec};
use optomech::runner::{engineered_drive, run_experiment, run_sweep, stability_trace, CellStatus};
use optomech::{recipes, SimError};

#[derive(Parser)]
#[command(
    name = "optomech",
    version,
    about = "Driven atom-cavity-mirror simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// JSON experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in recipe name (see `optomech recipes`).
    #[arg(long)]
    recipe: Option<String>,
}

#[derive(Args)]
struct RunOpts {
    /// Output directory (default: $OPTOMECH_OUT_DIR or ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for variants and sweeps.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write CSV files plus a manifest.
    Simulate {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        run: RunOpts,
    },
    /// Print the drive that realises the configured engineered coupling.
    EngineerDrive {
        #[command(flatten)]
        source: Source,
    },
    /// Print the stability report over the last period before the horizon.
    Stability {
        #[command(flatten)]
        source: Source,
    },
    /// Evaluate the configured parameter sweep.
    Sweep {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        run: RunOpts,
    },
    /// Write Wigner grids of the mechanical mode at the given times.
    Wigner {
        #[command(flatten)]
        source: Source,
        /// Comma-separated times, in units of the horizon.
        #[arg(long, value_delimiter = ',', required = true)]
        times: Vec<f64>,
        #[command(flatten)]
        run: RunOpts,
    },
    /// List built-in recipes, or print one as JSON.
    Recipes { name: Option<String> },
}

fn load(source: &Source) -> anyhow::Result<ExperimentConfig> {
    match (&source.config, &source.recipe) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            Ok(ExperimentConfig::from_json(&text)?)
        }
        (None, Some(name)) => Ok(recipes::load(name)?),
        (Some(_), Some(_)) => bail!("--config and --recipe are mutually exclusive"),
        (None, None) => bail!("one of --config or --recipe is required"),
    }
}

fn out_dir(run: &RunOpts) -> PathBuf {
    run.out
        .clone()
        .or_else(|| std::env::var_os("OPTOMECH_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn simulate(cfg: &ExperimentConfig, run: &RunOpts) -> anyhow::Result<()> {
    let dir = out_dir(run);
    let summary = run_experiment(cfg, &dir, run.jobs)?;
    for r in &summary.manifest.runs {
        for f in &r.files {
            println!("{}", dir.join(f).display());
        }
    }
    if let Some(s) = &summary.manifest.sweep {
        println!("{}", dir.join(&s.file).display());
    }
    println!("{}", dir.join(optomech::runner::MANIFEST_FILE).display());
    Ok(())
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate { source, run } => simulate(&load(&source)?, &run),
        Command::EngineerDrive { source } => {
            let drive = engineered_drive(&load(&source)?)?;
            println!("{}", serde_json::to_string_pretty(&drive)?);
            Ok(())
        }
        Command::Stability { source } => {
            let cfg = load(&source)?;
            cfg.validate()?;
            let trace = stability_trace(&cfg.resolve()?)?;
            let json = serde_json::json!({
                "stable": trace.report.stable,
                "margin": trace.report.margin,
                "samples": trace.report.samples,
            });
            println!("{}", serde_json::to_string_pretty(&json)?);
            Ok(())
        }
        Command::Sweep { source, run } => {
            let cfg = load(&source)?;
            if cfg.sweep.is_empty() {
                bail!("configuration has no sweep axes");
            }
            let dir = out_dir(&run);
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let result = run_sweep(&cfg, run.jobs)?;
            let path = dir.join("sweep.csv");
            result
                .table()
                .write(&path)
                .with_context(|| format!("writing {}", path.display()))?;
            println!("{}", path.display());
            eprintln!(
                "{} cells: {} stable, {} unstable, {} failed",
                result.cells.len(),
                result.count(CellStatus::Stable),
                result.count(CellStatus::Unstable),
                result.count(CellStatus::Failed)
            );
            Ok(())
        }
        Command::Wigner { source, times, run } => {
            let mut cfg = load(&source)?;
            let (sigmas, points) = cfg.wigner.as_ref().map_or(
                (
                    optomech::measures::DEFAULT_WIGNER_SIGMAS,
                    optomech::measures::DEFAULT_WIGNER_POINTS,
                ),
                |w| (w.sigmas, w.points),
            );
            cfg.wigner = Some(WignerSpec {
                times,
                sigmas,
                points,
            });
            cfg.outputs = vec![OutputKind::Wigner];
            cfg.variants.clear();
            cfg.sweep.clear();
            simulate(&cfg, &run)
        }
        Command::Recipes { name: None } => {
            for n in recipes::names() {
                println!("{n}");
            }
            Ok(())
        }
        Command::Recipes { name: Some(n) } => match recipes::source(&n) {
            Some(text) => {
                print!("{text}");
                Ok(())
            }
            None => bail!("unknown recipe {n:?}"),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<SimError>() {
                Some(SimError::InvalidConfig(_)) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
