//! Command-line front end: configuration handling and the subcommands behind `np-resonance`.

pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{DeltaGrid, Overrides, Pipeline, RunConfig, SourceSpec};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "np-resonance", version, about = "Neumann-Poincaré spectra, plasmon resonance sweeps and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Eigenvalues of K* (JSON summary and `j,lambda` CSV).
    Spectrum,
    /// Gradient norms over the δ grid with a scaling fit.
    Sweep,
    /// Compare the Green function expansion with the direct kernel.
    GreenCheck,
    /// Run the invariant suite; exit 1 if any check fails.
    Validate,
}

#[derive(Debug, clap::Args)]
struct Flags {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// ellipse, disk, ball or star.
    #[arg(long, global = true)]
    shape: Option<String>,
    /// Focal scale of the ellipse, or the radius of a disk or star.
    #[arg(long = "R", global = true)]
    r: Option<f64>,
    /// Elliptic radius of the ellipse boundary.
    #[arg(long, global = true)]
    rho0: Option<f64>,
    /// Boundary quadrature nodes (even).
    #[arg(long, global = true)]
    nodes: Option<usize>,
    /// Retained eigenpairs.
    #[arg(long, global = true)]
    keep: Option<usize>,
    /// Modes in the numeric Green expansion.
    #[arg(long, global = true)]
    nmax: Option<usize>,
    /// Terms in closed-form series.
    #[arg(long, global = true)]
    series_terms: Option<usize>,
    /// Log-spaced grid `start:stop:points`, decreasing.
    #[arg(long, global = true, value_name = "START:STOP:POINTS")]
    delta_grid: Option<String>,
    /// `elliptic:RHO_Z,OMEGA_Z,AX,AY`, `cartesian:X,Y,AX,AY` or `axial:R0,AZ`.
    #[arg(long, global = true)]
    source: Option<String>,
    /// Exact permittivities `EPS_C,EPS_M`.
    #[arg(long, global = true, value_name = "EPS_C,EPS_M", conflicts_with_all = ["simplified_lambda", "tuned_lambda"])]
    material: Option<String>,
    /// Use λ = iδ.
    #[arg(long, global = true, conflicts_with = "tuned_lambda")]
    simplified_lambda: bool,
    /// Use λ = λ₀ + iδ.
    #[arg(long, global = true, value_name = "LAMBDA0")]
    tuned_lambda: Option<f64>,
    /// analytic or numeric.
    #[arg(long, global = true)]
    pipeline: Option<String>,
    /// Output path prefix.
    #[arg(long, global = true, value_name = "PREFIX")]
    out: Option<String>,
    /// Reuse assembled matrices stored next to the outputs.
    #[arg(long, global = true)]
    cache: bool,
}

fn resolve(flags: &Flags) -> Result<RunConfig, CliError> {
    let mut cfg = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(&path.display().to_string(), e))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    let material = match &flags.material {
        Some(text) => {
            let parts: Vec<&str> = text.split(',').collect();
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| CliError::Config(format!("material: {e}")));
            if parts.len() != 2 {
                return Err(CliError::Config("material expects EPS_C,EPS_M".into()));
            }
            Some((parse(parts[0])?, parse(parts[1])?))
        }
        None => None,
    };
    let pipeline = match flags.pipeline.as_deref() {
        None => None,
        Some("analytic") => Some(Pipeline::Analytic),
        Some("numeric") => Some(Pipeline::Numeric),
        Some(other) => return Err(CliError::Config(format!("unknown pipeline '{other}'"))),
    };
    cfg.apply(&Overrides {
        shape: flags.shape.clone(),
        r: flags.r,
        rho0: flags.rho0,
        nodes: flags.nodes,
        keep: flags.keep,
        n_max: flags.nmax,
        series_terms: flags.series_terms,
        delta_grid: flags.delta_grid.as_deref().map(str::parse::<DeltaGrid>).transpose()?,
        source: flags.source.as_deref().map(str::parse::<SourceSpec>).transpose()?,
        material,
        simplified_lambda: flags.simplified_lambda,
        tuned_lambda: flags.tuned_lambda,
        pipeline,
        out: flags.out.clone(),
        cache: flags.cache,
    })?;
    Ok(cfg)
}

/// Parses arguments, runs one subcommand and returns the process exit code.
pub fn run<I: IntoIterator<Item = T>, T: Into<OsString> + Clone>(args: I) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = resolve(&cli.flags).and_then(|cfg| match cli.command {
        Command::Spectrum => commands::cmd_spectrum(&cfg),
        Command::Sweep => commands::cmd_sweep(&cfg),
        Command::GreenCheck => commands::cmd_green_check(&cfg),
        Command::Validate => commands::cmd_validate(&cfg),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.name());
            if let CliError::Validation(failures) = &e {
                for f in failures {
                    eprintln!("  failed: {f}");
                }
            }
            e.exit_code()
        }
    }
}
