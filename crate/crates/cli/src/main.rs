use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tubecalc::{run, CliError, Command, Report, RunConfig};
use tubecalc_core::convergence::Family;
use tubecalc_core::fields::ScalarField;

/// Shape calculus on tubular neighborhoods of signed distance functions.
///
/// Mean curvature is the undivided trace of the shape operator (2 on the unit
/// sphere). Exit status: 0 success, 1 input or solver error, 2 a checked
/// property failed.
#[derive(Debug, Parser)]
#[command(name = "tubecalc", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// Shape JSON file
    #[arg(long, global = true)]
    shape: Option<PathBuf>,
    /// Tube half-width (for `reach`: the radius to test)
    #[arg(long, global = true, allow_negative_numbers = true)]
    h: Option<f64>,
    /// Grid spacing of the tube quadrature
    #[arg(long, global = true, allow_negative_numbers = true)]
    spacing: Option<f64>,
    /// Split cells straddling the tube edge into subcells
    #[arg(long, global = true)]
    subcells: bool,
    /// JSON config file; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// JSON report path (stdout when absent)
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// CSV detail path
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Worker threads
    #[arg(long, global = true, env = "TUBECALC_THREADS")]
    threads: Option<usize>,
    /// Seed of the low-discrepancy sequences
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of boundary samples for reach checks
    #[arg(long, global = true)]
    n_samples: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Uniform ball check at --h, or reach estimate without it
    Reach {
        /// Relative bisection tolerance of the estimate
        #[arg(long, allow_negative_numbers = true)]
        reach_tol: Option<f64>,
    },
    /// Boundary integral of a catalogue integrand
    Functional {
        /// area, mean-curvature, willmore, normal-moment, weighted-curvature or volume
        #[arg(long)]
        integrand: Option<String>,
    },
    /// Laplace–Beltrami solve with zero mean
    SolveLb {
        /// Load: zero, one, const:c, x, y, z, r2 or z2
        #[arg(long)]
        field: Option<ScalarField>,
        #[arg(long, allow_negative_numbers = true)]
        eps_normal: Option<f64>,
        /// Also estimate the Poincaré constant
        #[arg(long)]
        poincare: bool,
    },
    /// Dirichlet Poisson solve with boundary traces
    SolvePoisson {
        #[arg(long)]
        source: Option<ScalarField>,
        #[arg(long)]
        boundary: Option<ScalarField>,
        /// Grid spacing of the volume solve
        #[arg(long, allow_negative_numbers = true)]
        poisson_spacing: Option<f64>,
    },
    /// Convergence experiment along a shape sequence
    Converge {
        /// ellipsoid-to-sphere, harmonic-decay or radius-ramp
        #[arg(long)]
        family: Option<Family>,
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long)]
        dim: Option<usize>,
        /// Integrand of the first functional
        #[arg(long)]
        integrand: Option<String>,
        /// Load of the second functional
        #[arg(long)]
        field: Option<ScalarField>,
        #[arg(long, allow_negative_numbers = true)]
        tol_lsc: Option<f64>,
        #[arg(long)]
        n_domain_samples: Option<usize>,
        #[arg(long)]
        n_surface_samples: Option<usize>,
    },
}

fn flag_config(cli: Cli) -> (RunConfig, Option<PathBuf>) {
    let c = cli.common;
    let mut cfg = RunConfig {
        shape: c.shape,
        h: c.h,
        spacing: c.spacing,
        subcells: c.subcells.then_some(true),
        output: c.output,
        csv: c.csv,
        threads: c.threads,
        seed: c.seed,
        n_samples: c.n_samples,
        ..Default::default()
    };
    match cli.command {
        Sub::Reach { reach_tol } => {
            cfg.command = Some(Command::Reach);
            cfg.reach_tol = reach_tol;
        }
        Sub::Functional { integrand } => {
            cfg.command = Some(Command::Functional);
            cfg.integrand = integrand;
        }
        Sub::SolveLb { field, eps_normal, poincare } => {
            cfg.command = Some(Command::SolveLb);
            cfg.field = field;
            cfg.eps_normal = eps_normal;
            cfg.poincare = poincare.then_some(true);
        }
        Sub::SolvePoisson { source, boundary, poisson_spacing } => {
            cfg.command = Some(Command::SolvePoisson);
            cfg.source = source;
            cfg.boundary = boundary;
            cfg.poisson_spacing = poisson_spacing;
        }
        Sub::Converge { family, n_max, dim, integrand, field, tol_lsc, n_domain_samples, n_surface_samples } => {
            cfg.command = Some(Command::Converge);
            cfg.family = family;
            cfg.n_max = n_max;
            cfg.dim = dim;
            cfg.integrand = integrand;
            cfg.field = field;
            cfg.tol_lsc = tol_lsc;
            cfg.n_domain_samples = n_domain_samples;
            cfg.n_surface_samples = n_surface_samples;
        }
    }
    (cfg, c.config)
}

fn emit(report: &Report, csv: Option<Vec<u8>>) -> Result<(), CliError> {
    let json = report.to_json();
    match &report.config.output {
        Some(path) => std::fs::write(path, json + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        None => println!("{json}"),
    }
    if let (Some(path), Some(bytes)) = (&report.config.csv, csv) {
        std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let report = Report {
                command: "none".into(),
                config: RunConfig::default(),
                results: serde_json::Value::Null,
                assertions: Vec::new(),
                error: Some("usage".into()),
            };
            println!("{}", report.to_json());
            return ExitCode::from(1);
        }
    };
    let (flags, config_path) = flag_config(cli);
    let command = flags.command;
    let merged = match config_path.as_deref().map(RunConfig::from_file).transpose() {
        // the subcommand on the command line always names the pipeline
        Ok(file) => RunConfig { command, ..flags.over(file.unwrap_or_default()) },
        Err(e) => {
            eprintln!("tubecalc: {e}");
            let report = Report {
                command: command.map(|c| c.name()).unwrap_or("none").into(),
                config: flags,
                results: serde_json::Value::Null,
                assertions: Vec::new(),
                error: Some(e.code().into()),
            };
            let _ = emit(&report, None);
            return ExitCode::from(1);
        }
    };
    let (report, csv) = run(merged);
    if let Err(e) = emit(&report, csv) {
        eprintln!("tubecalc: {e}");
        return ExitCode::from(1);
    }
    ExitCode::from(report.exit_code() as u8)
}
