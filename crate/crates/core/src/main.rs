use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use obstacle_flow::config::{load_config, parse_config, OutputFormat, RunConfigFile, FULL_RESOLUTION_DX};
use obstacle_flow::diagnostics::DEFAULT_COINCIDENCE_TOL;
use obstacle_flow::experiments::{eps_sweep, model_comparison, nu_sweep, osl_surface, uniform_times};
use obstacle_flow::io::{self, write_run_bundle};
use obstacle_flow::{validate, Scheme};

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

/// Obstacle-penalized nonlocal conservation law solver.
#[derive(Parser, Debug)]
#[command(name = "obstacle-flow", version)]
struct Cli {
    /// Run configuration (TOML, or JSON); defaults to the built-in preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Cell size replacing the configured grid resolution.
    #[arg(long, global = true, value_name = "DX")]
    dx_override: Option<f64>,
    /// Use the full resolution dx = 1/5000.
    #[arg(long, global = true, conflicts_with = "dx_override")]
    paper_resolution: bool,
    /// Suppress progress messages.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Integrate the configured model once.
    Run,
    /// Penalization sweep over the configured epsilon list.
    SweepEps,
    /// Viscous runs over the configured nu list against the hyperbolic run.
    SweepNu,
    /// Nonlocal U1, local U1 and local U2 from the same datum.
    Compare,
    /// Dense time-space dump of q and V(o - q).
    OslSurface,
    /// Check the modelling assumptions and print the report.
    Validate,
}

enum Failure {
    Config(String),
    Solver(String),
    Io(String),
}

impl From<obstacle_flow::Error> for Failure {
    fn from(e: obstacle_flow::Error) -> Self {
        Failure::Solver(e.to_string())
    }
}

impl From<io::IoError> for Failure {
    fn from(e: io::IoError) -> Self {
        Failure::Io(e.to_string())
    }
}

struct Context {
    config: RunConfigFile,
    out: PathBuf,
    quiet: bool,
}

impl Context {
    fn progress(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn csv(&self) -> bool {
        self.config.output.wants(OutputFormat::Csv)
    }

    fn json(&self) -> bool {
        self.config.output.wants(OutputFormat::Json)
    }

    fn wrote(&self, files: &[PathBuf]) {
        self.progress(format!("wrote {} file(s) to {}", files.len(), self.out.display()));
    }
}

fn load(cli: &Cli) -> Result<Context, Failure> {
    let mut config = match &cli.config {
        Some(path) => load_config(path),
        None => parse_config(""),
    }
    .map_err(|e| Failure::Config(e.to_string()))?;
    let dx = if cli.paper_resolution { Some(FULL_RESOLUTION_DX) } else { cli.dx_override };
    if let Some(dx) = dx {
        config = config.with_spacing(dx).map_err(|e| Failure::Config(format!("--dx-override: {e}")))?;
    }
    let out = cli.out.clone().unwrap_or_else(|| config.output.directory.clone());
    Ok(Context { config, out, quiet: cli.quiet })
}

fn run_once(ctx: &Context) -> Result<(), Failure> {
    let c = &ctx.config;
    let mut solver = c.solver.clone();
    if solver.snapshot_times.is_empty() {
        solver.snapshot_times = vec![solver.t_final];
    }
    ctx.progress(format!("run: {} cells, dx = {:.3e}, t_final = {}", c.grid.n_cells(), c.grid.dx(), solver.t_final));
    let scheme = Scheme::new(&c.model, &c.grid, &solver)?;
    let result = scheme.run()?;
    ctx.progress(format!(
        "{} steps in {:.2} s, min clearance {:.3e}, max mass drift {:.2e}",
        result.step_count,
        result.wall_time.as_secs_f64(),
        result.extremes.min_clearance,
        result.extremes.max_rel_mass_drift
    ));
    let mut files = write_run_bundle(&result, &c.echo, &ctx.out, "run", ctx.csv(), ctx.json())?;
    if ctx.json() {
        let report = scheme.coincidence(&result.final_state, DEFAULT_COINCIDENCE_TOL);
        let p = ctx.out.join("run_coincidence.json");
        io::write_json(&report, &p)?;
        files.push(p);
    }
    ctx.wrote(&files);
    Ok(())
}

fn sweep_eps(ctx: &Context) -> Result<(), Failure> {
    let c = &ctx.config;
    let mut solver = c.solver.clone();
    if solver.snapshot_times.is_empty() {
        solver.snapshot_times = vec![1.5, 2.25];
        solver.t_final = solver.t_final.max(2.25);
    }
    ctx.progress(format!("sweep-eps over {:?}", c.experiment.eps_list));
    let sweep = eps_sweep(&c.model, &c.grid, &solver, &c.experiment.eps_list)?;
    for (ti, t) in sweep.times.iter().enumerate() {
        ctx.progress(format!("t = {t}: d_k = {:?}, nonincreasing = {}", sweep.successive(ti), sweep.cauchy(ti)));
    }
    let files = io::write_eps_sweep(&sweep, &c.echo, &ctx.out, ctx.csv(), ctx.json())?;
    ctx.wrote(&files);
    Ok(())
}

fn sweep_nu(ctx: &Context) -> Result<(), Failure> {
    let c = &ctx.config;
    let mut template = c.viscous.clone();
    if template.base.snapshot_times.is_empty() {
        template.base.snapshot_times = vec![template.base.t_final];
    }
    ctx.progress(format!("sweep-nu over {:?}", c.experiment.nu_list));
    let sweep = nu_sweep(&c.model, &c.grid, &template, &c.experiment.nu_list)?;
    for (ti, t) in sweep.times.iter().enumerate() {
        ctx.progress(format!("t = {t}: L1 to hyperbolic = {:?}", sweep.distances[ti]));
    }
    let files = io::write_nu_sweep(&sweep, &c.echo, &ctx.out, ctx.csv(), ctx.json())?;
    ctx.wrote(&files);
    Ok(())
}

fn compare(ctx: &Context) -> Result<(), Failure> {
    let c = &ctx.config;
    let eps = c
        .model
        .epsilon()
        .ok_or_else(|| Failure::Config("model.penalization: the comparison needs a penalized model".into()))?;
    ctx.progress(format!("compare at epsilon = {eps}"));
    let cmp = model_comparison(&c.grid, &c.solver, eps)?;
    let files = io::write_comparison(&cmp, &c.echo, &ctx.out, ctx.csv(), ctx.json())?;
    ctx.wrote(&files);
    Ok(())
}

fn surface(ctx: &Context) -> Result<(), Failure> {
    let c = &ctx.config;
    let mut solver = c.solver.clone();
    solver.snapshot_times = uniform_times(solver.t_final, c.experiment.surface_rows);
    ctx.progress(format!("osl-surface with {} rows", solver.snapshot_times.len()));
    let s = osl_surface(&c.model, &c.grid, &solver)?;
    let files = io::write_surface(&s, &ctx.out)?;
    ctx.wrote(&files);
    Ok(())
}

fn validate_only(ctx: &Context) -> Result<(), Failure> {
    let c = &ctx.config;
    let report = validate(&c.model, &c.grid);
    print!("{report}");
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Solver(format!("{} assumption check(s) failed", report.failures().len())))
    }
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    let ctx = load(cli)?;
    match cli.command {
        Command::Run => run_once(&ctx),
        Command::SweepEps => sweep_eps(&ctx),
        Command::SweepNu => sweep_nu(&ctx),
        Command::Compare => compare(&ctx),
        Command::OslSurface => surface(&ctx),
        Command::Validate => validate_only(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let help = matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion);
            let _ = e.print();
            return if help { ExitCode::SUCCESS } else { ExitCode::from(EXIT_CONFIG) };
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("rejected: {msg}");
            ExitCode::from(EXIT_SOLVER)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("i/o error: {msg}");
            ExitCode::from(EXIT_IO)
        }
    }
}
