use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use vflip_lab::commands::{run, Command};
use vflip_lab::config::RunConfig;
use vflip_lab::{LabError, DEFAULT_CONFIG};

/// Velocity-flip harmonic chain: simulations, moment flows, macroscopic
/// equations and their comparison.
#[derive(Debug, Parser)]
#[command(name = "vflip", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// TOML configuration; the built-in default when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "vflip-out")]
    out: PathBuf,

    /// Master seed, overriding the config.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, value_name = "K")]
    threads: Option<usize>,

    /// Print nothing but errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Particle trajectories and pathwise conservation.
    Simulate,
    /// Moment flow along flip sequences (moment_mc) or its average (ode).
    Moments,
    /// Macroscopic equations, or the pinned heat equation.
    Pde,
    /// Empirical profiles against the macroscopic solution over the N-list.
    Converge,
    /// Fluctuation-dissipation residuals, duality and moment-flow invariants.
    VerifyIdentities,
    /// Diffusivity of the pinned chain from mode decay.
    FitDiffusivity,
}

impl From<&Cmd> for Command {
    fn from(c: &Cmd) -> Self {
        match c {
            Cmd::Simulate => Command::Simulate,
            Cmd::Moments => Command::Moments,
            Cmd::Pde => Command::Pde,
            Cmd::Converge => Command::Converge,
            Cmd::VerifyIdentities => Command::VerifyIdentities,
            Cmd::FitDiffusivity => Command::FitDiffusivity,
        }
    }
}

fn execute(cli: &Cli) -> Result<bool, LabError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::parse(DEFAULT_CONFIG)?,
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(LabError::Config("--threads: must be at least 1".into()));
        }
        pool = pool.num_threads(k);
    }
    let pool = pool
        .build()
        .map_err(|e| LabError::Config(format!("--threads: {e}")))?;
    let cmd = Command::from(&cli.command);
    let summary = pool.install(|| run(cmd, &cfg, &cli.out))?;
    if !cli.quiet {
        for c in summary.failed() {
            eprintln!("FAIL {}: {:e} (threshold {:e})", c.name, c.value, c.threshold);
        }
        println!("{}", summary.line());
    }
    Ok(summary.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(4),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
