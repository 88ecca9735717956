use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use schelling_cli::config::SEED_ENV;
use schelling_cli::output::OutputDir;
use schelling_cli::{dispatch, Command, ConfigError, Overrides, RunConfig, RunError};

#[derive(Parser)]
#[command(name = "schelling", version, about = "Schelling dynamics, its lattice and continuum equations")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand)]
enum Sub {
    /// Run replicas of the particle system.
    Simulate,
    /// Integrate the lattice reaction-diffusion system.
    DiscretePde,
    /// Solve the continuum equation by Picard iteration.
    LimitPde,
    /// Particle system vs lattice equation vs continuum equation.
    Compare,
    /// Phase diagram sweep and potential profiles.
    Phase,
    /// The three explicit solutions from one initial datum and their residuals.
    Nonuniq,
}

#[derive(Args)]
struct Flags {
    /// TOML configuration; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long = "out", global = true)]
    output_dir: Option<PathBuf>,
    /// Master seed; beats SCHELLING_SEED, which beats the file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    threshold: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    dim: Option<usize>,
    #[arg(long, global = true)]
    side: Option<usize>,
    #[arg(long, global = true)]
    replicas: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    t_end: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    rho: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    tau: Option<f64>,
    #[arg(long, global = true)]
    m: Option<usize>,
    /// Comma-separated neighborhood sizes for limit-pde.
    #[arg(long, global = true, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    /// Write every simulated configuration in the lattice text format.
    #[arg(long, global = true)]
    snapshots: bool,
    /// Comma-separated lattice sides for compare.
    #[arg(long, global = true, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            output_dir: self.output_dir.clone(),
            threshold: self.threshold,
            beta: self.beta,
            alpha: self.alpha,
            dim: self.dim,
            side: self.side,
            replicas: self.replicas,
            t_end: self.t_end,
            rho: self.rho,
            tau: self.tau,
            m: self.m,
            ks: self.ks.clone(),
            sizes: self.sizes.clone(),
            snapshots: self.snapshots.then_some(true),
        }
    }
}

fn run(cli: &Cli) -> Result<serde_json::Value, RunError> {
    let command = match cli.command {
        Sub::Simulate => Command::Simulate,
        Sub::DiscretePde => Command::DiscretePde,
        Sub::LimitPde => Command::LimitPde,
        Sub::Compare => Command::Compare,
        Sub::Phase => Command::Phase,
        Sub::Nonuniq => Command::Nonuniq,
    };
    let mut cfg = match &cli.flags.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    cfg.apply(env_seed.as_deref(), &cli.flags.overrides())?;
    cfg.validate()?;
    let mut out = OutputDir::create(&cfg.output_dir, &cfg.hash())?;
    dispatch(command, &cfg, &mut out)?;
    Ok(json!({
        "status": "ok",
        "command": command.name(),
        "config_hash": out.hash(),
        "files": out.written(),
    }))
}

fn error_json(e: &RunError) -> serde_json::Value {
    let kind = match e {
        RunError::Config(_) => "config",
        RunError::Core(_) => "run",
        RunError::Output(_) => "output",
    };
    let mut v = json!({ "status": "error", "kind": kind, "message": e.to_string() });
    if let RunError::Config(ConfigError::Invalid {
        field, constraint, ..
    }) = e
    {
        v["field"] = json!(field);
        v["constraint"] = json!(constraint);
    }
    v
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version.
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let v = json!({ "status": "error", "kind": "usage", "message": e.kind().to_string(), "detail": e.to_string() });
            eprintln!("{v}");
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::from(if matches!(e, RunError::Config(_)) { 2 } else { 1 })
        }
    }
}
