use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cocycle_cli::output::{unix_now, write_report};
use cocycle_cli::{run, Command, Context, Counterexample, ExperimentConfig};

/// Seeded experiments on cocycles over suspension flows.
///
/// Exit codes: 0 success, 1 I/O failure, 2 invalid configuration or
/// arguments, 3 numerical failure.
#[derive(Parser)]
#[command(name = "cocycle-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// TOML experiment file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; defaults to `[output] dir`, else the current directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the horizon T.
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Print the JSON report to stdout instead of the summary.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Trajectory and cocycle values at sample times.
    Simulate,
    /// Birkhoff averages, lattice limits and the unit-step decomposition.
    Birkhoff,
    /// Limit in density off a constructed exceptional set.
    Dlim,
    /// Exceptional set construction and its growth.
    Exceptional,
    /// Measure of the ε-return set.
    Atkinson,
    /// Kingman limit in density.
    Kingman,
    /// Lyapunov spectrum, filtration and splitting.
    Met,
    /// Regularity defect and geodesic tracking.
    Track,
    /// Built-in counterexamples.
    Counterexample {
        #[arg(value_enum)]
        which: Which,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Ex1,
    Ex2,
}

impl From<&Cmd> for Command {
    fn from(c: &Cmd) -> Self {
        match c {
            Cmd::Simulate => Command::Simulate,
            Cmd::Birkhoff => Command::Birkhoff,
            Cmd::Dlim => Command::Dlim,
            Cmd::Exceptional => Command::Exceptional,
            Cmd::Atkinson => Command::Atkinson,
            Cmd::Kingman => Command::Kingman,
            Cmd::Met => Command::Met,
            Cmd::Track => Command::Track,
            Cmd::Counterexample { which: Which::Ex1 } => Command::Counterexample(Counterexample::Ex1),
            Cmd::Counterexample { which: Which::Ex2 } => Command::Counterexample(Counterexample::Ex2),
        }
    }
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("cocycle-lab: {msg}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match &cli.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(text) => match ExperimentConfig::parse(&text) {
                Ok(c) => c,
                Err(e) => return fail(2, format!("{}: {e}", path.display())),
            },
            Err(e) => return fail(1, format!("{}: {e}", path.display())),
        },
        None => ExperimentConfig::default(),
    };
    let out = cli.out.clone().or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    let ctx = match Context::new(cfg, cli.seed, cli.horizon) {
        Ok(c) => c,
        Err(e) => return fail(2, e),
    };
    let report = match run(Command::from(&cli.command), &ctx) {
        Ok(r) => r,
        Err(e) if e.is_validation() => return fail(2, e),
        Err(e) => return fail(3, e),
    };
    let now = unix_now();
    if let Err(e) = write_report(&out, &report, &ctx, now) {
        return fail(1, format!("{}: {e}", out.display()));
    }
    if cli.json {
        print!("{}", report.to_json(&ctx, now));
    } else {
        println!("{} (seed {}, T = {})", report.command, ctx.seed, report.horizon);
        for line in &report.summary {
            println!("  {line}");
        }
        println!("  wrote {}", out.display());
    }
    ExitCode::SUCCESS
}
