//! `coordc`: generate instances, run coordination protocols, verify their
//! outputs and sweep message length against objective.

mod gen;
mod output;
mod run;
mod sweep;
mod verify;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "coordc", version, about = "Coordination protocols with short broadcast messages")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded instance as JSON.
    #[command(subcommand)]
    Gen(gen::GenCommand),
    /// Run the regularized-dual matching protocol (or the full-matching baseline).
    MatchCoordinate(run::MatchArgs),
    /// Run counter-compressed best-response dynamics on a routing game.
    RoutingCoordinate(run::RoutingArgs),
    /// Run the admission-score stable matching protocol.
    StableCoordinate(run::StableArgs),
    /// Pick a price message privately with the exponential mechanism.
    PrivateCoordinate(run::PrivateArgs),
    /// Check structural, stability, equilibrium or privacy claims; exit 4 on failure.
    #[command(subcommand)]
    Verify(verify::VerifyCommand),
    /// Sweep one parameter and emit message length and objective per cell.
    Sweep(sweep::SweepArgs),
}

/// Raised when a check ran to completion and the claim did not hold.
#[derive(Debug)]
pub struct VerificationFailed(pub String);

impl std::fmt::Display for VerificationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "verification failed: {}", self.0)
    }
}

impl std::error::Error for VerificationFailed {}

fn core_exit_code(err: &coordc::Error) -> u8 {
    use coordc::Error as E;
    match err {
        E::Precondition(_) | E::Unreachable { .. } | E::NonConvergence { .. } => 3,
        E::Invariant(_) => 4,
        E::Decode { source, .. } => core_exit_code(source),
        _ => 2,
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<VerificationFailed>().is_some() {
        return 4;
    }
    match err.downcast_ref::<coordc::Error>() {
        Some(e) => core_exit_code(e),
        None => 2,
    }
}

/// Output piped into a reader that exited early (`| head`) is not a failure.
fn closed_pipe(err: &anyhow::Error) -> bool {
    err.chain().any(|cause| {
        cause
            .downcast_ref::<std::io::Error>()
            .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
    })
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("COORDC_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| coordc::Error::Parameter(format!("COORDC_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Gen(cmd) => gen::run(cmd),
        Command::MatchCoordinate(args) => run::match_coordinate(args),
        Command::RoutingCoordinate(args) => run::routing_coordinate(args),
        Command::StableCoordinate(args) => run::stable_coordinate(args),
        Command::PrivateCoordinate(args) => run::private_coordinate(args),
        Command::Verify(cmd) => verify::run(cmd),
        Command::Sweep(args) => sweep::run(args),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) if closed_pipe(&err) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
