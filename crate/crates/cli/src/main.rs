use std::path::PathBuf;
use std::process::ExitCode;

use abstraction_cli::{run_experiment, Fault, Kind, RunRequest, OUT_ENV};
use clap::{Args, Parser, Subcommand};

/// Maximum-entropy abstraction experiments.
///
/// Exit codes: 0 ok, 1 verification failed, 2 invalid config, 3 infeasible,
/// 4 non-convergence, 5 other numeric error, 6 I/O error.
#[derive(Parser)]
#[command(name = "abstraction", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed; overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Root for output directories when neither --out nor the config sets one.
    #[arg(long, env = OUT_ENV, hide_env_values = true)]
    out_root: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a maximum-entropy problem.
    Solve(Common),
    /// Score an abstraction against a query set.
    Eval(Common),
    /// Learn abstraction targets.
    Learn(Common),
    /// Learn abstract dynamics for a Markov system.
    Dynamics(Common),
    /// Score the abstractability of a gridded density.
    Abstractability(Common),
    /// Mutual-information checks.
    Mi(Common),
    /// Run the full verification suite.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Tolerance profile: default or strict.
        #[arg(long)]
        profile: Option<String>,
        #[arg(long, hide = true, value_enum)]
        inject_fault: Option<Fault>,
    },
}

fn request(kind: Kind, c: Common) -> RunRequest {
    RunRequest {
        config: c.config,
        out: c.out,
        seed: c.seed,
        out_root: c.out_root,
        ..RunRequest::new(kind)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let req = match cli.command {
        Command::Solve(c) => request(Kind::Solve, c),
        Command::Eval(c) => request(Kind::Eval, c),
        Command::Learn(c) => request(Kind::Learn, c),
        Command::Dynamics(c) => request(Kind::Dynamics, c),
        Command::Abstractability(c) => request(Kind::Abstractability, c),
        Command::Mi(c) => request(Kind::Mi, c),
        Command::Verify {
            common,
            profile,
            inject_fault,
        } => RunRequest {
            profile,
            fault: inject_fault,
            echo: true,
            ..request(Kind::Verify, common)
        },
    };
    let outcome = run_experiment(&req);
    if let Some(e) = &outcome.error {
        eprintln!("error: {e}");
    }
    eprintln!("results in {}", outcome.out_dir.display());
    ExitCode::from(outcome.exit_code)
}
