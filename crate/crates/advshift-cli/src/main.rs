use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use advshift_cli::commands;

/// Particle simulations of adversarial covariate shift: directional
/// convergence diagnostics, certificate suites, and the learner game.
#[derive(Parser)]
#[command(name = "advshift", version, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one configured ensemble and write trajectory (and, for
    /// classification, diagnostics) tables.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; ADVSHIFT_THREADS wins over this. Output bytes
        /// never depend on it.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run a named property suite; exits 1 with counterexamples on any
    /// violation.
    Verify {
        /// One of: invariants, gradients, closed-form, envelopes.
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Re-run a benchmark figure's schedule and write its snapshot tables.
    Reproduce {
        #[arg(long)]
        figure: FigureArg,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the figure's default seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit the directional convergence rate on a log-spread grid.
    Rates {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Play one adversary-then-learner round and record the outcome.
    Learner {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the config's sweep grid, one row per value.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FigureArg {
    Fig1,
    Fig2,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Simulate { config, out, seed, threads } => {
            commands::simulate(&config, &out, seed, threads)
        }
        Cmd::Verify { suite, seed } => commands::verify(&suite, seed),
        Cmd::Reproduce { figure, out, seed } => {
            let f = match figure {
                FigureArg::Fig1 => commands::Figure::Fig1,
                FigureArg::Fig2 => commands::Figure::Fig2,
            };
            commands::reproduce(f, &out, seed)
        }
        Cmd::Rates { config, out, seed, threads } => {
            commands::rates(&config, &out, seed, threads)
        }
        Cmd::Learner { config, out, seed } => commands::learner(&config, &out, seed),
        Cmd::Sweep { config, out, threads } => commands::sweep(&config, &out, threads),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
