//! Command-line front end: model generation, reduction sweeps, Hamiltonian
//! optimization, controller synthesis, and verification.
//!
//! Exit codes: 0 on success, 1 on usage or input errors, 2 when a
//! certificate fails. Errors are written as single-line JSON records on
//! standard error.

mod commands;
mod config;
mod report;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "phlqg",
    about = "Structure-preserving LQG balanced truncation for port-Hamiltonian DAE systems",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArg {
    /// Flat key=value configuration file overriding solver parameters
    /// (kyp_eps, hinf_tol, rank_tol, probe_frequencies).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark model file.
    Generate {
        /// Family: msd | network | counterexample:phdae_mor |
        /// counterexample:classical.
        #[arg(long)]
        family: String,
        /// Number of masses (msd family).
        #[arg(long, default_value_t = 20)]
        masses: usize,
        /// Network preset: small | paper.
        #[arg(long, default_value = "small")]
        preset: String,
        /// Inner discretization nodes per pipe (network family).
        #[arg(long)]
        inner_nodes: Option<usize>,
        /// Realization to write: msd: first-order | semi-explicit |
        /// decoupled; network: index2 | index1.
        #[arg(long)]
        realization: Option<String>,
        /// Reduce to a minimal realization before writing
        /// (semi-explicit impulse-free realizations only).
        #[arg(long, default_value_t = false)]
        minimal: bool,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArg,
    },
    /// Structure-preserving balanced truncation at a fixed order.
    Reduce {
        /// Model file path or counterexample:NAME.
        #[arg(long)]
        model: String,
        /// Truncation order.
        #[arg(long)]
        ell: usize,
        /// Variant: structured | classical.
        #[arg(long, default_value = "structured")]
        variant: String,
        #[arg(long)]
        out: PathBuf,
        /// Optional text report path.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArg,
    },
    /// Error-versus-order sweep over all three variants, written as CSV.
    Sweep {
        #[arg(long)]
        model: String,
        /// Order range, e.g. 1..10 (inclusive).
        #[arg(long)]
        ell: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArg,
    },
    /// Replace the Hamiltonian by an extremal one and write the new model.
    OptimizeQ {
        #[arg(long)]
        model: String,
        /// Method: auto | index1 | general.
        #[arg(long, default_value = "auto")]
        method: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArg,
    },
    /// Passive LQG controller synthesis with closed-loop certificates.
    Controller {
        #[arg(long)]
        model: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArg,
    },
    /// Run the invariant suite on a model file.
    Verify {
        #[arg(long)]
        model: String,
        /// Additionally verify a truncation at this order.
        #[arg(long)]
        ell: Option<usize>,
        #[command(flatten)]
        cfg: ConfigArg,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap help/version output is not an error.
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let outcome = match cli.command {
        Command::Generate {
            family,
            masses,
            preset,
            inner_nodes,
            realization,
            minimal,
            out,
            cfg,
        } => config::load(cfg.config.as_deref()).and_then(|c| {
            commands::generate(
                &family,
                masses,
                &preset,
                inner_nodes,
                realization.as_deref(),
                minimal,
                &out,
                &c,
            )
        }),
        Command::Reduce {
            model,
            ell,
            variant,
            out,
            report,
            cfg,
        } => config::load(cfg.config.as_deref())
            .and_then(|c| commands::reduce(&model, ell, &variant, &out, report.as_deref(), &c)),
        Command::Sweep { model, ell, out, cfg } => config::load(cfg.config.as_deref())
            .and_then(|c| commands::sweep(&model, &ell, &out, &c)),
        Command::OptimizeQ {
            model,
            method,
            out,
            cfg,
        } => config::load(cfg.config.as_deref())
            .and_then(|c| commands::optimize_q(&model, &method, &out, &c)),
        Command::Controller { model, out, cfg } => {
            config::load(cfg.config.as_deref()).and_then(|c| commands::controller(&model, &out, &c))
        }
        Command::Verify { model, ell, cfg } => {
            config::load(cfg.config.as_deref()).and_then(|c| commands::verify(&model, ell, &c))
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report::emit_error_record(&e);
            ExitCode::from(report::exit_code(&e))
        }
    }
}
