//! Batch front end: `qms entropy|verify|mixing|sweep`.
//!
//! Exit status is 0 when every applicable check passes, 1 when a check
//! fails (outputs are still written) and 2 for configuration errors.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, Subcommand};

use config::{Defaults, Flags, MissingBranch, ModelSpec};

#[derive(Parser, Debug)]
#[command(name = "qms", version, about = "Quantum Markov states on Cayley trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Entropy ledger, entropy identities and mean entropy estimates.
    Entropy(Flags),
    /// Compatibility and marginal defects per level.
    Verify(Flags),
    /// π-matrices, peripheral spectra and correlation decay.
    Mixing(Flags),
    /// Mean entropy of the symmetric Ising state over a (beta, J) grid.
    Sweep(Flags),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, flags, defaults, run): (_, _, _, fn(&mut ModelSpec) -> anyhow::Result<commands::Outcome>) =
        match &cli.command {
            Command::Entropy(f) => ("entropy", f, Defaults { n_max: 3, tol: 1e-8 }, commands::entropy),
            Command::Verify(f) => ("verify", f, Defaults { n_max: 2, tol: 1e-9 }, commands::verify),
            Command::Mixing(f) => ("mixing", f, Defaults { n_max: 3, tol: 1e-9 }, commands::mixing),
            Command::Sweep(f) => ("sweep", f, Defaults { n_max: 24, tol: 1e-3 }, commands::sweep),
        };

    let mut spec = match ModelSpec::resolve(name, flags, defaults) {
        Ok(s) => s,
        Err(e) if e.downcast_ref::<MissingBranch>().is_some() => {
            let mut cmd = Cli::command();
            cmd.build();
            let sub = cmd.find_subcommand_mut(name).expect("subcommand exists");
            sub.error(ErrorKind::MissingRequiredArgument, e.to_string()).exit()
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };

    match run(&mut spec) {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            println!("wrote {}", commands::describe(&outcome.files));
            if outcome.passed {
                println!("{name}: PASS");
                ExitCode::SUCCESS
            } else {
                println!("{name}: FAIL");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
