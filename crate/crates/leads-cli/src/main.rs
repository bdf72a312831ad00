//! Command-line front end: train a skill set, validate the tabular oracles,
//! or summarize a finished run.

mod oracle;
mod report;
mod train;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "leads",
    version,
    about = "Skill discovery via successor state measures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a skill set and populate a run directory.
    Train(train::TrainArgs),
    /// Validate the tabular oracles and print each check.
    OracleCheck(oracle::OracleArgs),
    /// Summarize a run directory and regenerate its field maps.
    Report(report::ReportArgs),
}

/// Rewrite `--hp.<name> <value>` and `--hp.<name>=<value>` into the
/// canonical `--hp <name>=<value>` so every hyperparameter is addressable
/// as a flag without declaring one clap argument per field.
fn normalize_hp_args(argv: Vec<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(argv.len());
    let mut iter = argv.into_iter();
    while let Some(arg) = iter.next() {
        let Some(rest) = arg.strip_prefix("--hp.") else {
            out.push(arg);
            continue;
        };
        out.push("--hp".into());
        if rest.contains('=') {
            out.push(rest.into());
        } else if let Some(value) = iter.next() {
            out.push(format!("{rest}={value}"));
        } else {
            // Trailing name without a value: pass the bare name through and
            // let the NAME=VALUE parser produce the error message.
            out.push(rest.into());
        }
    }
    out
}

fn main() -> anyhow::Result<()> {
    let argv = normalize_hp_args(std::env::args().collect());
    match Cli::parse_from(argv).command {
        Command::Train(args) => train::cmd_train(args),
        Command::OracleCheck(args) => oracle::cmd_oracle_check(args),
        Command::Report(args) => report::cmd_report(args),
    }
}
