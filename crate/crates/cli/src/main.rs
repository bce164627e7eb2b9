use std::process::ExitCode;

use clap::{Parser, Subcommand};

use prm_cli::{cmd_experiment, cmd_export, cmd_solve, summary_table, InstanceArgs, RunConfig, SolveArgs};

/// Planning with reduced models: solve benchmark instances and compare
/// reduced models by negative side effects, cost and planning time.
#[derive(Parser)]
#[command(name = "prm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one model of an instance and print V(s0).
    Solve(SolveArgs),
    /// Run seeded trials for several models and write CSV reports.
    Experiment(RunConfig),
    /// Print a built-in track map or a generated EV scenario.
    Export(InstanceArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => cmd_solve(&args).map(|s| print!("{}", s.render())),
        Command::Experiment(config) => cmd_experiment(&config).map(|r| print!("{}", summary_table(&r))),
        Command::Export(args) => cmd_export(&args).map(|text| print!("{text}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
