mod args;
mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use config::RunConfig;
use error::{usage, Result};

fn run(cli: Cli) -> Result<()> {
    let cmd = &cli.command;
    let mut cfg = RunConfig::load(cmd.common().config.as_deref())?;
    cmd.apply(&mut cfg);
    cfg.validate()?;

    let threads = match cmd.common().threads {
        Some(0) | None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        Some(n) => n,
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(usage)?;
    if !matches!(cmd, Command::BudgetGrid(_)) {
        output::echo_config(cmd.name(), &cfg);
    }

    pool.install(|| match cmd {
        Command::Influence(a) => commands::influence(a, &cfg, threads == 1),
        Command::Embed(a) => commands::embed(a, &cfg),
        Command::Simulate(a) => commands::simulate(a, &cfg),
        Command::BudgetGrid(a) => commands::budget_grid(a, &mut cfg),
        Command::FitNoise(a) => commands::fit_noise(a, &cfg),
        Command::NoiseCurve(a) => commands::noise_curve(a, &cfg),
        Command::Rank(a) => commands::rank(a, &cfg),
        Command::Eval(a) => commands::eval(a, &cfg),
        Command::Serve(a) => commands::serve(a, &cfg),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
