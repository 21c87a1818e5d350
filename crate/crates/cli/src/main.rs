mod args;
mod commands;
mod context;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::context::Context;

/// Environment variable holding the worker thread count.
const THREADS_ENV: &str = "ADAFFECT_THREADS";

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| anyhow::anyhow!("{THREADS_ENV} must be a positive integer, got `{raw}`"))?;
    if n == 0 {
        anyhow::bail!("{THREADS_ENV} must be a positive integer, got `{raw}`");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads()?;
    let ctx = Context::new(cli.seed, cli.config.as_deref())?;
    match cli.command {
        Command::Agreement(a) => commands::agreement(&ctx, a),
        Command::ExtractAv(a) => commands::extract_av(&ctx, a),
        Command::PreprocessEeg(a) => commands::preprocess_eeg(&ctx, a),
        Command::Train(a) => commands::train(&ctx, a),
        Command::Evaluate(a) => commands::evaluate(&ctx, a),
        Command::Fuse(a) => commands::fuse(&ctx, a),
        Command::ScoreAds(a) => commands::score_ads(&ctx, a),
        Command::Schedule(a) => commands::schedule(&ctx, a),
        Command::Synth(a) => commands::synth(&ctx, a),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors and 0 for --help/--version.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("adaffect: error: {msg}");
            ExitCode::from(1)
        }
    }
}
