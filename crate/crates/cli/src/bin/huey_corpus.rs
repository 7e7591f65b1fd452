//! Replay a golden corpus through a fresh shell and report differences.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use huey_cli::{parse_corpus, run_corpus, Config};
use huey_core::shell::Shell;
use huey_core::skills::ShoppingStore;

#[derive(Debug, Parser)]
#[command(name = "huey-corpus", about = "Golden corpus runner")]
struct Args {
    /// Corpus file: input<TAB>sexpr|response<TAB>expected.
    corpus: PathBuf,
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for share links and capability tokens, so output is stable.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Year given to dates spoken without one.
    #[arg(long, default_value_t = 2020)]
    session_year: i32,
}

fn run(args: &Args) -> Result<bool> {
    let text = std::fs::read_to_string(&args.corpus).with_context(|| format!("reading {}", args.corpus.display()))?;
    let cases = parse_corpus(&text)?;
    let config = Config::load(args.config.as_deref(), std::env::vars()).context("configuration")?;
    let mut setup = config.shell_setup()?;
    setup.options.session_year = args.session_year;
    setup.store = ShoppingStore::with_seed(args.seed);
    let mut shell = Shell::new(setup).context("starting the shell")?;
    let report = run_corpus(&mut shell, &cases);
    print!("{report}");
    Ok(report.passed())
}

fn main() -> ExitCode {
    match run(&Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("huey-corpus: {e:#}");
            ExitCode::from(2)
        }
    }
}
