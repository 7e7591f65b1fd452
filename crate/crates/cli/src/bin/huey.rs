//! The Huey shell: an interactive read-eval-print loop over stdin/stdout,
//! or with `--serve` a remote assistant answering routed requests.

use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::Parser;

use huey_cli::Config;
use huey_core::shell::{serve_handler, ResponseKind, Shell, BANNER, PROMPT};
use huey_core::vns::wire;

#[derive(Debug, Parser)]
#[command(name = "huey", about = "Huey voice assistant shell")]
struct Args {
    /// Directory holding the grammar (.bnf) files.
    #[arg(long)]
    grammar_dir: Option<PathBuf>,
    /// Rule table (rules.tsv) mapping parse heads to skill actions.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Address of the VNS root resolver.
    #[arg(long)]
    vns_endpoint: Option<String>,
    /// Start with trace output on, as if `:t` had been typed.
    #[arg(long)]
    trace: bool,
    /// Repeat each input line after the prompt, for piped sessions.
    #[arg(long)]
    echo: bool,
    /// Serve routed requests on this address instead of reading stdin.
    #[arg(long, value_name = "ADDR")]
    serve: Option<String>,
}

fn config(args: &Args) -> Result<Config> {
    let mut c = Config::load(args.config.as_deref(), std::env::vars()).context("configuration")?;
    if let Some(d) = &args.grammar_dir {
        c.grammar_dir = Some(d.clone());
    }
    if let Some(r) = &args.rules {
        c.rules_path = Some(r.clone());
    }
    if let Some(e) = &args.vns_endpoint {
        c.vns_root_endpoint = Some(e.clone());
    }
    c.trace |= args.trace;
    c.check_paths().context("configuration")?;
    Ok(c)
}

fn repl(c: &Config, echo: bool) -> Result<()> {
    let mut shell = Shell::new(c.shell_setup()?).context("starting the shell")?;
    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    writeln!(out, "{BANNER}")?;
    let mut lines = stdin.lock().lines();
    loop {
        write!(out, "{PROMPT}")?;
        out.flush()?;
        let Some(line) = lines.next() else {
            writeln!(out)?;
            return Ok(());
        };
        let line = line?;
        if echo {
            write!(out, "{line}")?;
        }
        writeln!(out)?;
        for r in shell.run_script([line.as_str()]) {
            if !r.text.is_empty() {
                writeln!(out, "{}", r.text)?;
            }
            if r.kind == ResponseKind::Quit {
                return Ok(());
            }
        }
    }
}

fn serve(c: &Config, addr: &str) -> Result<()> {
    // Fail fast on a bad setup rather than per session.
    Shell::new(c.shell_setup()?).context("starting the shell")?;
    let base = c.clone();
    let make = Arc::new(move |id: &str| {
        let mut c = base.clone();
        c.wake_required = false;
        c.session_id = id.to_string();
        let setup = c.shell_setup().expect("setup was validated at startup");
        Shell::new(setup).expect("setup was validated at startup")
    });
    let local = wire::spawn(addr, serve_handler(make)).with_context(|| format!("binding {addr}"))?;
    println!("huey serving on {local}");
    io::stdout().flush()?;
    loop {
        std::thread::park();
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = config(&args).and_then(|c| match &args.serve {
        Some(addr) => serve(&c, addr),
        None => repl(&c, args.echo),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("huey: {e:#}");
            ExitCode::FAILURE
        }
    }
}
