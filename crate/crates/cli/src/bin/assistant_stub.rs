//! A stand-in third-party assistant with canned forecast and briefing
//! answers, for exercising VNS routing end to end.

use std::io::Write;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::Parser;

use huey_core::vns::stub::StubAssistant;
use huey_core::vns::wire;

#[derive(Debug, Parser)]
#[command(name = "assistant-stub", about = "Canned remote assistant")]
struct Args {
    /// TCP port to listen on; 0 picks a free port.
    #[arg(long, default_value_t = 5390)]
    port: u16,
    /// Interface to bind.
    #[arg(long, default_value = "127.0.0.1")]
    bind: String,
    /// Name the assistant answers to.
    #[arg(long, default_value = "alexa")]
    name: String,
}

fn run(args: &Args) -> Result<()> {
    let stub = Arc::new(StubAssistant::new(&args.name));
    let addr = format!("{}:{}", args.bind, args.port);
    let local = wire::spawn(&addr, stub.handler()).with_context(|| format!("binding {addr}"))?;
    println!("{} listening on {local}", args.name);
    std::io::stdout().flush()?;
    loop {
        std::thread::park();
    }
}

fn main() -> ExitCode {
    match run(&Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("assistant-stub: {e:#}");
            ExitCode::FAILURE
        }
    }
}
