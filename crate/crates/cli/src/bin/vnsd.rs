//! The VNS resolver daemon. One process can host any subset of the four
//! tiers; referrals to tiers hosted elsewhere go to `--peer` addresses.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context, Result};
use clap::Parser;

use huey_core::vns::{Registry, Tier, VnsServer};

#[derive(Debug, Parser)]
#[command(name = "vnsd", about = "Voice Name System resolver")]
struct Args {
    /// TCP port to listen on; 0 picks a free port.
    #[arg(long, default_value_t = 5380)]
    port: u16,
    /// Interface to bind.
    #[arg(long, default_value = "127.0.0.1")]
    bind: String,
    /// TSV registry file, created on first registration if missing.
    #[arg(long)]
    registry_file: Option<PathBuf>,
    /// Comma-separated tiers to host: root, language, wake, proprietary.
    #[arg(long, default_value = "root,language,wake,proprietary")]
    tiers: String,
    /// Where another tier lives, as TIER=HOST:PORT. Repeatable.
    #[arg(long = "peer", value_name = "TIER=ADDR")]
    peers: Vec<String>,
}

fn parse_tiers(s: &str) -> Result<BTreeSet<Tier>> {
    let tiers = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<Tier>().map_err(|e| anyhow!("{e}")))
        .collect::<Result<BTreeSet<_>>>()?;
    if tiers.is_empty() {
        return Err(anyhow!("no tiers given"));
    }
    Ok(tiers)
}

fn parse_peers(peers: &[String]) -> Result<BTreeMap<Tier, String>> {
    peers
        .iter()
        .map(|p| {
            let (t, addr) = p.split_once('=').ok_or_else(|| anyhow!("peer {p:?} is not TIER=ADDR"))?;
            Ok((t.trim().parse::<Tier>().map_err(|e| anyhow!("{e}"))?, addr.trim().to_string()))
        })
        .collect()
}

fn run(args: &Args) -> Result<()> {
    let tiers = parse_tiers(&args.tiers)?;
    let peers = parse_peers(&args.peers)?;
    let registry = match &args.registry_file {
        Some(p) => Registry::open(p).with_context(|| format!("loading {}", p.display()))?,
        None => Registry::new(),
    };
    let server = Arc::new(VnsServer::new(registry, tiers, peers));
    let addr = format!("{}:{}", args.bind, args.port);
    let local = server.spawn(&addr).with_context(|| format!("binding {addr}"))?;
    println!("vnsd listening on {local}");
    std::io::stdout().flush()?;
    loop {
        std::thread::park();
    }
}

fn main() -> ExitCode {
    match run(&Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vnsd: {e:#}");
            ExitCode::FAILURE
        }
    }
}
