//! Voice Name System: a tiered registry mapping wake words to handler
//! endpoints, a caching resolver client with macros, and the text wire
//! protocol both speak.
//!
//! Resolution walks four tiers. The root tier refers a language to its
//! language server; the language server refers a greeting ("hey",
//! "hello", or the empty greeting) to a wake server; the wake server
//! refers a wake word to its owner's proprietary server; the proprietary
//! server answers with the full record.

pub mod client;
pub mod server;
pub mod stub;
pub mod wire;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cpf::CpfMode;
use crate::svc::PrivilegeLevel;

pub use client::{Hop, ResolutionChain, RouteReply, VnsClient};
pub use server::{Registry, VnsServer};
pub use wire::{Frame, WireError};

pub const DEFAULT_TTL_SECS: u64 = 300;
pub const DEFAULT_LANGUAGE: &str = "en";

/// Greetings the language tier classifies. The empty greeting stands for
/// a bare wake word.
pub const GREETINGS: [&str; 5] = ["", "hey", "hello", "hi", "ok"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tier {
    Root,
    Language,
    Wake,
    Proprietary,
}

impl Tier {
    pub const ALL: [Tier; 4] = [Tier::Root, Tier::Language, Tier::Wake, Tier::Proprietary];

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Root => "root",
            Tier::Language => "language",
            Tier::Wake => "wake",
            Tier::Proprietary => "proprietary",
        }
    }

    pub fn next(self) -> Option<Tier> {
        match self {
            Tier::Root => Some(Tier::Language),
            Tier::Language => Some(Tier::Wake),
            Tier::Wake => Some(Tier::Proprietary),
            Tier::Proprietary => None,
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tier {
    type Err = VnsError;
    fn from_str(s: &str) -> Result<Tier, VnsError> {
        Tier::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| VnsError::Protocol(format!("unknown tier {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VnsError {
    #[error("not found at the {0} tier")]
    NotFound(Tier),
    #[error("timed out at the {0} tier")]
    Timeout(Tier),
    #[error("{0} is already registered")]
    Conflict(String),
    #[error("not authorized")]
    Unauthorized,
    #[error("{0} is already a keyword or a registered wake word")]
    AliasCollision(String),
    #[error("no macro named {0}")]
    UnknownAlias(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("remote assistant unreachable: {0}")]
    RemoteUnreachable(String),
    #[error("registry file: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Broadcast {
    #[default]
    Direct,
    /// The caller filters requests through the privacy firewall first.
    Sanitized,
    Multiparty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Descriptor {
    #[serde(default)]
    pub broadcast: Broadcast,
    #[serde(default)]
    pub formats: Vec<String>,
    #[serde(default)]
    pub privacy: CpfMode,
    #[serde(default = "default_security")]
    pub security: PrivilegeLevel,
}

fn default_security() -> PrivilegeLevel {
    PrivilegeLevel::Anonymous
}

impl Default for Descriptor {
    fn default() -> Descriptor {
        Descriptor {
            broadcast: Broadcast::Direct,
            formats: vec!["text".into()],
            privacy: CpfMode::Off,
            security: PrivilegeLevel::Anonymous,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistryRecord {
    pub wake_word: String,
    pub language: String,
    pub owner: String,
    pub endpoint: String,
    pub descriptor: Descriptor,
    pub ttl_secs: u64,
}

impl RegistryRecord {
    pub fn new(wake_word: &str, owner: &str, endpoint: &str) -> RegistryRecord {
        RegistryRecord {
            wake_word: normalize_wake(wake_word),
            language: DEFAULT_LANGUAGE.into(),
            owner: owner.into(),
            endpoint: endpoint.into(),
            descriptor: Descriptor::default(),
            ttl_secs: DEFAULT_TTL_SECS,
        }
    }

    /// `language<TAB>wake_word<TAB>owner<TAB>endpoint<TAB>ttl<TAB>descriptor-json`
    pub fn to_tsv(&self) -> String {
        let desc = serde_json::to_string(&self.descriptor).expect("descriptor serializes");
        format!("{}\t{}\t{}\t{}\t{}\t{desc}", self.language, self.wake_word, self.owner, self.endpoint, self.ttl_secs)
    }

    pub fn from_tsv(line: &str) -> Result<RegistryRecord, VnsError> {
        let f: Vec<&str> = line.splitn(6, '\t').collect();
        let [language, wake, owner, endpoint, ttl, desc] = f.as_slice() else {
            return Err(VnsError::Protocol(format!("registry line needs 6 fields: {line:?}")));
        };
        let ttl_secs = ttl.trim().parse().map_err(|_| VnsError::Protocol(format!("bad ttl {ttl:?}")))?;
        let descriptor = if desc.trim().is_empty() {
            Descriptor::default()
        } else {
            serde_json::from_str(desc).map_err(|e| VnsError::Protocol(format!("bad descriptor: {e}")))?
        };
        if wake.trim().is_empty() || endpoint.trim().is_empty() {
            return Err(VnsError::Protocol("wake word and endpoint are required".into()));
        }
        Ok(RegistryRecord {
            wake_word: normalize_wake(wake),
            language: language.trim().to_lowercase(),
            owner: owner.trim().to_string(),
            endpoint: endpoint.trim().to_string(),
            descriptor,
            ttl_secs,
        })
    }
}

/// Wake words compare case-insensitively with collapsed spaces.
pub fn normalize_wake(w: &str) -> String {
    w.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_tsv_round_trip() {
        let mut r = RegistryRecord::new("Star  Market", "grocer", "127.0.0.1:7000");
        r.descriptor.broadcast = Broadcast::Sanitized;
        r.descriptor.privacy = CpfMode::StrongIncognito;
        let line = r.to_tsv();
        assert!(line.starts_with("en\tstar market\tgrocer\t127.0.0.1:7000\t300\t{"));
        assert_eq!(RegistryRecord::from_tsv(&line).unwrap(), r);
        assert!(RegistryRecord::from_tsv("en\tx").is_err());
    }

    #[test]
    fn tiers() {
        assert_eq!("wake".parse::<Tier>().unwrap(), Tier::Wake);
        assert_eq!(Tier::Wake.next(), Some(Tier::Proprietary));
        assert!("moon".parse::<Tier>().is_err());
    }
}
