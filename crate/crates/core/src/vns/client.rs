//! Resolver client with a TTL cache, macro aliases and an ownership
//! default. Clones share one cache.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use super::wire::{round_trip, Frame, WireError, DEFAULT_TIMEOUT};
use super::{normalize_wake, RegistryRecord, Tier, VnsError, DEFAULT_LANGUAGE};
use crate::cpf::CpfMode;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hop {
    pub tier: Tier,
    pub server: String,
    pub endpoint: String,
    pub answer: String,
}

/// The audited walk behind one resolution. A cache hit has no hops.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ResolutionChain {
    pub hops: Vec<Hop>,
    pub cached: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteReply {
    pub body: String,
    pub endpoint: String,
}

#[derive(Debug, Clone)]
struct CacheEntry {
    record: RegistryRecord,
    expires_at: u64,
}

#[derive(Debug, Default)]
struct ClientState {
    cache: HashMap<(String, String), CacheEntry>,
    macros: BTreeMap<String, RegistryRecord>,
    default: Option<RegistryRecord>,
    network_requests: u64,
}

#[derive(Debug, Clone)]
pub struct VnsClient {
    pub root: String,
    pub timeout: Duration,
    state: Arc<Mutex<ClientState>>,
}

fn wire_err(tier: Tier, e: WireError) -> VnsError {
    match e {
        WireError::Timeout(_) => VnsError::Timeout(tier),
        WireError::Unreachable { endpoint, reason } => VnsError::RemoteUnreachable(format!("{endpoint}: {reason}")),
        WireError::Protocol(m) => VnsError::Protocol(m),
        WireError::Closed => VnsError::Protocol("connection closed".into()),
    }
}

fn status_err(frame: &Frame, fallback: Tier) -> Option<VnsError> {
    let (code, body) = frame.status().err()?;
    let tier = frame.get("tier").and_then(|t| t.parse().ok()).unwrap_or(fallback);
    Some(match code.as_str() {
        "not-found" => VnsError::NotFound(tier),
        "timeout" => VnsError::Timeout(tier),
        "conflict" => VnsError::Conflict(body),
        "unauthorized" => VnsError::Unauthorized,
        _ => VnsError::Protocol(format!("{code}: {body}")),
    })
}

impl VnsClient {
    pub fn new(root: &str) -> VnsClient {
        VnsClient { root: root.to_string(), timeout: DEFAULT_TIMEOUT, state: Arc::new(Mutex::new(ClientState::default())) }
    }

    fn state(&self) -> std::sync::MutexGuard<'_, ClientState> {
        self.state.lock().expect("vns client lock")
    }

    /// Requests this client (and its clones) has sent over the network.
    pub fn network_requests(&self) -> u64 {
        self.state().network_requests
    }

    fn send(&self, endpoint: &str, req: &Frame, tier: Tier) -> Result<Frame, VnsError> {
        self.state().network_requests += 1;
        round_trip(endpoint, req, self.timeout).map_err(|e| wire_err(tier, e))
    }

    /// Resolve a wake word, serving from cache while the record's TTL lasts.
    pub fn resolve(&self, wake: &str, language: &str, attn: Option<&str>, now: u64) -> Result<(RegistryRecord, ResolutionChain), VnsError> {
        let key = (language.to_lowercase(), normalize_wake(wake));
        {
            let mut st = self.state();
            match st.cache.get(&key) {
                Some(e) if now < e.expires_at => {
                    return Ok((e.record.clone(), ResolutionChain { hops: Vec::new(), cached: true }));
                }
                Some(_) => {
                    st.cache.remove(&key);
                }
                None => {}
            }
        }
        let (record, chain) = self.resolve_fresh(wake, language, attn)?;
        self.state()
            .cache
            .insert(key, CacheEntry { record: record.clone(), expires_at: now + record.ttl_secs });
        Ok((record, chain))
    }

    /// Walk root, language, wake and proprietary tiers without the cache.
    pub fn resolve_fresh(&self, wake: &str, language: &str, attn: Option<&str>) -> Result<(RegistryRecord, ResolutionChain), VnsError> {
        let wake = normalize_wake(wake);
        let language = language.to_lowercase();
        let attn = attn.map(str::to_lowercase).unwrap_or_default();
        let mut chain = ResolutionChain::default();
        let mut tier = Tier::Root;
        let mut server = "root".to_string();
        let mut endpoint = self.root.clone();
        loop {
            let key = match tier {
                Tier::Root => language.as_str(),
                Tier::Language => attn.as_str(),
                Tier::Wake | Tier::Proprietary => wake.as_str(),
            };
            let req = Frame::request("resolve")
                .with("tier", tier.as_str())
                .with("server", &server)
                .with("key", key)
                .with("lang", &language);
            let resp = self.send(&endpoint, &req, tier)?;
            if let Some(e) = status_err(&resp, tier) {
                return Err(e);
            }
            let answer = resp.get("answer").unwrap_or("").to_string();
            chain.hops.push(Hop { tier, server: server.clone(), endpoint: endpoint.clone(), answer: answer.clone() });
            match answer.as_str() {
                "record" if tier == Tier::Proprietary => {
                    return Ok((RegistryRecord::from_tsv(resp.body.trim_end())?, chain));
                }
                "referral" => {
                    let next: Tier = resp.get("tier").unwrap_or("").parse()?;
                    if Some(next) != tier.next() {
                        return Err(VnsError::Protocol(format!("{tier} referred to {next}")));
                    }
                    tier = next;
                    server = resp.get("server").unwrap_or("").to_string();
                    endpoint = resp.get("endpoint").unwrap_or("").to_string();
                }
                other => return Err(VnsError::Protocol(format!("unexpected answer {other:?} from {tier}"))),
            }
        }
    }

    pub fn invalidate(&self) {
        self.state().cache.clear();
    }

    pub fn register(&self, record: &RegistryRecord, user: &str) -> Result<(), VnsError> {
        let req = Frame::request("register").with("user", user).body(&record.to_tsv());
        let resp = self.send(&self.root, &req, Tier::Proprietary)?;
        status_err(&resp, Tier::Proprietary).map_or(Ok(()), Err)?;
        self.invalidate();
        Ok(())
    }

    pub fn deregister(&self, wake: &str, language: &str, user: &str) -> Result<(), VnsError> {
        let req = Frame::request("deregister").with("user", user).with("lang", language).with("key", &normalize_wake(wake));
        let resp = self.send(&self.root, &req, Tier::Proprietary)?;
        status_err(&resp, Tier::Proprietary).map_or(Ok(()), Err)?;
        self.invalidate();
        Ok(())
    }

    pub fn ping(&self, endpoint: &str) -> Result<String, VnsError> {
        let resp = self.send(endpoint, &Frame::request("ping"), Tier::Root)?;
        status_err(&resp, Tier::Root).map_or(Ok(resp.body), Err)
    }

    /// Pair an alias with a resolved wake word so later use needs no
    /// network. The alias must not be a grammar keyword or a registered
    /// wake word.
    pub fn macro_pair(&self, alias: &str, wake: &str, now: u64, is_keyword: &dyn Fn(&str) -> bool) -> Result<RegistryRecord, VnsError> {
        let alias = normalize_wake(alias);
        if alias.is_empty() || alias == "all" || alias.split(' ').any(is_keyword) {
            return Err(VnsError::AliasCollision(alias));
        }
        match self.resolve_fresh(&alias, DEFAULT_LANGUAGE, None) {
            Ok(_) => return Err(VnsError::AliasCollision(alias)),
            Err(VnsError::NotFound(_)) => {}
            Err(e) => return Err(e),
        }
        let (record, _) = self.resolve(wake, DEFAULT_LANGUAGE, None, now)?;
        self.state().macros.insert(alias, record.clone());
        Ok(record)
    }

    pub fn macro_delete(&self, alias: &str) -> Result<(), VnsError> {
        let alias = normalize_wake(alias);
        self.state().macros.remove(&alias).map(|_| ()).ok_or(VnsError::UnknownAlias(alias))
    }

    pub fn macro_reset(&self) {
        self.state().macros.clear();
    }

    /// Describe one pairing, or every pairing for "all".
    pub fn macro_define(&self, alias: &str) -> Result<String, VnsError> {
        let alias = normalize_wake(alias);
        let st = self.state();
        let line = |a: &str, r: &RegistryRecord| format!("{a} -> {} at {}", r.wake_word, r.endpoint);
        if alias == "all" {
            return Ok(st.macros.iter().map(|(a, r)| line(a, r)).collect::<Vec<_>>().join("\n"));
        }
        st.macros.get(&alias).map(|r| line(&alias, r)).ok_or(VnsError::UnknownAlias(alias))
    }

    /// A paired alias, answered locally.
    pub fn lookup_alias(&self, alias: &str) -> Option<RegistryRecord> {
        self.state().macros.get(&normalize_wake(alias)).cloned()
    }

    /// Make `brand` the default destination for unprefixed commands.
    pub fn set_ownership(&self, brand: &str, now: u64) -> Result<RegistryRecord, VnsError> {
        let (record, _) = self.resolve(brand, DEFAULT_LANGUAGE, None, now)?;
        self.state().default = Some(record.clone());
        Ok(record)
    }

    pub fn ownership(&self) -> Option<RegistryRecord> {
        self.state().default.clone()
    }

    pub fn clear_ownership(&self) {
        self.state().default = None;
    }

    /// Forward request text to a handler endpoint.
    pub fn route(&self, endpoint: &str, session: &str, privacy: CpfMode, body: &str) -> Result<RouteReply, VnsError> {
        remote_request(endpoint, session, privacy, body, self.timeout)
    }
}

pub fn remote_request(endpoint: &str, session: &str, privacy: CpfMode, body: &str, timeout: Duration) -> Result<RouteReply, VnsError> {
    let req = Frame::request("route")
        .with("session", session)
        .with("lang", DEFAULT_LANGUAGE)
        .with("privacy", &privacy.to_string())
        .body(body);
    let resp = round_trip(endpoint, &req, timeout).map_err(|e| match e {
        WireError::Protocol(m) => VnsError::Protocol(m),
        other => VnsError::RemoteUnreachable(other.to_string()),
    })?;
    match resp.status() {
        Ok(()) => Ok(RouteReply { body: resp.body, endpoint: endpoint.to_string() }),
        Err((code, body)) => Err(VnsError::Protocol(format!("{code}: {body}"))),
    }
}
