//! The resolver side: a registry plus the tiers this process hosts.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use super::wire::{Frame, Handler};
use super::{normalize_wake, RegistryRecord, Tier, VnsError, GREETINGS};

#[derive(Debug, Clone, Default)]
pub struct Registry {
    records: BTreeMap<(String, String), RegistryRecord>,
    file: Option<PathBuf>,
}

impl Registry {
    pub fn new() -> Registry {
        Registry::default()
    }

    /// Load a TSV registry file; a missing file starts empty and is
    /// created on the first registration.
    pub fn open(path: &Path) -> Result<Registry, VnsError> {
        let mut reg = Registry { records: BTreeMap::new(), file: Some(path.to_path_buf()) };
        if path.exists() {
            let text = fs::read_to_string(path).map_err(|e| VnsError::Io(e.to_string()))?;
            for line in text.lines() {
                if line.trim().is_empty() || line.starts_with('#') {
                    continue;
                }
                let r = RegistryRecord::from_tsv(line)?;
                reg.records.insert((r.language.clone(), r.wake_word.clone()), r);
            }
        }
        Ok(reg)
    }

    pub fn records(&self) -> impl Iterator<Item = &RegistryRecord> {
        self.records.values()
    }

    pub fn get(&self, language: &str, wake: &str) -> Option<&RegistryRecord> {
        self.records.get(&(language.to_string(), normalize_wake(wake)))
    }

    pub fn register(&mut self, record: RegistryRecord) -> Result<(), VnsError> {
        let key = (record.language.clone(), record.wake_word.clone());
        if self.records.contains_key(&key) {
            return Err(VnsError::Conflict(record.wake_word));
        }
        self.records.insert(key, record);
        self.persist()
    }

    pub fn deregister(&mut self, language: &str, wake: &str, owner: &str) -> Result<RegistryRecord, VnsError> {
        let key = (language.to_string(), normalize_wake(wake));
        match self.records.get(&key) {
            None => Err(VnsError::NotFound(Tier::Proprietary)),
            Some(r) if r.owner != owner => Err(VnsError::Unauthorized),
            Some(_) => {
                let r = self.records.remove(&key).expect("checked above");
                self.persist()?;
                Ok(r)
            }
        }
    }

    fn persist(&self) -> Result<(), VnsError> {
        let Some(path) = &self.file else { return Ok(()) };
        let mut text = String::from("# language\twake_word\towner\tendpoint\tttl\tdescriptor\n");
        for r in self.records.values() {
            text.push_str(&r.to_tsv());
            text.push('\n');
        }
        fs::write(path, text).map_err(|e| VnsError::Io(e.to_string()))
    }

    fn has_language(&self, language: &str) -> bool {
        self.records.keys().any(|(l, _)| l == language)
    }
}

/// A resolver process. It answers for the tiers it hosts and refers the
/// others to peers, or to itself when no peer is configured.
pub struct VnsServer {
    pub registry: Mutex<Registry>,
    pub tiers: BTreeSet<Tier>,
    pub peers: BTreeMap<Tier, String>,
    pub identity: String,
    advertise: Mutex<String>,
    started: Instant,
}

fn error_frame(e: &VnsError) -> Frame {
    let (code, tier) = match e {
        VnsError::NotFound(t) => ("not-found", Some(*t)),
        VnsError::Timeout(t) => ("timeout", Some(*t)),
        VnsError::Conflict(_) => ("conflict", None),
        VnsError::Unauthorized => ("unauthorized", None),
        VnsError::AliasCollision(_) | VnsError::UnknownAlias(_) => ("bad-request", None),
        VnsError::Protocol(_) => ("protocol", None),
        VnsError::RemoteUnreachable(_) => ("unreachable", None),
        VnsError::Io(_) => ("io", None),
    };
    let f = Frame::error(code, &e.to_string());
    match tier {
        Some(t) => f.with("tier", t.as_str()),
        None => f,
    }
}

impl VnsServer {
    pub fn new(registry: Registry, tiers: BTreeSet<Tier>, peers: BTreeMap<Tier, String>) -> VnsServer {
        VnsServer {
            registry: Mutex::new(registry),
            tiers,
            peers,
            identity: "vnsd".into(),
            advertise: Mutex::new(String::new()),
            started: Instant::now(),
        }
    }

    /// A server hosting every tier.
    pub fn all_tiers(registry: Registry) -> VnsServer {
        VnsServer::new(registry, Tier::ALL.into_iter().collect(), BTreeMap::new())
    }

    /// The address this server gives out in referrals to tiers it hosts.
    pub fn set_advertised(&self, endpoint: &str) {
        *self.advertise.lock().expect("advertise lock") = endpoint.to_string();
    }

    pub fn handler(self: &Arc<Self>) -> Handler {
        let me = Arc::clone(self);
        Arc::new(move |f| me.handle(&f))
    }

    /// Bind, advertise the bound address and serve in the background.
    pub fn spawn(self: &Arc<Self>, addr: &str) -> std::io::Result<std::net::SocketAddr> {
        let listener = std::net::TcpListener::bind(addr)?;
        let local = listener.local_addr()?;
        self.set_advertised(&local.to_string());
        let h = self.handler();
        std::thread::spawn(move || super::wire::serve(listener, h));
        Ok(local)
    }

    pub fn handle(&self, req: &Frame) -> Frame {
        let result = match req.get("verb") {
            Some("resolve") => self.resolve(req),
            Some("register") => self.register(req),
            Some("deregister") => self.deregister(req),
            Some("ping") => Ok(self.ping()),
            Some(v) => Err(VnsError::Protocol(format!("unsupported verb {v:?}"))),
            None => Err(VnsError::Protocol("missing verb".into())),
        };
        result.unwrap_or_else(|e| error_frame(&e))
    }

    fn ping(&self) -> Frame {
        let tiers: Vec<&str> = self.tiers.iter().map(|t| t.as_str()).collect();
        let body = format!(
            "server:{}\nuptime:{}\ntiers:{}",
            self.identity,
            self.started.elapsed().as_secs(),
            tiers.join(",")
        );
        Frame::ok().body(&body)
    }

    fn endpoint_for(&self, tier: Tier) -> String {
        self.peers.get(&tier).cloned().unwrap_or_else(|| self.advertise.lock().expect("advertise lock").clone())
    }

    fn referral(&self, tier: Tier, server: &str) -> Frame {
        Frame::ok()
            .with("answer", "referral")
            .with("tier", tier.as_str())
            .with("server", server)
            .with("endpoint", &self.endpoint_for(tier))
    }

    fn resolve(&self, req: &Frame) -> Result<Frame, VnsError> {
        let tier: Tier = req.get("tier").ok_or_else(|| VnsError::Protocol("missing tier".into()))?.parse()?;
        if !self.tiers.contains(&tier) {
            return Err(VnsError::Protocol(format!("{tier} tier is not hosted here")));
        }
        let server = req.get("server").unwrap_or("");
        let key = req.get("key").unwrap_or("").to_lowercase();
        let reg = self.registry.lock().expect("registry lock");
        match tier {
            Tier::Root => {
                if !reg.has_language(&key) {
                    return Err(VnsError::NotFound(Tier::Root));
                }
                Ok(self.referral(Tier::Language, &format!("lang/{key}")))
            }
            Tier::Language => {
                let lang = server.strip_prefix("lang/").ok_or(VnsError::NotFound(Tier::Language))?;
                if !reg.has_language(lang) || !GREETINGS.contains(&key.as_str()) {
                    return Err(VnsError::NotFound(Tier::Language));
                }
                Ok(self.referral(Tier::Wake, &format!("wake/{lang}/{key}")))
            }
            Tier::Wake => {
                let lang = server
                    .strip_prefix("wake/")
                    .and_then(|s| s.split('/').next())
                    .ok_or(VnsError::NotFound(Tier::Wake))?;
                let r = reg.get(lang, &key).ok_or(VnsError::NotFound(Tier::Wake))?;
                Ok(self.referral(Tier::Proprietary, &format!("prop/{}/{}", r.owner, lang)))
            }
            Tier::Proprietary => {
                let rest = server.strip_prefix("prop/").ok_or(VnsError::NotFound(Tier::Proprietary))?;
                let (owner, lang) = rest.rsplit_once('/').ok_or(VnsError::NotFound(Tier::Proprietary))?;
                let r = reg
                    .get(lang, &key)
                    .filter(|r| r.owner == owner)
                    .ok_or(VnsError::NotFound(Tier::Proprietary))?;
                Ok(Frame::ok().with("answer", "record").body(&r.to_tsv()))
            }
        }
    }

    fn register(&self, req: &Frame) -> Result<Frame, VnsError> {
        let user = req.get("user").ok_or(VnsError::Unauthorized)?;
        let record = RegistryRecord::from_tsv(req.body.trim_end())?;
        if record.owner != user {
            return Err(VnsError::Unauthorized);
        }
        self.registry.lock().expect("registry lock").register(record)?;
        self.propagate(req)?;
        Ok(Frame::ok())
    }

    /// Pass a registry change on to every peer so the tiers they host see
    /// the same records.
    fn propagate(&self, req: &Frame) -> Result<(), VnsError> {
        let peers: BTreeSet<&String> = self.peers.values().collect();
        for endpoint in peers {
            let resp = super::wire::round_trip(endpoint, req, super::wire::DEFAULT_TIMEOUT)
                .map_err(|e| VnsError::RemoteUnreachable(e.to_string()))?;
            if let Err((code, body)) = resp.status() {
                return Err(VnsError::Protocol(format!("peer {endpoint}: {code}: {body}")));
            }
        }
        Ok(())
    }

    fn deregister(&self, req: &Frame) -> Result<Frame, VnsError> {
        let user = req.get("user").ok_or(VnsError::Unauthorized)?;
        let lang = req.get("lang").unwrap_or(super::DEFAULT_LANGUAGE);
        let wake = req.get("key").ok_or_else(|| VnsError::Protocol("missing key".into()))?;
        self.registry.lock().expect("registry lock").deregister(lang, wake, user)?;
        self.propagate(req)?;
        Ok(Frame::ok())
    }
}
