//! Flat `key = value` configuration with `HUEY_` environment overrides.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use chrono::{DateTime, Datelike};
use thiserror::Error;

use huey_core::cpf::{CpfMode, SentimentLexicon};
use huey_core::grammar::GrammarSource;
use huey_core::jak::{DEFAULT_RULES, DEFAULT_SLOTS};
use huey_core::shell::{default_stores, parse_stores, ShellOptions, ShellSetup};
use huey_core::skills::ShoppingStore;
use huey_core::svc::{Channel, DeviceInbox, SecretSource, SvcConfig};
use huey_core::vns::VnsClient;

pub const ENV_PREFIX: &str = "HUEY_";

/// Every accepted key. Environment variables use the upper-cased key with
/// dots replaced by underscores, e.g. `HUEY_SVC_CODE_TTL_SECS`.
pub const KEYS: [&str; 19] = [
    "grammar_dir",
    "rules_path",
    "slots_path",
    "lexicon_path",
    "stores_path",
    "store_dir",
    "vns_root_endpoint",
    "session_year",
    "session_id",
    "cpf_mode",
    "trace",
    "wake.required",
    "wake.idle_secs",
    "svc.enabled",
    "svc.device_user",
    "svc.code_ttl_secs",
    "svc.max_attempts",
    "svc.elevation_window_secs",
    "svc.inbox_path",
];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("line {line}: expected key = value")]
    Syntax { line: usize },
    #[error("unknown configuration key {0}")]
    UnknownKey(String),
    #[error("bad value for {key}: {value:?}")]
    BadValue { key: String, value: String },
    #[error("{key}: path {path} does not exist")]
    MissingPath { key: String, path: String },
    #[error("{0}")]
    Load(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    pub grammar_dir: Option<PathBuf>,
    pub rules_path: Option<PathBuf>,
    pub slots_path: Option<PathBuf>,
    pub lexicon_path: Option<PathBuf>,
    pub stores_path: Option<PathBuf>,
    pub store_dir: Option<PathBuf>,
    pub vns_root_endpoint: Option<String>,
    pub session_year: i32,
    pub session_id: String,
    pub cpf_mode: CpfMode,
    pub trace: bool,
    pub wake_required: bool,
    pub wake_idle_secs: u64,
    pub svc_enabled: bool,
    pub device_user: Option<String>,
    pub svc: SvcConfig,
    pub inbox_path: Option<PathBuf>,
}

pub fn current_year() -> i32 {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    DateTime::from_timestamp(secs as i64, 0).map(|d| d.year()).unwrap_or(2020)
}

impl Default for Config {
    fn default() -> Config {
        let opts = ShellOptions::default();
        Config {
            grammar_dir: None,
            rules_path: None,
            slots_path: None,
            lexicon_path: None,
            stores_path: None,
            store_dir: None,
            vns_root_endpoint: None,
            session_year: current_year(),
            session_id: opts.session_id,
            cpf_mode: opts.cpf,
            trace: false,
            wake_required: opts.wake_required,
            wake_idle_secs: opts.wake_idle_secs,
            svc_enabled: false,
            device_user: None,
            svc: SvcConfig::default(),
            inbox_path: None,
        }
    }
}

/// Split a config file into key/value pairs. `#` starts a comment line.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1 });
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn env_key(var: &str) -> Option<&'static str> {
    let suffix = var.strip_prefix(ENV_PREFIX)?;
    KEYS.iter().copied().find(|k| k.replace('.', "_").eq_ignore_ascii_case(suffix))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(ConfigError::BadValue { key: key.into(), value: v.into() }),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| ConfigError::BadValue { key: key.into(), value: v.into() })
}

fn opt_string(v: &str) -> Option<String> {
    (!v.is_empty()).then(|| v.to_string())
}

impl Config {
    /// Read an optional file, then apply `HUEY_*` variables from `env`.
    /// Unknown keys in either source are errors, as are missing paths.
    pub fn load(file: Option<&Path>, env: impl IntoIterator<Item = (String, String)>) -> Result<Config, ConfigError> {
        let mut pairs = BTreeMap::new();
        if let Some(path) = file {
            let text = fs::read_to_string(path)
                .map_err(|e| ConfigError::Io { path: path.display().to_string(), reason: e.to_string() })?;
            for (k, v) in parse_pairs(&text)? {
                if !KEYS.contains(&k.as_str()) {
                    return Err(ConfigError::UnknownKey(k));
                }
                pairs.insert(k, v);
            }
        }
        for (var, v) in env {
            if !var.starts_with(ENV_PREFIX) {
                continue;
            }
            let key = env_key(&var).ok_or_else(|| ConfigError::UnknownKey(var.clone()))?;
            pairs.insert(key.to_string(), v);
        }
        let mut c = Config::default();
        for (k, v) in &pairs {
            c.set(k, v)?;
        }
        c.check_paths()?;
        Ok(c)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        let path = |v: &str| opt_string(v).map(PathBuf::from);
        match key {
            "grammar_dir" => self.grammar_dir = path(v),
            "rules_path" => self.rules_path = path(v),
            "slots_path" => self.slots_path = path(v),
            "lexicon_path" => self.lexicon_path = path(v),
            "stores_path" => self.stores_path = path(v),
            "store_dir" => self.store_dir = path(v),
            "vns_root_endpoint" => self.vns_root_endpoint = opt_string(v),
            "session_year" => self.session_year = parse_num(key, v)?,
            "session_id" => self.session_id = v.to_string(),
            "cpf_mode" => {
                self.cpf_mode = CpfMode::parse(v).ok_or_else(|| ConfigError::BadValue { key: key.into(), value: v.into() })?
            }
            "trace" => self.trace = parse_bool(key, v)?,
            "wake.required" => self.wake_required = parse_bool(key, v)?,
            "wake.idle_secs" => self.wake_idle_secs = parse_num(key, v)?,
            "svc.enabled" => self.svc_enabled = parse_bool(key, v)?,
            "svc.device_user" => self.device_user = opt_string(v),
            "svc.code_ttl_secs" => self.svc.code_ttl_secs = parse_num(key, v)?,
            "svc.max_attempts" => self.svc.max_attempts = parse_num(key, v)?,
            "svc.elevation_window_secs" => self.svc.elevation_window_secs = parse_num(key, v)?,
            "svc.inbox_path" => self.inbox_path = path(v),
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Input paths must exist. The inbox is written, so only its parent
    /// directory has to.
    pub fn check_paths(&self) -> Result<(), ConfigError> {
        let inputs = [
            ("grammar_dir", &self.grammar_dir),
            ("rules_path", &self.rules_path),
            ("slots_path", &self.slots_path),
            ("lexicon_path", &self.lexicon_path),
            ("stores_path", &self.stores_path),
            ("store_dir", &self.store_dir),
        ];
        for (key, p) in inputs {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(ConfigError::MissingPath { key: key.into(), path: p.display().to_string() });
                }
            }
        }
        if let Some(p) = &self.inbox_path {
            let parent = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
            if !parent.is_dir() {
                return Err(ConfigError::MissingPath { key: "svc.inbox_path".into(), path: p.display().to_string() });
            }
        }
        Ok(())
    }

    pub fn options(&self) -> ShellOptions {
        ShellOptions {
            trace: self.trace,
            cpf: self.cpf_mode,
            svc_enabled: self.svc_enabled,
            device_user: self.device_user.clone(),
            session_year: self.session_year,
            wake_required: self.wake_required,
            wake_idle_secs: self.wake_idle_secs,
            session_id: self.session_id.clone(),
            ..ShellOptions::default()
        }
    }

    /// Assemble everything a shell needs, reading the configured files.
    pub fn shell_setup(&self) -> Result<ShellSetup, ConfigError> {
        let read = |p: &Path| {
            fs::read_to_string(p).map_err(|e| ConfigError::Io { path: p.display().to_string(), reason: e.to_string() })
        };
        let grammar_source = match &self.grammar_dir {
            Some(d) => GrammarSource::Dir(d.clone()),
            None => GrammarSource::Embedded,
        };
        let rules = match &self.rules_path {
            Some(p) => read(p)?,
            None => DEFAULT_RULES.to_string(),
        };
        let slots = match &self.slots_path {
            Some(p) => read(p)?,
            None => DEFAULT_SLOTS.to_string(),
        };
        let lexicon = match &self.lexicon_path {
            Some(p) => SentimentLexicon::load(p).map_err(|e| ConfigError::Load(e.to_string()))?,
            None => SentimentLexicon::default_lexicon(),
        };
        let stores = match &self.stores_path {
            Some(p) => parse_stores(&read(p)?),
            None => default_stores(),
        };
        let store = match &self.store_dir {
            Some(d) => ShoppingStore::open(d).map_err(|e| ConfigError::Load(e.to_string()))?,
            None => ShoppingStore::new(),
        };
        let channel: Box<dyn Channel> = match &self.inbox_path {
            Some(p) => Box::new(DeviceInbox { path: p.clone() }),
            None => Box::new(StderrChannel),
        };
        Ok(ShellSetup {
            grammar_source,
            stores,
            rules,
            slots,
            lexicon,
            store,
            options: self.options(),
            vns: self.vns_root_endpoint.as_deref().map(VnsClient::new),
            svc_config: self.svc,
            secrets: SecretSource::random(),
            channel,
            ..ShellSetup::default()
        })
    }
}

/// Out-of-band messages shown on stderr when no inbox file is configured.
#[derive(Debug, Clone, Copy)]
pub struct StderrChannel;

impl Channel for StderrChannel {
    fn send(&mut self, user: &str, message: &str) {
        let _ = writeln!(std::io::stderr(), "[message to {user}] {message}");
    }
}
