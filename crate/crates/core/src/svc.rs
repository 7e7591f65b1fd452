//! Secure voice channel: spoken login with an out-of-band code, a
//! challenge-question fallback, and time-limited privilege elevation.
//!
//! All operations take the current time in seconds so the machine stays
//! deterministic under test. Codes, tokens and challenge answers are held
//! only as SHA-256 hashes.

use std::collections::{HashSet, VecDeque};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use sha2::{Digest, Sha256};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrivilegeLevel {
    Anonymous,
    User,
    Elevated,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AuthState {
    LoggedOut,
    AwaitingCode { user: String, code_hash: String, expires_at: u64, attempts: u32 },
    AwaitingChallenge { user: String, question_id: usize, attempts: u32 },
    LoggedIn { user: String },
    AwaitingElevation { user: String, token_hash: String, expires_at: u64 },
    Elevated { user: String, until: u64 },
}

impl AuthState {
    pub fn user(&self) -> Option<&str> {
        match self {
            AuthState::LoggedOut => None,
            AuthState::AwaitingCode { user, .. }
            | AuthState::AwaitingChallenge { user, .. }
            | AuthState::LoggedIn { user }
            | AuthState::AwaitingElevation { user, .. }
            | AuthState::Elevated { user, .. } => Some(user),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AuthState::LoggedOut => "LoggedOut",
            AuthState::AwaitingCode { .. } => "AwaitingCode",
            AuthState::AwaitingChallenge { .. } => "AwaitingChallenge",
            AuthState::LoggedIn { .. } => "LoggedIn",
            AuthState::AwaitingElevation { .. } => "AwaitingElevation",
            AuthState::Elevated { .. } => "Elevated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SvcError {
    #[error("unknown user {0}")]
    UnknownUser(String),
    #[error("the code has expired, please log in again")]
    Expired,
    #[error("too many failed attempts, please log in again")]
    TooManyAttempts,
    #[error("that code is not correct, {remaining} attempts left")]
    WrongCode { remaining: u32 },
    #[error("that answer is not correct, {remaining} attempts left")]
    WrongAnswer { remaining: u32 },
    #[error("that token is not valid")]
    BadToken,
    #[error("you need to log in first")]
    NotLoggedIn,
    #[error("not expected in state {0}")]
    Protocol(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Allowed,
    NeedsElevation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SvcConfig {
    pub code_ttl_secs: u64,
    pub max_attempts: u32,
    pub elevation_window_secs: u64,
}

impl Default for SvcConfig {
    fn default() -> Self {
        SvcConfig { code_ttl_secs: 300, max_attempts: 3, elevation_window_secs: 120 }
    }
}

/// Out-of-band delivery of codes and elevation instructions.
pub trait Channel: Send {
    fn send(&mut self, user: &str, message: &str);
}

/// Appends `timestamp<TAB>user<TAB>message` lines to a file standing in for
/// the user's phone or secure message account.
#[derive(Debug, Clone)]
pub struct DeviceInbox {
    pub path: PathBuf,
}

impl Channel for DeviceInbox {
    fn send(&mut self, user: &str, message: &str) {
        let ts = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        if let Ok(mut f) = OpenOptions::new().create(true).append(true).open(&self.path) {
            let _ = writeln!(f, "{ts}\t{user}\t{}", message.replace(['\n', '\t'], " "));
        }
    }
}

/// In-memory inbox shared between clones; used by tests and the model check.
#[derive(Debug, Clone, Default)]
pub struct MemoryInbox {
    pub messages: Arc<Mutex<Vec<(String, String)>>>,
}

impl MemoryInbox {
    pub fn last_for(&self, user: &str) -> Option<String> {
        let m = self.messages.lock().expect("inbox lock");
        m.iter().rev().find(|(u, _)| u == user).map(|(_, msg)| msg.clone())
    }
}

impl Channel for MemoryInbox {
    fn send(&mut self, user: &str, message: &str) {
        self.messages.lock().expect("inbox lock").push((user.to_string(), message.to_string()));
    }
}

/// Where fresh codes and tokens come from.
#[derive(Debug, Clone)]
pub enum SecretSource {
    Random(Box<StdRng>),
    /// Always hands out the same code and token. For scripted dialogs.
    Fixed { code: String, token: String },
}

impl SecretSource {
    pub fn random() -> SecretSource {
        SecretSource::Random(Box::new(StdRng::from_entropy()))
    }

    fn code(&mut self) -> String {
        match self {
            SecretSource::Random(r) => format!("{:06}", r.gen_range(0..1_000_000u32)),
            SecretSource::Fixed { code, .. } => code.clone(),
        }
    }

    fn token(&mut self) -> String {
        match self {
            SecretSource::Random(r) => {
                const ALPHA: &[u8] = b"ABCDEFGHJKLMNPQRSTUVWXYZ23456789";
                (0..6).map(|_| ALPHA[r.gen_range(0..ALPHA.len())] as char).collect()
            }
            SecretSource::Fixed { token, .. } => token.clone(),
        }
    }
}

pub fn hash_secret(s: &str) -> String {
    hex::encode(Sha256::digest(s.as_bytes()))
}

fn normalize_answer(s: &str) -> String {
    s.split_whitespace().map(|w| w.to_lowercase()).collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserRecord {
    pub name: String,
    pub question: String,
    pub answer_hash: String,
}

impl UserRecord {
    pub fn new(name: &str, question: &str, answer: &str) -> UserRecord {
        UserRecord {
            name: name.to_lowercase(),
            question: question.to_string(),
            answer_hash: hash_secret(&normalize_answer(answer)),
        }
    }
}

pub const DEFAULT_QUESTION: &str = "Who was the last person you sent a voice message to and what day was it?";

pub fn default_users() -> Vec<UserRecord> {
    vec![
        UserRecord::new("alice", DEFAULT_QUESTION, "Bob on Tuesday"),
        UserRecord::new("harry", DEFAULT_QUESTION, "Sally on Monday"),
    ]
}

fn display_name(user: &str) -> String {
    let mut c = user.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// One session's authentication state machine.
pub struct Svc {
    pub config: SvcConfig,
    state: AuthState,
    users: Vec<UserRecord>,
    secrets: SecretSource,
    channel: Box<dyn Channel>,
}

impl Clone for Svc {
    fn clone(&self) -> Svc {
        // Clones share nothing but a fresh in-memory channel; only used by
        // the model check, which never reads the messages.
        Svc {
            config: self.config,
            state: self.state.clone(),
            users: self.users.clone(),
            secrets: self.secrets.clone(),
            channel: Box::new(MemoryInbox::default()),
        }
    }
}

impl Svc {
    pub fn new(config: SvcConfig, users: Vec<UserRecord>, secrets: SecretSource, channel: Box<dyn Channel>) -> Svc {
        Svc { config, state: AuthState::LoggedOut, users, secrets, channel }
    }

    pub fn state(&self) -> &AuthState {
        &self.state
    }

    fn user(&self, name: &str) -> Option<&UserRecord> {
        self.users.iter().find(|u| u.name == name)
    }

    /// Apply time-based transitions: elevation windows close and pending
    /// elevation tokens lapse.
    pub fn tick(&mut self, now: u64) {
        match &self.state {
            AuthState::Elevated { user, until } if now >= *until => {
                self.state = AuthState::LoggedIn { user: user.clone() };
            }
            AuthState::AwaitingElevation { user, expires_at, .. } if now >= *expires_at => {
                self.state = AuthState::LoggedIn { user: user.clone() };
            }
            _ => {}
        }
    }

    pub fn level(&mut self, now: u64) -> PrivilegeLevel {
        self.tick(now);
        match self.state {
            AuthState::Elevated { .. } => PrivilegeLevel::Elevated,
            AuthState::LoggedIn { .. } | AuthState::AwaitingElevation { .. } => PrivilegeLevel::User,
            _ => PrivilegeLevel::Anonymous,
        }
    }

    pub fn begin_login(&mut self, user: &str, now: u64) -> Result<String, SvcError> {
        self.tick(now);
        let name = user.to_lowercase();
        if matches!(self.state, AuthState::LoggedIn { .. } | AuthState::Elevated { .. } | AuthState::AwaitingElevation { .. }) {
            return Ok("You are already logged in.".to_string());
        }
        let rec = self.user(&name).ok_or_else(|| SvcError::UnknownUser(name.clone()))?;
        let name = rec.name.clone();
        let code = self.secrets.code();
        self.channel.send(&name, &format!("Your Huey login code is {code}"));
        self.state = AuthState::AwaitingCode {
            user: name.clone(),
            code_hash: hash_secret(&code),
            expires_at: now + self.config.code_ttl_secs,
            attempts: 0,
        };
        Ok(format!(
            "Hello {}. Please provide the 6 digit code I just sent to your mobile phone.",
            display_name(&name)
        ))
    }

    fn fail_attempt(&mut self, attempts: u32, wrong: impl Fn(u32) -> SvcError) -> SvcError {
        let used = attempts + 1;
        if used >= self.config.max_attempts {
            self.state = AuthState::LoggedOut;
            return SvcError::TooManyAttempts;
        }
        match &mut self.state {
            AuthState::AwaitingCode { attempts, .. } | AuthState::AwaitingChallenge { attempts, .. } => *attempts = used,
            _ => {}
        }
        wrong(self.config.max_attempts - used)
    }

    pub fn submit_code(&mut self, code: &str, now: u64) -> Result<String, SvcError> {
        let AuthState::AwaitingCode { user, code_hash, expires_at, attempts } = self.state.clone() else {
            return Err(SvcError::Protocol(self.state.name()));
        };
        if now >= expires_at {
            self.state = AuthState::LoggedOut;
            return Err(SvcError::Expired);
        }
        if hash_secret(code.trim()) == code_hash {
            self.state = AuthState::LoggedIn { user: user.clone() };
            return Ok(format!("Thank you {}, you are now logged in.", display_name(&user)));
        }
        Err(self.fail_attempt(attempts, |remaining| SvcError::WrongCode { remaining }))
    }

    pub fn fallback_challenge(&mut self, now: u64) -> Result<String, SvcError> {
        let AuthState::AwaitingCode { user, expires_at, attempts, .. } = self.state.clone() else {
            return Err(SvcError::Protocol(self.state.name()));
        };
        if now >= expires_at {
            self.state = AuthState::LoggedOut;
            return Err(SvcError::Expired);
        }
        let question_id = self.users.iter().position(|u| u.name == user).expect("user checked at login");
        let q = self.users[question_id].question.clone();
        self.state = AuthState::AwaitingChallenge { user, question_id, attempts };
        Ok(format!("OK, here is a challenge question.\n{q}"))
    }

    pub fn answer_challenge(&mut self, answer: &str) -> Result<String, SvcError> {
        let AuthState::AwaitingChallenge { user, question_id, attempts } = self.state.clone() else {
            return Err(SvcError::Protocol(self.state.name()));
        };
        if hash_secret(&normalize_answer(answer)) == self.users[question_id].answer_hash {
            self.state = AuthState::LoggedIn { user: user.clone() };
            return Ok(format!("Thank you {}, you are now logged in.", display_name(&user)));
        }
        Err(self.fail_attempt(attempts, |remaining| SvcError::WrongAnswer { remaining }))
    }

    /// Decide whether an action needing `required` may run. When elevation
    /// is needed a token is sent out of band right away.
    pub fn request_privileged(&mut self, required: PrivilegeLevel, now: u64) -> Result<Decision, SvcError> {
        let have = self.level(now);
        if required <= have {
            return Ok(Decision::Allowed);
        }
        let user = match &self.state {
            AuthState::LoggedIn { user } | AuthState::AwaitingElevation { user, .. } => user.clone(),
            _ => return Err(SvcError::NotLoggedIn),
        };
        let token = self.secrets.token();
        self.channel.send(
            &user,
            &format!(
                "To elevate your Huey session, reply with the token {token} within {} minutes.",
                self.config.code_ttl_secs.div_ceil(60)
            ),
        );
        self.state = AuthState::AwaitingElevation {
            user,
            token_hash: hash_secret(&token),
            expires_at: now + self.config.code_ttl_secs,
        };
        Ok(Decision::NeedsElevation(
            "The requested action requires additional privileges.\nWould you like to elevate now?".to_string(),
        ))
    }

    /// The user's yes/no reply to the elevation offer.
    pub fn confirm_elevation(&mut self, yes: bool, now: u64) -> Result<String, SvcError> {
        self.tick(now);
        let AuthState::AwaitingElevation { user, .. } = self.state.clone() else {
            return Err(SvcError::Protocol(self.state.name()));
        };
        if yes {
            Ok("Please follow the instructions I sent to your secure message account just now.".to_string())
        } else {
            self.state = AuthState::LoggedIn { user };
            Ok("OK, not elevating.".to_string())
        }
    }

    pub fn elevate(&mut self, token: &str, now: u64) -> Result<String, SvcError> {
        let AuthState::AwaitingElevation { user, token_hash, expires_at } = self.state.clone() else {
            return Err(SvcError::BadToken);
        };
        if now >= expires_at {
            self.state = AuthState::LoggedIn { user };
            return Err(SvcError::Expired);
        }
        if hash_secret(token.trim()) != token_hash {
            return Err(SvcError::BadToken);
        }
        let until = now + self.config.elevation_window_secs;
        self.state = AuthState::Elevated { user, until };
        Ok(format!("Privileges elevated for {} seconds.", self.config.elevation_window_secs))
    }

    pub fn logout(&mut self) {
        self.state = AuthState::LoggedOut;
    }
}

/// Events explored by the model check. The `Ok` variants are the
/// credential events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Event {
    BeginLogin,
    CodeOk,
    CodeBad,
    NoPhone,
    AnswerOk,
    AnswerBad,
    RequestElevated,
    Decline,
    TokenOk,
    TokenBad,
    Wait,
    Logout,
}

impl Event {
    pub const ALL: [Event; 12] = [
        Event::BeginLogin,
        Event::CodeOk,
        Event::CodeBad,
        Event::NoPhone,
        Event::AnswerOk,
        Event::AnswerBad,
        Event::RequestElevated,
        Event::Decline,
        Event::TokenOk,
        Event::TokenBad,
        Event::Wait,
        Event::Logout,
    ];

    pub fn is_credential(self) -> bool {
        matches!(self, Event::CodeOk | Event::AnswerOk | Event::TokenOk)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelReport {
    pub states: usize,
    pub transitions: usize,
    /// Fewest successful credential events on any path reaching Elevated.
    pub min_credentials_to_elevated: Option<usize>,
    /// Longest time observed inside one elevation.
    pub max_elevated_secs: u64,
    pub truncated: bool,
}

/// Breadth-first enumeration of every state reachable from LoggedOut under
/// all event sequences. Time is abstracted to the remaining lifetime of the
/// current code, token or elevation, with `Wait` advancing by `step` secs.
pub fn model_check(config: SvcConfig, step: u64, max_states: usize) -> ModelReport {
    let secrets = SecretSource::Fixed { code: "111111".into(), token: "TOKEN1".into() };
    let start = Svc::new(config, default_users(), secrets, Box::new(MemoryInbox::default()));
    // Abstract key: state shape with times made relative to `now`, plus the
    // credential count so far (capped; beyond 2 it no longer matters).
    fn key(s: &Svc, now: u64, creds: usize) -> (String, usize) {
        let shape = match s.state() {
            AuthState::LoggedOut => "out".to_string(),
            AuthState::AwaitingCode { expires_at, attempts, .. } => format!("code:{}:{attempts}", expires_at.saturating_sub(now)),
            AuthState::AwaitingChallenge { attempts, .. } => format!("chal:{attempts}"),
            AuthState::LoggedIn { .. } => "in".to_string(),
            AuthState::AwaitingElevation { expires_at, .. } => format!("tok:{}", expires_at.saturating_sub(now)),
            AuthState::Elevated { until, .. } => format!("up:{}", until.saturating_sub(now)),
        };
        (shape, creds.min(3))
    }
    let mut seen: HashSet<(String, usize)> = HashSet::new();
    let mut queue: VecDeque<(Svc, u64, usize, Option<u64>)> = VecDeque::new();
    let mut report = ModelReport { states: 0, transitions: 0, min_credentials_to_elevated: None, max_elevated_secs: 0, truncated: false };
    seen.insert(key(&start, 0, 0));
    queue.push_back((start, 0, 0, None));
    while let Some((svc, now, creds, elevated_since)) = queue.pop_front() {
        report.states += 1;
        if report.states >= max_states {
            report.truncated = true;
            break;
        }
        for ev in Event::ALL {
            let mut s = svc.clone();
            let mut t = now;
            let ok = match ev {
                Event::BeginLogin => s.begin_login("alice", t).is_ok(),
                Event::CodeOk => s.submit_code("111111", t).is_ok(),
                Event::CodeBad => s.submit_code("000000", t).is_ok(),
                Event::NoPhone => s.fallback_challenge(t).is_ok(),
                Event::AnswerOk => s.answer_challenge("bob on tuesday").is_ok(),
                Event::AnswerBad => s.answer_challenge("nobody").is_ok(),
                Event::RequestElevated => s.request_privileged(PrivilegeLevel::Elevated, t).is_ok(),
                Event::Decline => s.confirm_elevation(false, t).is_ok(),
                Event::TokenOk => s.elevate("TOKEN1", t).is_ok(),
                Event::TokenBad => s.elevate("WRONG1", t).is_ok(),
                Event::Wait => {
                    t += step;
                    s.tick(t);
                    true
                }
                Event::Logout => {
                    s.logout();
                    true
                }
            };
            report.transitions += 1;
            let c = if ok && ev.is_credential() { creds + 1 } else { creds };
            let since = match (s.state(), elevated_since) {
                (AuthState::Elevated { .. }, Some(since)) => Some(since),
                (AuthState::Elevated { .. }, None) => Some(t),
                _ => None,
            };
            if let Some(since) = since {
                report.max_elevated_secs = report.max_elevated_secs.max(t - since);
                report.min_credentials_to_elevated = Some(report.min_credentials_to_elevated.map_or(c, |m| m.min(c)));
            }
            if seen.insert(key(&s, t, c)) {
                queue.push_back((s, t, c, since));
            }
        }
    }
    report
}
