//! The interactive shell: a prioritized handler chain over one session's
//! frame, an input stack for compound requests, and routing of a session
//! to local interpreters or remote assistants.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::cpf::{CpfMode, Firewall, LexiconError, SentimentLexicon};
use crate::grammar::{parse_text, GrammarLoadError, GrammarSource, Grammars, ParseResult, SetName};
use crate::jak::{execute, CompileError, Compiler, EngineRegistry, JakError, DEFAULT_RULES, DEFAULT_SLOTS};
use crate::sexpr::{extract, leaves_text, print_canonical, SExpr};
use crate::skills::sheet::Sheet;
use crate::skills::{register_skills, SheetEngine, ShoppingEngine, ShoppingStore};
use crate::svc::{default_users, AuthState, Channel, Decision, MemoryInbox, PrivilegeLevel, SecretSource, Svc, SvcConfig, SvcError, UserRecord};
use crate::jak::SkillKind;
use crate::vns::wire::{Frame as WireFrame, Handler as WireHandler};
use crate::vns::{normalize_wake, Broadcast, RegistryRecord, VnsClient, VnsError, DEFAULT_LANGUAGE};

pub const PROMPT: &str = "huey> ";
pub const BANNER: &str = "Huey Shell\nVersion 1.0\nCopyright 2020 MIT.\nMIT License.\nType :h to get help, :q to quit";
pub const DEFAULT_STORES: &str = include_str!("../data/stores.txt");

const HELP: &str = "\
Meta commands:
  :h          this help
  :q          quit
  :t          toggle trace output
  :f          show the conversation frame
  :o FILE     open a CSV file as the current sheet
Session:
  login NAME, logout, quit
Routing:
  connect to NAME, switch back, disconnect
  pair WAKE to ALIAS, define ALIAS, define all, delete ALIAS, reset
  ownership BRAND, ping
Anything else is parsed as a shopping, spreadsheet or message request.";

const ATTN: [&str; 4] = ["hey", "ok", "hello", "hi"];

/// Rules whose first leaf is reported as the frame's last verb.
const VERB_RULES: [&str; 18] = [
    "connect", "add", "del", "purge", "sort", "merge", "sel", "create", "share", "save", "print", "bye", "imp", "login",
    "search", "buy", "select_column", "sum_formula",
];

#[derive(Debug, Error)]
pub enum ShellError {
    #[error(transparent)]
    Grammar(#[from] GrammarLoadError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error("unknown meta command {0}, type :h for help")]
    UnknownMetaCommand(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseKind {
    Ok,
    Error,
    Quit,
}

/// What one input line produced. Empty text prints nothing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub text: String,
    pub kind: ResponseKind,
}

impl Response {
    pub fn ok(text: impl Into<String>) -> Response {
        Response { text: text.into(), kind: ResponseKind::Ok }
    }

    pub fn error(text: impl Into<String>) -> Response {
        Response { text: text.into(), kind: ResponseKind::Error }
    }

    pub fn is_error(&self) -> bool {
        self.kind == ResponseKind::Error
    }
}

impl fmt::Display for Response {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Conversational state shown by `:f`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub awake: bool,
    pub interpreter: String,
    pub last_command: String,
    pub last_verb: Option<String>,
    pub last_object: Option<String>,
    /// What "it" refers to in follow-up requests such as "sum it".
    pub selection: Option<String>,
}

impl Default for Frame {
    fn default() -> Frame {
        Frame {
            awake: false,
            interpreter: SkillKind::Vns.interpreter().to_string(),
            last_command: String::new(),
            last_verb: None,
            last_object: None,
            selection: None,
        }
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "FRAME")?;
        writeln!(f, "Awake: {}", self.awake)?;
        writeln!(f, "Interpreter: {}", self.interpreter)?;
        writeln!(f, "Last command: {}", self.last_command)?;
        if let Some(v) = &self.last_verb {
            writeln!(f, "Last verb: {v}")?;
        }
        if let Some(o) = &self.last_object {
            writeln!(f, "Last object: {o}")?;
        }
        Ok(())
    }
}

/// Seconds since the epoch, or a hand-driven value for tests.
#[derive(Debug, Clone)]
pub enum Clock {
    System,
    Manual(Arc<AtomicU64>),
}

impl Clock {
    pub fn manual(start: u64) -> Clock {
        Clock::Manual(Arc::new(AtomicU64::new(start)))
    }

    pub fn now(&self) -> u64 {
        match self {
            Clock::System => std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            Clock::Manual(t) => t.load(Ordering::SeqCst),
        }
    }

    /// Move a manual clock forward. No effect on the system clock.
    pub fn advance(&self, secs: u64) {
        if let Clock::Manual(t) = self {
            t.fetch_add(secs, Ordering::SeqCst);
        }
    }
}

#[derive(Debug, Clone)]
pub struct ShellOptions {
    pub trace: bool,
    pub cpf: CpfMode,
    pub svc_enabled: bool,
    /// The device owner, logged in by a bare wake phrase when SVC is on.
    pub device_user: Option<String>,
    pub session_year: i32,
    pub wake_required: bool,
    pub wake_idle_secs: u64,
    pub session_id: String,
    /// The shell's own wake word. Prefixing a request with it handles the
    /// request locally even inside a routed session.
    pub own_name: String,
}

impl Default for ShellOptions {
    fn default() -> ShellOptions {
        ShellOptions {
            trace: false,
            cpf: CpfMode::Off,
            svc_enabled: false,
            device_user: None,
            session_year: 2020,
            wake_required: true,
            wake_idle_secs: 60,
            session_id: "local".into(),
            own_name: "huey".into(),
        }
    }
}

/// Everything a shell is built from.
pub struct ShellSetup {
    pub grammar_source: GrammarSource,
    pub stores: Vec<String>,
    pub rules: String,
    pub slots: String,
    pub lexicon: SentimentLexicon,
    pub store: ShoppingStore,
    pub options: ShellOptions,
    pub vns: Option<VnsClient>,
    pub svc_config: SvcConfig,
    pub users: Vec<UserRecord>,
    pub secrets: SecretSource,
    pub channel: Box<dyn Channel>,
    pub clock: Clock,
}

pub fn default_stores() -> Vec<String> {
    parse_stores(DEFAULT_STORES)
}

/// One store name per line; blank lines and `#` comments are skipped.
pub fn parse_stores(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

impl Default for ShellSetup {
    fn default() -> ShellSetup {
        ShellSetup {
            grammar_source: GrammarSource::Embedded,
            stores: default_stores(),
            rules: DEFAULT_RULES.into(),
            slots: DEFAULT_SLOTS.into(),
            lexicon: SentimentLexicon::default_lexicon(),
            store: ShoppingStore::new(),
            options: ShellOptions::default(),
            vns: None,
            svc_config: SvcConfig::default(),
            users: default_users(),
            secrets: SecretSource::random(),
            channel: Box::new(MemoryInbox::default()),
            clock: Clock::System,
        }
    }
}

/// One line of user input, pre-split into lowercased words.
#[derive(Debug, Clone)]
pub struct Input {
    pub raw: String,
    pub words: Vec<String>,
}

impl Input {
    pub fn new(raw: &str) -> Input {
        let words = raw
            .split_whitespace()
            .map(|w| w.trim_matches(|c: char| matches!(c, ',' | '.' | '!' | '?' | ';' | ':')).to_lowercase())
            .filter(|w| !w.is_empty())
            .collect();
        Input { raw: raw.trim().to_string(), words }
    }
}

/// Where the session's input goes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Route {
    pub name: String,
    /// None for an assistant served by this shell.
    pub record: Option<RegistryRecord>,
}

#[derive(Debug, Clone)]
struct PendingElevation {
    input: String,
    confirmed: bool,
}

/// A handler in the priority chain.
pub trait Handler: Sync {
    fn name(&self) -> &'static str;
    fn can_handle(&self, sh: &Shell, input: &Input) -> bool;
    fn handle(&self, sh: &mut Shell, input: &Input) -> Response;
}

struct GlobalHandler;
struct HelpHandler;
struct DebugHandler;
struct WakeHandler;
struct VnsHandler;
struct PeekHandler;
struct SkillHandler;
struct CatchAllHandler;

/// The chain, highest priority first.
pub static HANDLERS: [&dyn Handler; 8] =
    [&GlobalHandler, &HelpHandler, &DebugHandler, &WakeHandler, &VnsHandler, &PeekHandler, &SkillHandler, &CatchAllHandler];

pub struct Shell {
    grammars: Grammars,
    compiler: Compiler,
    firewall: Firewall,
    engines: EngineRegistry,
    svc: Svc,
    vns: Option<VnsClient>,
    clock: Clock,
    pub options: ShellOptions,
    frame: Frame,
    stack: VecDeque<String>,
    user: Option<String>,
    route: Option<Route>,
    previous_route: Option<Route>,
    pending: Option<PendingElevation>,
    last_activity: u64,
}

fn set_for(skill: SkillKind) -> SetName {
    match skill {
        SkillKind::Vns | SkillKind::Messages => SetName::RootVns,
        SkillKind::Shopping => SetName::RootShop,
        SkillKind::Sheet => SetName::RootExpense,
    }
}

fn first_child_head(node: &SExpr) -> Option<&str> {
    node.children().first().filter(|c| c.is_node()).map(SExpr::head)
}

/// A parse that only matched because `item` swallows any words after an
/// optional wake word, as in "blarg blarg". A cell assignment with neither
/// "set" nor a linking verb counts too, since any two words fit it.
pub fn is_catch_all(tree: &SExpr) -> bool {
    if extract(tree, "set_cell").iter().any(|c| is_bare_assignment(c)) {
        return true;
    }
    if tree.contains_head("stmt") || tree.contains_head("connect") || tree.contains_head("skill_remote") {
        return false;
    }
    let others = extract(tree, "meta_other");
    let Some(m) = others.first() else { return false };
    extract(m, "assistant").first().is_some_and(|a| first_child_head(a) == Some("item"))
}

fn is_bare_assignment(set_cell: &SExpr) -> bool {
    !set_cell.children().iter().any(|c| c.head() == "set" || c.head() == "to_be")
}

/// A parse holding nothing but a wake phrase, as in "hi huey".
pub fn is_bare_meta(tree: &SExpr) -> bool {
    tree.children().len() == 1 && tree.children()[0].head() == "meta"
}

fn yes_no(words: &[String]) -> Option<bool> {
    match words.first().map(String::as_str) {
        Some("yes" | "yeah" | "yep" | "sure" | "ok" | "okay") => Some(true),
        Some("no" | "nope" | "cancel") => Some(false),
        _ => None,
    }
}

impl Shell {
    pub fn new(setup: ShellSetup) -> Result<Shell, ShellError> {
        let grammars = Grammars::load(&setup.grammar_source, Some(&setup.stores))?;
        let compiler = Compiler::from_text(&setup.rules, &setup.slots)?;
        for g in &grammars.sets {
            setup.lexicon.validate(g)?;
        }
        let mut engines = EngineRegistry::new();
        register_skills(&mut engines, setup.store, setup.options.session_year);
        let svc = Svc::new(setup.svc_config, setup.users, setup.secrets, setup.channel);
        Ok(Shell {
            grammars,
            compiler,
            firewall: Firewall::new(setup.lexicon),
            engines,
            svc,
            vns: setup.vns,
            clock: setup.clock,
            options: setup.options,
            frame: Frame::default(),
            stack: VecDeque::new(),
            user: None,
            route: None,
            previous_route: None,
            pending: None,
            last_activity: 0,
        })
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn engines(&self) -> &EngineRegistry {
        &self.engines
    }

    pub fn engines_mut(&mut self) -> &mut EngineRegistry {
        &mut self.engines
    }

    pub fn svc(&self) -> &Svc {
        &self.svc
    }

    pub fn vns(&self) -> Option<&VnsClient> {
        self.vns.as_ref()
    }

    pub fn clock(&self) -> &Clock {
        &self.clock
    }

    pub fn route(&self) -> Option<&Route> {
        self.route.as_ref()
    }

    pub fn user(&self) -> Option<&str> {
        self.user.as_deref()
    }

    pub fn grammars(&self) -> &Grammars {
        &self.grammars
    }

    /// Requests queued by compound splitting, not yet run.
    pub fn pending_inputs(&self) -> usize {
        self.stack.len()
    }

    pub fn pop_input(&mut self) -> Option<String> {
        self.stack.pop_front()
    }

    fn now(&self) -> u64 {
        self.clock.now()
    }

    /// Grammar sets in search order: the active interpreter's first.
    fn set_order(&self) -> Vec<SetName> {
        let active = [SkillKind::Vns, SkillKind::Shopping, SkillKind::Sheet, SkillKind::Messages]
            .into_iter()
            .find(|k| k.interpreter() == self.frame.interpreter)
            .map(set_for)
            .unwrap_or(SetName::RootVns);
        let mut order = vec![active];
        order.extend(SetName::ALL.into_iter().filter(|n| *n != active));
        order
    }

    /// The preferred parse of `text`: the first set giving a parse that is
    /// not a catch-all, else the same search over the text with a leading
    /// wake phrase removed, else the first catch-all parse.
    pub fn parse_best(&self, text: &str) -> Option<ParseResult> {
        let mut fallback = None;
        if let Some(r) = self.parse_meaningful(text, &mut fallback) {
            return Some(r);
        }
        let words = Input::new(text).words;
        let rest = self.strip_meta(&words);
        if rest.len() < words.len() && !rest.is_empty() {
            let mut ignored = None;
            if let Some(r) = self.parse_meaningful(&rest.join(" "), &mut ignored) {
                return Some(r);
            }
        }
        fallback
    }

    fn parse_meaningful(&self, text: &str, fallback: &mut Option<ParseResult>) -> Option<ParseResult> {
        for name in self.set_order() {
            if let Ok(r) = parse_text(self.grammars.get(name), text) {
                if !is_catch_all(&r.tree) {
                    return Some(r);
                }
                fallback.get_or_insert(r);
            }
        }
        None
    }

    fn wake_words(&self) -> Vec<String> {
        self.grammars.get(SetName::RootVns).literal_alternatives("wake").unwrap_or_default()
    }

    fn is_local_assistant(&self, name: &str) -> bool {
        self.wake_words().iter().any(|w| w == name)
    }

    /// Length of a leading wake phrase (attention word plus wake word or
    /// paired alias), or None.
    fn meta_len(&self, words: &[String]) -> Option<usize> {
        let skip = usize::from(words.first().is_some_and(|w| ATTN.contains(&w.as_str())));
        let w = words.get(skip)?;
        if self.is_local_assistant(w) {
            return Some(skip + 1);
        }
        self.alias_len(&words[skip..]).map(|n| skip + n)
    }

    fn alias_len(&self, words: &[String]) -> Option<usize> {
        let vns = self.vns.as_ref()?;
        (1..=words.len().min(3)).rev().find(|&n| vns.lookup_alias(&words[..n].join(" ")).is_some())
    }

    fn starts_with_meta(&self, words: &[String]) -> bool {
        self.meta_len(words).is_some()
    }

    /// Words after a leading wake phrase, if any.
    fn strip_meta<'a>(&self, words: &'a [String]) -> &'a [String] {
        match self.meta_len(words) {
            Some(n) if words.get(..n).is_some_and(|m| m.iter().all(|w| ATTN.contains(&w.as_str()) || self.is_local_assistant(w))) => {
                &words[n..]
            }
            _ => words,
        }
    }

    /// Process one line through the handler chain.
    pub fn repl_step(&mut self, line: &str) -> Response {
        let input = Input::new(line);
        if input.raw.is_empty() {
            return Response::ok("");
        }
        let now = self.now();
        if self.frame.awake && self.options.wake_idle_secs > 0 && now >= self.last_activity + self.options.wake_idle_secs {
            self.frame.awake = false;
        }
        if !input.raw.starts_with(':') {
            self.frame.last_command = input.raw.clone();
        }
        let handler = HANDLERS.iter().find(|h| h.can_handle(self, &input)).expect("the catch-all accepts everything");
        let response = handler.handle(self, &input);
        if self.starts_with_meta(&input.words) && handler.name() != "global" {
            self.frame.awake = true;
        }
        if self.frame.awake {
            self.last_activity = now;
        }
        response
    }

    /// Run `lines` in order, draining split requests after each one.
    pub fn run_script<'a>(&mut self, lines: impl IntoIterator<Item = &'a str>) -> Vec<Response> {
        let mut out = Vec::new();
        for line in lines {
            out.push(self.repl_step(line));
            while let Some(next) = self.pop_input() {
                out.push(self.repl_step(&next));
            }
        }
        out
    }

    /// Split a compound request into its sub-requests. Splits happen only
    /// at an "and" where both sides parse as requests in their own right.
    pub fn peek_split(&self, line: &str) -> Vec<String> {
        let input = Input::new(line);
        let whole = self.parse_best(line);
        let compound_tree = whole.as_ref().is_some_and(|r| {
            r.tree.contains_head("tell_assistant_compound") || extract(&r.tree, "stmt_shop").len() >= 2
        });
        if whole.as_ref().is_some_and(|r| !is_catch_all(&r.tree)) && !compound_tree {
            return vec![input.raw];
        }
        let raw: Vec<&str> = input.raw.split_whitespace().collect();
        let meaningful = |text: &str| self.parse_best(text).is_some_and(|r| !is_catch_all(&r.tree) && !is_bare_meta(&r.tree));
        for (i, w) in raw.iter().enumerate() {
            if !w.eq_ignore_ascii_case("and") || i == 0 || i + 1 == raw.len() {
                continue;
            }
            let left = raw[..i].join(" ");
            let right = raw[i + 1..].join(" ");
            if meaningful(&left) {
                let mut rest = self.peek_split(&right);
                if rest.iter().all(|r| meaningful(r)) {
                    rest.insert(0, left);
                    return rest;
                }
            }
        }
        vec![input.raw]
    }

    fn trace_tree(&self, text: String, tree: &SExpr) -> String {
        if self.options.trace {
            format!("{text}\n{}", print_canonical(tree))
        } else {
            text
        }
    }

    fn note_tree(&mut self, tree: &SExpr) {
        let verb = VERB_RULES
            .iter()
            .find_map(|r| extract(tree, r).first().and_then(|n| n.leaves().first().map(|s| s.to_string())));
        self.frame.last_verb = verb;
        self.frame.last_object = extract(tree, "item").first().map(|n| leaves_text(n));
    }

    fn privilege_level(&mut self) -> PrivilegeLevel {
        if self.options.svc_enabled {
            let now = self.now();
            self.svc.level(now)
        } else {
            PrivilegeLevel::User
        }
    }

    /// Filter, compile and execute a parsed skill request.
    pub fn dispatch_skill(&mut self, raw: &str, tree: &SExpr, skill: SkillKind) -> Response {
        let filtered = self.firewall.filter(tree, self.options.cpf);
        let program = match self.compiler.compile(&filtered.filtered, skill) {
            Ok(p) => p,
            Err(e) => return Response::error(format!("Error: {e}")),
        };
        let now = self.now();
        if let Some(shop) = self.engines.engine_mut::<ShoppingEngine>("shoppingHandler") {
            shop.now = now;
        }
        let level = self.privilege_level();
        match execute(&program, &mut self.engines, level) {
            Ok(result) => {
                self.frame.interpreter = skill.interpreter().to_string();
                self.note_tree(tree);
                if let Some(sel) = ["select_column", "select_rows"].iter().find_map(|h| extract(tree, h).first().copied()) {
                    self.frame.selection = Some(leaves_text(sel));
                }
                let text = match (skill, result.response.is_empty()) {
                    (_, true) => "[OK]".to_string(),
                    (_, false) => format!("[OK]\n{}", result.response),
                };
                Response::ok(self.trace_tree(text, tree))
            }
            Err(JakError::PrivilegeError { required, have, .. }) => self.need_privileges(raw, required, have),
            Err(e) => Response::error(format!("Error: {e}")),
        }
    }

    fn need_privileges(&mut self, raw: &str, required: PrivilegeLevel, have: PrivilegeLevel) -> Response {
        if !self.options.svc_enabled {
            return Response::error(format!(
                "Error: this request needs {required:?} privileges and the secure voice channel is disabled"
            ));
        }
        let now = self.now();
        match self.svc.request_privileged(required, now) {
            Ok(Decision::NeedsElevation(msg)) => {
                self.pending = Some(PendingElevation { input: raw.to_string(), confirmed: false });
                Response::ok(msg)
            }
            Ok(Decision::Allowed) => Response::error(format!("Error: privileges changed from {have:?} while checking")),
            Err(e) => Response::error(capitalize(&e.to_string())),
        }
    }

    // Routing.

    fn switch_to(&mut self, route: Route) {
        let old = self.route.replace(route);
        self.previous_route = old;
    }

    fn disconnect(&mut self) {
        self.route = None;
        self.previous_route = None;
    }

    fn switch_back(&mut self) {
        self.route = self.previous_route.take();
    }

    /// The privacy mode a forward to `record` must apply.
    fn forward_mode(&self, record: &RegistryRecord) -> CpfMode {
        if record.descriptor.broadcast == Broadcast::Sanitized {
            return CpfMode::StrongIncognito;
        }
        match (record.descriptor.privacy, self.options.cpf) {
            (CpfMode::StrongIncognito, _) | (_, CpfMode::StrongIncognito) => CpfMode::StrongIncognito,
            (CpfMode::SpeechIncognito, _) | (_, CpfMode::SpeechIncognito) => CpfMode::SpeechIncognito,
            _ => CpfMode::Off,
        }
    }

    /// Text to send to a remote assistant under `mode`.
    pub fn sanitize(&self, text: &str, mode: CpfMode) -> String {
        if mode == CpfMode::Off {
            return text.to_string();
        }
        if let Some(r) = self.parse_best(text) {
            let out = self.firewall.filter(&r.tree, mode);
            if out.safety_flag {
                return text.to_string();
            }
            return leaves_text(&out.filtered);
        }
        let words = Input::new(text).words;
        let lex = &self.firewall.lexicon;
        if words.iter().any(|w| lex.safety.contains(w)) {
            return text.to_string();
        }
        words.into_iter().filter(|w| !lex.sentiment.contains(w)).collect::<Vec<_>>().join(" ")
    }

    fn forward(&mut self, record: &RegistryRecord, body: &str) -> Response {
        let Some(vns) = self.vns.clone() else {
            return Response::error("Error: no VNS resolver is configured");
        };
        let mode = self.forward_mode(record);
        let text = self.sanitize(body, mode);
        match vns.route(&record.endpoint, &self.options.session_id, mode, &text) {
            Ok(reply) => Response::ok(reply.body),
            Err(e) => {
                // Fall back to the handler in use before this route.
                if self.route.as_ref().and_then(|r| r.record.as_ref()) == Some(record) {
                    self.switch_back();
                }
                Response::error(format!("Error: {e}"))
            }
        }
    }

    fn resolve(&self, name: &str) -> Result<RegistryRecord, VnsError> {
        let vns = self.vns.as_ref().ok_or_else(|| VnsError::RemoteUnreachable("no VNS resolver is configured".into()))?;
        if let Some(r) = vns.lookup_alias(name) {
            return Ok(r);
        }
        vns.resolve(name, DEFAULT_LANGUAGE, None, self.now()).map(|(r, _)| r)
    }

    /// Handle a parsed switch statement: connect, then forward any request
    /// that came with it.
    fn switch_statement(&mut self, tree: &SExpr) -> Response {
        let name = extract(tree, "assistant").first().map(|a| leaves_text(a)).unwrap_or_default();
        let payload: Vec<String> = ["service_action", "skill_remote"]
            .iter()
            .flat_map(|h| extract(tree, h))
            .map(leaves_text)
            .collect();
        self.note_tree(tree);
        self.frame.interpreter = SkillKind::Vns.interpreter().to_string();
        if name.is_empty() || self.is_local_assistant(&name) {
            self.switch_to(Route { name, record: None });
            return Response::ok(self.trace_tree("OK".into(), tree));
        }
        match self.resolve(&name) {
            Ok(record) => {
                self.switch_to(Route { name, record: Some(record.clone()) });
                if payload.is_empty() {
                    Response::ok(self.trace_tree("OK".into(), tree))
                } else {
                    let r = self.forward(&record, &payload.join(" "));
                    Response { text: self.trace_tree(r.text, tree), kind: r.kind }
                }
            }
            Err(e) => Response::error(format!("Error: cannot reach {name}: {e}")),
        }
    }

    fn vns_command(&mut self, words: &[String]) -> Option<Response> {
        let vns = self.vns.clone();
        let now = self.now();
        let joined = words.join(" ");
        let first = words.first()?.as_str();
        let no_vns = || Response::error("Error: no VNS resolver is configured");
        let fmt_err = |e: VnsError| Response::error(format!("Error: {e}"));
        match first {
            "pair" => {
                let to = words.iter().rposition(|w| w == "to")?;
                if to < 2 || to + 1 == words.len() {
                    return None;
                }
                let Some(vns) = vns else { return Some(no_vns()) };
                let wake = words[1..to].join(" ");
                let alias = words[to + 1..].join(" ");
                let keywords = |w: &str| self.grammars.sets.iter().any(|g| g.is_keyword(w));
                Some(match vns.macro_pair(&alias, &wake, now, &keywords) {
                    Ok(r) => Response::ok(format!("OK, {alias} now reaches {} at {}", r.wake_word, r.endpoint)),
                    Err(e) => fmt_err(e),
                })
            }
            "define" if words.len() >= 2 => {
                let Some(vns) = vns else { return Some(no_vns()) };
                Some(match vns.macro_define(&words[1..].join(" ")) {
                    Ok(s) if s.is_empty() => Response::ok("No macros are defined."),
                    Ok(s) => Response::ok(s),
                    Err(e) => fmt_err(e),
                })
            }
            "delete" if words.len() >= 2 => {
                let vns = vns?;
                let alias = words[1..].join(" ");
                vns.lookup_alias(&alias)?;
                Some(vns.macro_delete(&alias).map_or_else(fmt_err, |_| Response::ok(format!("OK, deleted {alias}"))))
            }
            "reset" if joined == "reset" || joined == "reset macros" => {
                let Some(vns) = vns else { return Some(no_vns()) };
                vns.macro_reset();
                Some(Response::ok("OK, all macros deleted"))
            }
            "ownership" if words.len() >= 2 => {
                let Some(vns) = vns else { return Some(no_vns()) };
                let brand = words[1..].join(" ");
                Some(match vns.set_ownership(&brand, now) {
                    Ok(r) => Response::ok(format!("OK, this device now belongs to {}", r.wake_word)),
                    Err(e) => fmt_err(e),
                })
            }
            "ping" => {
                let Some(vns) = vns else { return Some(no_vns()) };
                let root = vns.root.clone();
                Some(vns.ping(&root).map_or_else(fmt_err, Response::ok))
            }
            _ => None,
        }
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

// Handlers.

fn login_name(words: &[String]) -> Option<&str> {
    match words {
        [w, name] if w == "login" => Some(name),
        [a, b, name] if (a == "log" || a == "sign") && b == "in" => Some(name),
        _ => None,
    }
}

impl Handler for GlobalHandler {
    fn name(&self) -> &'static str {
        "global"
    }

    fn can_handle(&self, sh: &Shell, input: &Input) -> bool {
        if input.raw.starts_with(':') {
            return false;
        }
        let w = &input.words;
        if login_name(w).is_some() || matches!(w.as_slice(), [x] if x == "logout" || x == "quit" || x == "exit") {
            return true;
        }
        if !sh.options.svc_enabled {
            return false;
        }
        match sh.svc.state() {
            AuthState::AwaitingCode { .. } | AuthState::AwaitingChallenge { .. } => true,
            AuthState::AwaitingElevation { .. } => sh.pending.is_some() && (yes_no(w).is_some() || w.len() == 1),
            _ => false,
        }
    }

    fn handle(&self, sh: &mut Shell, input: &Input) -> Response {
        let now = sh.now();
        let w = &input.words;
        let svc_result = |r: Result<String, SvcError>| match r {
            Ok(s) => Response::ok(s),
            Err(e) => Response::error(capitalize(&e.to_string())),
        };
        if let Some(name) = login_name(w) {
            if !sh.options.svc_enabled {
                sh.user = Some(name.to_string());
                return Response::ok(format!("Hello {name}!"));
            }
            return svc_result(sh.svc.begin_login(name, now));
        }
        match w.first().map(String::as_str) {
            Some("logout") if w.len() == 1 => {
                sh.svc.logout();
                sh.pending = None;
                return Response::ok(match sh.user.take() {
                    Some(u) => format!("Goodbye {u}!"),
                    None => "Goodbye!".into(),
                });
            }
            Some("quit" | "exit") if w.len() == 1 => return Response { text: "Bye.".into(), kind: ResponseKind::Quit },
            _ => {}
        }
        match sh.svc.state().clone() {
            AuthState::AwaitingCode { .. } => {
                let code = w.join("");
                if code.len() == 6 && code.chars().all(|c| c.is_ascii_digit()) {
                    let r = sh.svc.submit_code(&code, now);
                    if r.is_ok() {
                        sh.user = sh.svc.state().user().map(str::to_string);
                    }
                    svc_result(r)
                } else if w.iter().any(|x| x == "phone") {
                    svc_result(sh.svc.fallback_challenge(now))
                } else {
                    Response::error("Please provide the 6 digit code, or say that you don't have your phone.")
                }
            }
            AuthState::AwaitingChallenge { .. } => {
                let r = sh.svc.answer_challenge(&input.raw);
                if r.is_ok() {
                    sh.user = sh.svc.state().user().map(str::to_string);
                }
                svc_result(r)
            }
            _ => {
                let pending = sh.pending.clone().expect("checked by can_handle");
                match yes_no(w) {
                    Some(yes) if !pending.confirmed || !yes => {
                        let r = sh.svc.confirm_elevation(yes, now);
                        if yes {
                            sh.pending = Some(PendingElevation { confirmed: true, ..pending });
                        } else {
                            sh.pending = None;
                        }
                        svc_result(r)
                    }
                    _ => match sh.svc.elevate(&input.raw, now) {
                        Ok(msg) => {
                            sh.pending = None;
                            let rerun = sh.repl_step(&pending.input);
                            Response { text: format!("{msg}\n{}", rerun.text), kind: rerun.kind }
                        }
                        Err(e) => Response::error(capitalize(&e.to_string())),
                    },
                }
            }
        }
    }
}

impl Handler for HelpHandler {
    fn name(&self) -> &'static str {
        "help"
    }

    fn can_handle(&self, _sh: &Shell, input: &Input) -> bool {
        input.raw == ":h" || input.words == ["help"]
    }

    fn handle(&self, _sh: &mut Shell, _input: &Input) -> Response {
        Response::ok(HELP)
    }
}

impl Handler for DebugHandler {
    fn name(&self) -> &'static str {
        "debug"
    }

    fn can_handle(&self, _sh: &Shell, input: &Input) -> bool {
        input.raw.starts_with(':')
    }

    fn handle(&self, sh: &mut Shell, input: &Input) -> Response {
        let (cmd, arg) = match input.raw.split_once(char::is_whitespace) {
            Some((c, a)) => (c, a.trim()),
            None => (input.raw.as_str(), ""),
        };
        match cmd {
            ":q" => Response { text: "Bye.".into(), kind: ResponseKind::Quit },
            ":t" => {
                sh.options.trace = !sh.options.trace;
                Response::ok(if sh.options.trace { "Verbosity set to: TRACE" } else { "Verbosity set to: NORMAL" })
            }
            ":f" => Response::ok(sh.frame.to_string()),
            ":o" if !arg.is_empty() => {
                let text = match std::fs::read_to_string(arg) {
                    Ok(t) => t,
                    Err(e) => return Response::error(format!("Error: cannot read {arg}: {e}")),
                };
                let name = std::path::Path::new(arg).file_stem().map_or("sheet".into(), |s| s.to_string_lossy().into_owned());
                match Sheet::from_csv(&name, &text) {
                    Ok(sheet) => {
                        let rows = sheet.rows.len();
                        let eng = sh.engines.engine_mut::<SheetEngine>("sheetHandler").expect("sheet engine registered");
                        eng.open(sheet);
                        sh.frame.interpreter = SkillKind::Sheet.interpreter().to_string();
                        Response::ok(format!("[OK] opened {name} with {rows} rows"))
                    }
                    Err(e) => Response::error(format!("Error: {e}")),
                }
            }
            _ => Response::error(ShellError::UnknownMetaCommand(cmd.to_string()).to_string()),
        }
    }
}

impl Handler for WakeHandler {
    fn name(&self) -> &'static str {
        "wake"
    }

    fn can_handle(&self, sh: &Shell, input: &Input) -> bool {
        let has_meta = sh.starts_with_meta(&input.words);
        if sh.options.wake_required && !sh.frame.awake && !has_meta && sh.route.is_none() {
            return true;
        }
        has_meta && sh.meta_len(&input.words) == Some(input.words.len()) && sh.vns.as_ref().is_none_or(|v| v.lookup_alias(&input.words.join(" ")).is_none())
    }

    fn handle(&self, sh: &mut Shell, input: &Input) -> Response {
        if !sh.starts_with_meta(&input.words) {
            return Response::error(format!("I'm asleep. Say a wake word first, for example \"hi {}\".", sh.options.own_name));
        }
        sh.frame.awake = true;
        let now = sh.now();
        if sh.options.svc_enabled && matches!(sh.svc.state(), AuthState::LoggedOut) {
            if let Some(user) = sh.options.device_user.clone() {
                return match sh.svc.begin_login(&user, now) {
                    Ok(s) => Response::ok(s),
                    Err(e) => Response::error(capitalize(&e.to_string())),
                };
            }
        }
        Response::ok("Yes?")
    }
}

enum VnsPlan {
    Disconnect,
    SwitchBack,
    Command,
    Alias(usize),
    Switch(SExpr),
    Override,
    Forward,
    Ownership,
    Brand,
}

impl VnsHandler {
    fn plan(&self, sh: &Shell, input: &Input) -> Option<VnsPlan> {
        let w = &input.words;
        let body = sh.strip_meta(w);
        if body == ["disconnect"] {
            return Some(VnsPlan::Disconnect);
        }
        if body == ["switch", "back"] {
            return Some(VnsPlan::SwitchBack);
        }
        if matches!(w.first().map(String::as_str), Some("pair" | "define" | "reset" | "ownership" | "ping")) {
            return Some(VnsPlan::Command);
        }
        if w.first().is_some_and(|x| x == "delete") && w.len() >= 2 {
            if let Some(v) = &sh.vns {
                if v.lookup_alias(&w[1..].join(" ")).is_some() {
                    return Some(VnsPlan::Command);
                }
            }
        }
        let skip = usize::from(w.first().is_some_and(|x| ATTN.contains(&x.as_str())));
        if let Some(n) = sh.alias_len(&w[skip..]) {
            return Some(VnsPlan::Alias(skip + n));
        }
        let best = sh.parse_best(&input.raw);
        if let Some(r) = &best {
            if !is_catch_all(&r.tree)
                && !is_bare_meta(&r.tree)
                && !r.tree.contains_head("tell_assistant_compound")
                && sh.compiler.skill_of(&r.tree) == Some(SkillKind::Vns)
            {
                return Some(VnsPlan::Switch(r.tree.clone()));
            }
        }
        let own = w.get(skip).is_some_and(|x| *x == sh.options.own_name);
        let remote = sh.route.as_ref().is_some_and(|r| r.record.is_some());
        if remote {
            return Some(if own { VnsPlan::Override } else { VnsPlan::Forward });
        }
        if sh.vns.as_ref().is_some_and(|v| v.ownership().is_some()) && !sh.starts_with_meta(w) {
            return Some(VnsPlan::Ownership);
        }
        if sh.vns.is_some() && best.as_ref().is_none_or(|r| is_catch_all(&r.tree)) && !body.is_empty() {
            return Some(VnsPlan::Brand);
        }
        None
    }
}

impl Handler for VnsHandler {
    fn name(&self) -> &'static str {
        "vns"
    }

    fn can_handle(&self, sh: &Shell, input: &Input) -> bool {
        self.plan(sh, input).is_some()
    }

    fn handle(&self, sh: &mut Shell, input: &Input) -> Response {
        let w = &input.words;
        match self.plan(sh, input).expect("checked by can_handle") {
            VnsPlan::Disconnect => {
                sh.disconnect();
                sh.frame.interpreter = SkillKind::Vns.interpreter().to_string();
                Response::ok("OK")
            }
            VnsPlan::SwitchBack => {
                sh.switch_back();
                Response::ok("OK")
            }
            VnsPlan::Command => sh.vns_command(w).unwrap_or_else(|| Response::error("Error: incomplete VNS command")),
            VnsPlan::Alias(n) => {
                let alias = w[usize::from(ATTN.contains(&w[0].as_str()))..n].join(" ");
                let record = sh.vns.as_ref().and_then(|v| v.lookup_alias(&alias)).expect("alias checked by plan");
                let rest = w[n..].join(" ");
                sh.switch_to(Route { name: alias, record: Some(record.clone()) });
                if rest.is_empty() {
                    Response::ok("OK")
                } else {
                    sh.forward(&record, &rest)
                }
            }
            VnsPlan::Switch(tree) => sh.switch_statement(&tree),
            VnsPlan::Override => {
                sh.disconnect();
                let rest = sh.strip_meta(w).join(" ");
                match sh.parse_best(&rest).filter(|r| !is_catch_all(&r.tree)) {
                    Some(r) => match sh.compiler.skill_of(&r.tree) {
                        Some(k) if k != SkillKind::Vns => sh.dispatch_skill(&rest, &r.tree, k),
                        _ => Response::ok("OK"),
                    },
                    None => Response::ok("OK"),
                }
            }
            VnsPlan::Forward => {
                let record = sh.route.as_ref().and_then(|r| r.record.clone()).expect("remote route checked by plan");
                let rest = sh.strip_meta(w).join(" ");
                sh.forward(&record, &rest)
            }
            VnsPlan::Ownership => {
                let record = sh.vns.as_ref().and_then(VnsClient::ownership).expect("ownership checked by plan");
                sh.forward(&record, &input.raw)
            }
            VnsPlan::Brand => {
                let body: Vec<String> = sh.strip_meta(w).to_vec();
                for n in (1..=body.len().min(3)).rev() {
                    let name = normalize_wake(&body[..n].join(" "));
                    if sh.is_local_assistant(&name) {
                        continue;
                    }
                    if let Ok(record) = sh.resolve(&name) {
                        sh.switch_to(Route { name, record: Some(record.clone()) });
                        let rest = body[n..].join(" ");
                        return if rest.is_empty() { Response::ok("OK") } else { sh.forward(&record, &rest) };
                    }
                }
                CatchAllHandler.handle(sh, input)
            }
        }
    }
}

impl Handler for PeekHandler {
    fn name(&self) -> &'static str {
        "peek"
    }

    fn can_handle(&self, sh: &Shell, input: &Input) -> bool {
        input.words.iter().any(|w| w == "and") && sh.peek_split(&input.raw).len() > 1
    }

    fn handle(&self, sh: &mut Shell, input: &Input) -> Response {
        let mut parts = sh.peek_split(&input.raw);
        let first = parts.remove(0);
        for p in parts.into_iter().rev() {
            sh.stack.push_front(p);
        }
        sh.repl_step(&first)
    }
}

impl Handler for SkillHandler {
    fn name(&self) -> &'static str {
        "skill"
    }

    fn can_handle(&self, sh: &Shell, input: &Input) -> bool {
        sh.parse_best(&input.raw)
            .is_some_and(|r| !is_catch_all(&r.tree) && matches!(sh.compiler.skill_of(&r.tree), Some(k) if k != SkillKind::Vns))
    }

    fn handle(&self, sh: &mut Shell, input: &Input) -> Response {
        let r = sh.parse_best(&input.raw).expect("checked by can_handle");
        let skill = sh.compiler.skill_of(&r.tree).expect("checked by can_handle");
        sh.dispatch_skill(&input.raw, &r.tree, skill)
    }
}

impl Handler for CatchAllHandler {
    fn name(&self) -> &'static str {
        "catch-all"
    }

    fn can_handle(&self, _sh: &Shell, _input: &Input) -> bool {
        true
    }

    fn handle(&self, sh: &mut Shell, input: &Input) -> Response {
        let mut text = "Sorry, I could not process that request.".to_string();
        if sh.options.trace {
            if let Some(Err(e)) = SetName::ALL.first().map(|n| parse_text(sh.grammars.get(*n), &input.raw)) {
                text.push_str(&format!("\n{e}"));
            }
        }
        Response::error(text)
    }
}

/// Serve `route` requests by running each body through a shell kept per
/// session id. `make` builds the shell for a new session.
pub fn serve_handler(make: Arc<dyn Fn(&str) -> Shell + Send + Sync>) -> WireHandler {
    let sessions: Arc<Mutex<HashMap<String, Shell>>> = Arc::new(Mutex::new(HashMap::new()));
    Arc::new(move |req: WireFrame| match req.get("verb") {
        Some("route") => {
            let id = req.get("session").unwrap_or("anonymous").to_string();
            let mode = req.get("privacy").and_then(CpfMode::parse).unwrap_or_default();
            let mut all = sessions.lock().expect("session table lock");
            let shell = all.entry(id.clone()).or_insert_with(|| make(&id));
            shell.options.cpf = mode;
            let mut lines = Vec::new();
            for r in shell.run_script(req.body.lines()) {
                if !r.text.is_empty() {
                    lines.push(r.text);
                }
            }
            WireFrame::ok().body(&lines.join("\n"))
        }
        Some("ping") => WireFrame::ok().body("server:huey"),
        Some(v) => WireFrame::error("protocol", &format!("unsupported verb {v:?}")),
        None => WireFrame::error("protocol", "missing verb"),
    })
}
