//! Shopping lists with role-scoped capability tokens, one-time share links
//! and an append-only journal.

use std::any::Any;
use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jak::{CallArgs, Engine, EngineError};
use crate::numbers::Fixed;
use crate::svc::PrivilegeLevel;

pub const DEFAULT_LIST: &str = "shopping list";
pub const DEFAULT_SHARE_BASE: &str = "https://www.example.com";
/// Unclaimed share links are swept after a day.
pub const DEFAULT_SHARE_TTL_SECS: u64 = 86_400;

const TOKEN_ALPHABET: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShopError {
    #[error("permission denied")]
    PermissionDenied,
    #[error("{item} is not on the {list}")]
    ItemNotFound { list: String, item: String },
    #[error("there is no list called {0}")]
    ListNotFound(String),
    #[error("a list cannot be merged with itself")]
    SelfMerge,
    #[error("unknown or revoked capability token")]
    BadToken,
    #[error("this link has already been used or has expired")]
    Gone,
    #[error("journal: {0}")]
    Journal(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub name: String,
    pub qty: Fixed,
    pub unit: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ShoppingList {
    pub name: String,
    pub items: Vec<Item>,
}

impl ShoppingList {
    pub fn item(&self, name: &str) -> Option<&Item> {
        self.items.iter().find(|i| i.name == name)
    }

    /// Plain-text snapshot, one `qty<TAB>unit<TAB>name` line per item.
    pub fn snapshot(&self) -> String {
        self.items
            .iter()
            .map(|i| format!("{}\t{}\t{}\n", i.qty, i.unit.as_deref().unwrap_or(""), i.name))
            .collect()
    }

    fn add(&mut self, name: &str, qty: Fixed, unit: Option<&str>) {
        match self.items.iter_mut().find(|i| i.name == name) {
            Some(i) => {
                i.qty += qty;
                if i.unit.is_none() {
                    i.unit = unit.map(str::to_string);
                }
            }
            None => self.items.push(Item { name: name.to_string(), qty, unit: unit.map(str::to_string) }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Read,
    ReadWrite,
    Admin,
    AdminTransfer,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Read, Role::ReadWrite, Role::Admin, Role::AdminTransfer];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapabilityToken {
    pub list: String,
    pub role: Role,
    pub token: String,
    pub revoked: bool,
}

/// Who is asking. The session that created a list acts as its owner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Access {
    Owner,
    Token(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ListDelta {
    pub list: String,
    pub item: Option<String>,
    pub qty: Option<Fixed>,
}

#[derive(Debug, Clone)]
struct ShareLink {
    snapshot: String,
    created_at: u64,
    used: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum JournalOp {
    Create { list: String, tokens: Vec<(Role, String)> },
    Add { list: String, item: String, qty: Fixed, unit: Option<String> },
    Delete { list: String, item: String },
    Purge { list: String },
    Sort { list: String },
    Merge { dst: String, src: String },
    Regenerate { list: String, tokens: Vec<(Role, String)> },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Snapshot {
    lists: BTreeMap<String, ShoppingList>,
    tokens: BTreeMap<String, CapabilityToken>,
}

/// All shopping lists plus their capabilities. Mutations are journaled
/// when a store directory is configured.
pub struct ShoppingStore {
    lists: BTreeMap<String, ShoppingList>,
    tokens: BTreeMap<String, CapabilityToken>,
    shares: BTreeMap<String, ShareLink>,
    pub share_base: String,
    pub share_ttl: u64,
    rng: StdRng,
    dir: Option<PathBuf>,
    pending: Vec<JournalOp>,
    autoflush: bool,
}

impl ShoppingStore {
    pub fn new() -> ShoppingStore {
        ShoppingStore::with_rng(StdRng::from_entropy())
    }

    pub fn with_seed(seed: u64) -> ShoppingStore {
        ShoppingStore::with_rng(StdRng::seed_from_u64(seed))
    }

    fn with_rng(rng: StdRng) -> ShoppingStore {
        ShoppingStore {
            lists: BTreeMap::new(),
            tokens: BTreeMap::new(),
            shares: BTreeMap::new(),
            share_base: DEFAULT_SHARE_BASE.to_string(),
            share_ttl: DEFAULT_SHARE_TTL_SECS,
            rng,
            dir: None,
            pending: Vec::new(),
            autoflush: true,
        }
    }

    /// Open a journaled store: load `snapshot.json` if present, then replay
    /// `journal.jsonl` on top of it.
    pub fn open(dir: &Path) -> Result<ShoppingStore, ShopError> {
        let jerr = |e: std::io::Error| ShopError::Journal(e.to_string());
        fs::create_dir_all(dir).map_err(jerr)?;
        let mut store = ShoppingStore::new();
        let snap = dir.join("snapshot.json");
        if snap.exists() {
            let text = fs::read_to_string(&snap).map_err(jerr)?;
            let s: Snapshot = serde_json::from_str(&text).map_err(|e| ShopError::Journal(e.to_string()))?;
            store.lists = s.lists;
            store.tokens = s.tokens;
        }
        let journal = dir.join("journal.jsonl");
        if journal.exists() {
            let f = fs::File::open(&journal).map_err(jerr)?;
            for (i, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(jerr)?;
                if line.trim().is_empty() {
                    continue;
                }
                let op: JournalOp = serde_json::from_str(&line)
                    .map_err(|e| ShopError::Journal(format!("line {}: {e}", i + 1)))?;
                store.apply(&op);
            }
        }
        store.dir = Some(dir.to_path_buf());
        Ok(store)
    }

    pub fn list(&self, name: &str) -> Option<&ShoppingList> {
        self.lists.get(name)
    }

    pub fn list_names(&self) -> impl Iterator<Item = &str> {
        self.lists.keys().map(String::as_str)
    }

    /// Current (unrevoked) tokens of a list, readable by its admins.
    pub fn tokens(&self, access: &Access, list: &str) -> Result<BTreeMap<Role, String>, ShopError> {
        self.require(access, list, Role::Admin)?;
        Ok(self
            .tokens
            .values()
            .filter(|t| t.list == list && !t.revoked)
            .map(|t| (t.role, t.token.clone()))
            .collect())
    }

    pub fn token_info(&self, token: &str) -> Option<&CapabilityToken> {
        self.tokens.get(token)
    }

    pub fn create_list(&mut self, name: &str) -> Result<ListDelta, ShopError> {
        if !self.lists.contains_key(name) {
            let tokens = self.fresh_tokens();
            self.record(JournalOp::Create { list: name.to_string(), tokens })?;
        }
        Ok(ListDelta { list: name.to_string(), item: None, qty: None })
    }

    pub fn add(&mut self, access: &Access, list: &str, item: &str, qty: Option<Fixed>, unit: Option<&str>) -> Result<ListDelta, ShopError> {
        if access == &Access::Owner {
            self.create_list(list)?;
        }
        self.require(access, list, Role::ReadWrite)?;
        let qty = qty.unwrap_or(Fixed::from_int(1));
        self.record(JournalOp::Add { list: list.into(), item: item.into(), qty, unit: unit.map(str::to_string) })?;
        Ok(ListDelta { list: list.into(), item: Some(item.into()), qty: Some(qty) })
    }

    pub fn delete(&mut self, access: &Access, list: &str, item: &str) -> Result<ListDelta, ShopError> {
        self.require(access, list, Role::ReadWrite)?;
        if self.lists[list].item(item).is_none() {
            return Err(ShopError::ItemNotFound { list: list.into(), item: item.into() });
        }
        self.record(JournalOp::Delete { list: list.into(), item: item.into() })?;
        Ok(ListDelta { list: list.into(), item: Some(item.into()), qty: None })
    }

    pub fn purge(&mut self, access: &Access, list: &str) -> Result<ListDelta, ShopError> {
        self.require(access, list, Role::Admin)?;
        self.record(JournalOp::Purge { list: list.into() })?;
        Ok(ListDelta { list: list.into(), item: None, qty: None })
    }

    pub fn sort(&mut self, access: &Access, list: &str) -> Result<ListDelta, ShopError> {
        self.require(access, list, Role::ReadWrite)?;
        self.record(JournalOp::Sort { list: list.into() })?;
        Ok(ListDelta { list: list.into(), item: None, qty: None })
    }

    /// Union `src` into `dst`, summing duplicate quantities. `src` is left
    /// unchanged.
    pub fn merge(&mut self, dst_access: &Access, dst: &str, src_access: &Access, src: &str) -> Result<ListDelta, ShopError> {
        if dst == src {
            return Err(ShopError::SelfMerge);
        }
        self.require(src_access, src, Role::Read)?;
        if dst_access == &Access::Owner {
            self.create_list(dst)?;
        }
        self.require(dst_access, dst, Role::ReadWrite)?;
        self.record(JournalOp::Merge { dst: dst.into(), src: src.into() })?;
        Ok(ListDelta { list: dst.into(), item: None, qty: None })
    }

    /// Mint or look up the token for `role`. Issuing an admin-transfer
    /// token regenerates every token of the list, so only the new admin
    /// holds valid ones.
    pub fn issue(&mut self, access: &Access, list: &str, role: Role) -> Result<CapabilityToken, ShopError> {
        let needed = if role == Role::AdminTransfer { Role::AdminTransfer } else { Role::Admin };
        self.require(access, list, needed)?;
        if role == Role::AdminTransfer {
            let tokens = self.fresh_tokens();
            self.record(JournalOp::Regenerate { list: list.into(), tokens })?;
        }
        let t = self
            .tokens
            .values()
            .find(|t| t.list == list && t.role == role && !t.revoked)
            .cloned()
            .expect("every list holds one live token per role");
        Ok(t)
    }

    /// Publish a one-time link to a plain-text snapshot of the list.
    pub fn share_url(&mut self, access: &Access, list: &str, now: u64) -> Result<String, ShopError> {
        self.require(access, list, Role::Admin)?;
        let token = self.unique_token();
        let snapshot = self.lists[list].snapshot();
        if let Some(dir) = &self.dir {
            let share_dir = dir.join("share");
            fs::create_dir_all(&share_dir).map_err(|e| ShopError::Journal(e.to_string()))?;
            fs::write(share_dir.join(&token), &snapshot).map_err(|e| ShopError::Journal(e.to_string()))?;
        }
        self.shares.insert(token.clone(), ShareLink { snapshot, created_at: now, used: false });
        Ok(format!("{}/lists/share/{token}", self.share_base.trim_end_matches('/')))
    }

    /// Retrieve a shared snapshot. Each link works once.
    pub fn fetch_share(&mut self, token: &str, now: u64) -> Result<String, ShopError> {
        let ttl = self.share_ttl;
        let link = self.shares.get_mut(token).ok_or(ShopError::Gone)?;
        if link.used || now >= link.created_at + ttl {
            return Err(ShopError::Gone);
        }
        link.used = true;
        Ok(link.snapshot.clone())
    }

    /// Maintenance pass: forget used and expired links and their files.
    /// Returns the number of links removed.
    pub fn sweep(&mut self, now: u64) -> usize {
        let ttl = self.share_ttl;
        let dead: Vec<String> = self
            .shares
            .iter()
            .filter(|(_, l)| l.used || now >= l.created_at + ttl)
            .map(|(t, _)| t.clone())
            .collect();
        for t in &dead {
            self.shares.remove(t);
            if let Some(dir) = &self.dir {
                let _ = fs::remove_file(dir.join("share").join(t));
            }
        }
        dead.len()
    }

    pub fn live_shares(&self) -> usize {
        self.shares.len()
    }

    /// Write a snapshot and truncate the journal.
    pub fn save(&mut self) -> Result<(), ShopError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let jerr = |e: std::io::Error| ShopError::Journal(e.to_string());
        let snap = Snapshot { lists: self.lists.clone(), tokens: self.tokens.clone() };
        let text = serde_json::to_string_pretty(&snap).map_err(|e| ShopError::Journal(e.to_string()))?;
        let tmp = dir.join("snapshot.json.tmp");
        fs::write(&tmp, text).map_err(jerr)?;
        fs::rename(&tmp, dir.join("snapshot.json")).map_err(jerr)?;
        fs::write(dir.join("journal.jsonl"), "").map_err(jerr)?;
        Ok(())
    }

    fn role_of(&self, access: &Access, list: &str) -> Result<Role, ShopError> {
        match access {
            Access::Owner => Ok(Role::AdminTransfer),
            Access::Token(t) => match self.tokens.get(t) {
                Some(c) if !c.revoked && c.list == list => Ok(c.role),
                Some(c) if !c.revoked => Err(ShopError::PermissionDenied),
                _ => Err(ShopError::BadToken),
            },
        }
    }

    fn require(&self, access: &Access, list: &str, role: Role) -> Result<(), ShopError> {
        if !self.lists.contains_key(list) {
            return Err(ShopError::ListNotFound(list.into()));
        }
        if self.role_of(access, list)? < role {
            return Err(ShopError::PermissionDenied);
        }
        Ok(())
    }

    fn unique_token(&mut self) -> String {
        loop {
            let t: String = (0..6).map(|_| TOKEN_ALPHABET[self.rng.gen_range(0..TOKEN_ALPHABET.len())] as char).collect();
            if !self.tokens.contains_key(&t) && !self.shares.contains_key(&t) {
                return t;
            }
        }
    }

    fn fresh_tokens(&mut self) -> Vec<(Role, String)> {
        let mut out: Vec<(Role, String)> = Vec::new();
        for role in Role::ALL {
            let mut t = self.unique_token();
            while out.iter().any(|(_, o)| *o == t) {
                t = self.unique_token();
            }
            out.push((role, t));
        }
        out
    }

    fn record(&mut self, op: JournalOp) -> Result<(), ShopError> {
        self.apply(&op);
        if self.dir.is_some() {
            self.pending.push(op);
            if self.autoflush {
                self.flush()?;
            }
        }
        Ok(())
    }

    fn flush(&mut self) -> Result<(), ShopError> {
        let Some(dir) = &self.dir else {
            self.pending.clear();
            return Ok(());
        };
        if self.pending.is_empty() {
            return Ok(());
        }
        let jerr = |e: std::io::Error| ShopError::Journal(e.to_string());
        let mut f = OpenOptions::new().create(true).append(true).open(dir.join("journal.jsonl")).map_err(jerr)?;
        for op in self.pending.drain(..) {
            let line = serde_json::to_string(&op).map_err(|e| ShopError::Journal(e.to_string()))?;
            writeln!(f, "{line}").map_err(jerr)?;
        }
        Ok(())
    }

    fn apply(&mut self, op: &JournalOp) {
        match op {
            JournalOp::Create { list, tokens } => {
                self.lists.insert(list.clone(), ShoppingList { name: list.clone(), items: Vec::new() });
                self.install_tokens(list, tokens);
            }
            JournalOp::Add { list, item, qty, unit } => {
                if let Some(l) = self.lists.get_mut(list) {
                    l.add(item, *qty, unit.as_deref());
                }
            }
            JournalOp::Delete { list, item } => {
                if let Some(l) = self.lists.get_mut(list) {
                    l.items.retain(|i| &i.name != item);
                }
            }
            JournalOp::Purge { list } => {
                if let Some(l) = self.lists.get_mut(list) {
                    l.items.clear();
                }
            }
            JournalOp::Sort { list } => {
                if let Some(l) = self.lists.get_mut(list) {
                    l.items.sort_by(|a, b| a.name.cmp(&b.name));
                }
            }
            JournalOp::Merge { dst, src } => {
                let items = self.lists.get(src).map(|l| l.items.clone()).unwrap_or_default();
                if let Some(d) = self.lists.get_mut(dst) {
                    for i in items {
                        d.add(&i.name, i.qty, i.unit.as_deref());
                    }
                }
            }
            JournalOp::Regenerate { list, tokens } => {
                for t in self.tokens.values_mut().filter(|t| &t.list == list) {
                    t.revoked = true;
                }
                self.install_tokens(list, tokens);
            }
        }
    }

    fn install_tokens(&mut self, list: &str, tokens: &[(Role, String)]) {
        for (role, token) in tokens {
            self.tokens.insert(
                token.clone(),
                CapabilityToken { list: list.to_string(), role: *role, token: token.clone(), revoked: false },
            );
        }
    }
}

impl Default for ShoppingStore {
    fn default() -> ShoppingStore {
        ShoppingStore::new()
    }
}

/// A page of ranked catalog matches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChoicePage {
    pub items: Vec<String>,
    pub page: usize,
    pub pages: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BrowseError {
    #[error("choice {0} is not on this page")]
    IndexOutOfPage(usize),
    #[error("nothing is being browsed")]
    NoQuery,
}

#[derive(Debug, Clone)]
struct CatalogEntry {
    name: String,
    tags: Vec<String>,
}

/// Multiple-choice browsing over a product catalog. Each catalog line is
/// a product name, optionally followed by a tab and comma-separated
/// search tags. Matches keep catalog order.
#[derive(Debug, Clone)]
pub struct Browser {
    catalog: Vec<CatalogEntry>,
    pub page_size: usize,
    matches: Vec<String>,
    cursor: usize,
    active: bool,
}

pub const DEFAULT_CATALOG: &str = include_str!("../../data/catalog.txt");

impl Browser {
    pub fn new(catalog_text: &str) -> Browser {
        let catalog = catalog_text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim_end())
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let (name, tags) = l.split_once('\t').unwrap_or((l, ""));
                CatalogEntry {
                    name: name.trim().to_lowercase(),
                    tags: tags.split(',').map(|t| t.trim().to_lowercase()).filter(|t| !t.is_empty()).collect(),
                }
            })
            .collect();
        Browser { catalog, page_size: 4, matches: Vec::new(), cursor: 0, active: false }
    }

    pub fn matches(&self) -> &[String] {
        &self.matches
    }

    pub fn browse(&mut self, query: &str) -> ChoicePage {
        let q = query.trim().to_lowercase();
        self.matches = self
            .catalog
            .iter()
            .filter(|e| !q.is_empty() && (e.name.contains(&q) || e.tags.iter().any(|t| t.contains(&q))))
            .map(|e| e.name.clone())
            .collect();
        self.cursor = 0;
        self.active = true;
        self.page()
    }

    pub fn page(&self) -> ChoicePage {
        let start = (self.cursor * self.page_size).min(self.matches.len());
        let end = (start + self.page_size).min(self.matches.len());
        ChoicePage {
            items: self.matches[start..end].to_vec(),
            page: self.cursor + 1,
            pages: self.matches.len().div_ceil(self.page_size),
        }
    }

    /// Advance to the next page; stays on the last page at the end.
    pub fn next_page(&mut self) -> Result<ChoicePage, BrowseError> {
        if !self.active {
            return Err(BrowseError::NoQuery);
        }
        if (self.cursor + 1) * self.page_size < self.matches.len() {
            self.cursor += 1;
        }
        Ok(self.page())
    }

    /// Pick the `n`th (1-based) choice on the current page.
    pub fn select(&self, n: usize) -> Result<String, BrowseError> {
        if !self.active {
            return Err(BrowseError::NoQuery);
        }
        let page = self.page();
        n.checked_sub(1).and_then(|i| page.items.get(i)).cloned().ok_or(BrowseError::IndexOutOfPage(n))
    }
}

/// Engine binding for `shoppingHandler`. The shell session is the owner of
/// every list it creates.
pub struct ShoppingEngine {
    pub store: ShoppingStore,
    pub now: u64,
    saved: Option<Snapshot>,
}

impl ShoppingEngine {
    pub fn new(store: ShoppingStore) -> ShoppingEngine {
        ShoppingEngine { store, now: 0, saved: None }
    }

    fn list_name(args: &CallArgs) -> String {
        args.text("store").unwrap_or_else(|| DEFAULT_LIST.to_string())
    }

    fn show(&self, list: &str) -> Result<String, ShopError> {
        let l = self.store.list(list).ok_or_else(|| ShopError::ListNotFound(list.into()))?;
        if l.items.is_empty() {
            return Ok(format!("The {list} is empty."));
        }
        let lines: Vec<String> = l
            .items
            .iter()
            .map(|i| match &i.unit {
                Some(u) => format!("{} {u} {}", i.qty, i.name),
                None => format!("{} {}", i.qty, i.name),
            })
            .collect();
        Ok(format!("{list}:\n{}", lines.join("\n")))
    }

    fn dispatch(&mut self, args: &CallArgs) -> Result<String, ShopError> {
        let owner = Access::Owner;
        let list = Self::list_name(args);
        match args.action() {
            "add_item" => {
                let item = args.text("add_item").unwrap_or_default();
                self.store.add(&owner, &list, &item, args.number("qty"), args.text("unit").as_deref())?;
                Ok(String::new())
            }
            "del_item" => {
                let item = args.text("del_item").unwrap_or_default();
                self.store.delete(&owner, &list, &item)?;
                Ok(String::new())
            }
            "purge_list" => {
                self.store.create_list(&list)?;
                self.store.purge(&owner, &list)?;
                Ok(String::new())
            }
            "sort_list" => {
                self.store.sort(&owner, &list)?;
                Ok(String::new())
            }
            "merge_lists" => {
                let dst = args.text("merge_lists").unwrap_or_default();
                let src = args.text("source").unwrap_or_default();
                self.store.merge(&owner, &dst, &owner, &src)?;
                Ok(String::new())
            }
            "send_list" => {
                let src = args.text("send_list").unwrap_or_default();
                let to = args.text("to").unwrap_or_default();
                let url = self.store.share_url(&owner, &src, self.now)?;
                Ok(format!("Sent the {src} list to {to}: {url}"))
            }
            "create_list" => {
                self.store.create_list(&list)?;
                Ok(String::new())
            }
            "show_list" => self.show(&list),
            "share_list" => {
                self.store.create_list(&list)?;
                self.store.share_url(&owner, &list, self.now)
            }
            "save_list" => {
                self.store.save()?;
                Ok(format!("Saved the {list}."))
            }
            "close_list" => Ok(String::new()),
            other => Err(ShopError::Journal(format!("unsupported shopping action {other}"))),
        }
    }
}

impl Engine for ShoppingEngine {
    fn required_level(&self, _action: &str) -> PrivilegeLevel {
        PrivilegeLevel::User
    }

    fn begin(&mut self) {
        self.saved = Some(Snapshot { lists: self.store.lists.clone(), tokens: self.store.tokens.clone() });
        self.store.autoflush = false;
    }

    fn commit(&mut self) {
        self.saved = None;
        self.store.autoflush = true;
        // A journal write failure leaves memory ahead of disk; the next
        // save() rewrites the snapshot.
        let _ = self.store.flush();
    }

    fn rollback(&mut self) {
        if let Some(s) = self.saved.take() {
            self.store.lists = s.lists;
            self.store.tokens = s.tokens;
        }
        self.store.pending.clear();
        self.store.autoflush = true;
    }

    fn call(&mut self, args: &CallArgs) -> Result<String, EngineError> {
        self.dispatch(args).map_err(|e| EngineError::new(e.to_string()))
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

/// Engine binding for `action_shop`: third-party search requests. The
/// engine only records what it was asked, which is what a merchant sees.
#[derive(Default)]
pub struct SearchEngine {
    pub requests: Vec<CallArgs>,
    saved: usize,
}

impl Engine for SearchEngine {
    fn begin(&mut self) {
        self.saved = self.requests.len();
    }

    fn commit(&mut self) {}

    fn rollback(&mut self) {
        self.requests.truncate(self.saved);
    }

    fn call(&mut self, args: &CallArgs) -> Result<String, EngineError> {
        let mut parts = Vec::new();
        if let Some(fields) = args.record("shop_search").or_else(|| args.record("search_item")) {
            parts.extend(fields.iter().map(|(k, v)| format!("{k}={}", v.as_text())));
        }
        if let Some(offer) = args.text("offer") {
            parts.push(format!("offer={offer}"));
        }
        self.requests.push(args.clone());
        Ok(format!("Searching: {}", parts.join(", ")))
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}
