//! Grammar sets and the matcher that turns token streams into parse trees.

pub mod bnf;
mod parser;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::lexicon::{tokenize, TokenKind};
use bnf::{read_bnf, RawTerm};

pub use parser::{parse, parse_text, ParseError, ParseResult};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("grammar error in {rule}: {reason}")]
pub struct GrammarLoadError {
    pub rule: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SetName {
    RootVns,
    RootShop,
    RootExpense,
}

impl SetName {
    pub const ALL: [SetName; 3] = [SetName::RootVns, SetName::RootShop, SetName::RootExpense];

    pub fn as_str(self) -> &'static str {
        match self {
            SetName::RootVns => "root_vns",
            SetName::RootShop => "root_shop",
            SetName::RootExpense => "root_expense",
        }
    }

    pub fn root_file(self) -> &'static str {
        match self {
            SetName::RootVns => "RootVNS",
            SetName::RootShop => "RootShop",
            SetName::RootExpense => "RootExpense",
        }
    }

    pub fn parse(s: &str) -> Option<SetName> {
        SetName::ALL.into_iter().find(|n| n.as_str() == s)
    }
}

impl fmt::Display for SetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A compiled grammar term.
#[derive(Debug, Clone)]
pub(crate) enum Term {
    /// Literal word sequence, already lowercased and split into tokens.
    Lit(Vec<String>),
    Rule(usize),
    Tok(TokenKind),
    /// Zero-width check that whitespace precedes the next token.
    Ws,
    Opt(Box<Term>),
    Star(usize, Box<Term>),
    Plus(usize, Box<Term>),
    Group(Vec<Alt>),
}

#[derive(Debug, Clone)]
pub(crate) struct Alt {
    pub id: usize,
    pub terms: Vec<Term>,
}

#[derive(Debug, Clone)]
pub(crate) struct Rule {
    pub name: String,
    pub alts: Vec<Alt>,
}

/// Where grammar files come from.
#[derive(Debug, Clone)]
pub enum GrammarSource {
    Embedded,
    Dir(PathBuf),
}

impl GrammarSource {
    fn read(&self, name: &str) -> Result<String, GrammarLoadError> {
        match self {
            GrammarSource::Embedded => embedded(name)
                .map(str::to_string)
                .ok_or_else(|| GrammarLoadError { rule: name.into(), reason: "no such grammar file".into() }),
            GrammarSource::Dir(dir) => {
                let path = dir.join(format!("{name}.bnf"));
                std::fs::read_to_string(&path).map_err(|e| GrammarLoadError {
                    rule: name.into(),
                    reason: format!("cannot read {}: {e}", path.display()),
                })
            }
        }
    }
}

pub fn embedded(name: &str) -> Option<&'static str> {
    Some(match name {
        "RootVNS" => include_str!("../../data/grammars/RootVNS.bnf"),
        "RootShop" => include_str!("../../data/grammars/RootShop.bnf"),
        "RootExpense" => include_str!("../../data/grammars/RootExpense.bnf"),
        "Switch" => include_str!("../../data/grammars/Switch.bnf"),
        "ShoppingList" => include_str!("../../data/grammars/ShoppingList.bnf"),
        "ShopSearch" => include_str!("../../data/grammars/ShopSearch.bnf"),
        "Sheet" => include_str!("../../data/grammars/Sheet.bnf"),
        "SheetNav" => include_str!("../../data/grammars/SheetNav.bnf"),
        "ExpenseSheet" => include_str!("../../data/grammars/ExpenseSheet.bnf"),
        "ExpenseDialog" => include_str!("../../data/grammars/ExpenseDialog.bnf"),
        "Messages" => include_str!("../../data/grammars/Messages.bnf"),
        "CommonParser" => include_str!("../../data/grammars/CommonParser.bnf"),
        "CommonLexer" => include_str!("../../data/grammars/CommonLexer.bnf"),
        _ => return None,
    })
}

pub const EMBEDDED_FILES: [&str; 13] = [
    "RootVNS",
    "RootShop",
    "RootExpense",
    "Switch",
    "ShoppingList",
    "ShopSearch",
    "Sheet",
    "SheetNav",
    "ExpenseSheet",
    "ExpenseDialog",
    "Messages",
    "CommonParser",
    "CommonLexer",
];

/// A loaded, validated grammar hierarchy.
#[derive(Debug, Clone)]
pub struct GrammarSet {
    pub name: SetName,
    pub(crate) rules: Vec<Rule>,
    index: HashMap<String, usize>,
    /// Words of single-word literals. `<ID>` never matches these.
    pub(crate) keywords: BTreeSet<String>,
    /// Files in load order (root first).
    pub files: Vec<String>,
    raw: Vec<(String, Vec<Vec<RawTerm>>)>,
    lexer_rules: BTreeSet<String>,
}

impl GrammarSet {
    pub fn rule_names(&self) -> impl Iterator<Item = &str> {
        self.rules.iter().map(|r| r.name.as_str())
    }

    pub fn has_rule(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub(crate) fn rule_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn is_keyword(&self, word: &str) -> bool {
        self.keywords.contains(word)
    }

    pub fn keywords(&self) -> &BTreeSet<String> {
        &self.keywords
    }

    /// Alternatives of a rule whose every alternative is a single literal,
    /// returned as the literal texts (e.g. the `wake` rule).
    pub fn literal_alternatives(&self, name: &str) -> Option<Vec<String>> {
        let rule = &self.rules[self.rule_index(name)?];
        rule.alts
            .iter()
            .map(|a| match a.terms.as_slice() {
                [Term::Lit(words)] => Some(words.join(" ")),
                _ => None,
            })
            .collect()
    }

    /// Words appearing in any literal reachable from `name`.
    pub fn literal_words(&self, name: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut seen = BTreeSet::new();
        if let Some(i) = self.rule_index(name) {
            self.collect_words(i, &mut seen, &mut out);
        }
        out
    }

    fn collect_words(&self, rule: usize, seen: &mut BTreeSet<usize>, out: &mut BTreeSet<String>) {
        if !seen.insert(rule) {
            return;
        }
        fn walk(g: &GrammarSet, t: &Term, seen: &mut BTreeSet<usize>, out: &mut BTreeSet<String>) {
            match t {
                Term::Lit(w) => out.extend(w.iter().cloned()),
                Term::Rule(r) => g.collect_words(*r, seen, out),
                Term::Opt(t) | Term::Star(_, t) | Term::Plus(_, t) => walk(g, t, seen, out),
                Term::Group(alts) => {
                    for a in alts {
                        for t in &a.terms {
                            walk(g, t, seen, out);
                        }
                    }
                }
                Term::Tok(_) | Term::Ws => {}
            }
        }
        for a in &self.rules[rule].alts {
            for t in &a.terms {
                walk(self, t, seen, out);
            }
        }
    }

    /// Replace the alternatives of `rule` with one literal per entry. Used
    /// to load store names and similar lists from configuration.
    pub fn overlay_literals(&self, rule: &str, literals: &[String]) -> Result<GrammarSet, GrammarLoadError> {
        if !self.has_rule(rule) {
            return Err(GrammarLoadError { rule: rule.into(), reason: "overlay targets an undefined rule".into() });
        }
        if literals.is_empty() {
            return Err(GrammarLoadError { rule: rule.into(), reason: "overlay list is empty".into() });
        }
        let raw = self
            .raw
            .iter()
            .map(|(n, alts)| {
                if n == rule {
                    (n.clone(), literals.iter().map(|l| vec![RawTerm::Lit(l.clone())]).collect())
                } else {
                    (n.clone(), alts.clone())
                }
            })
            .collect();
        build(self.name, raw, self.lexer_rules.clone(), self.files.clone())
    }
}

/// Lexer rule names that map onto token kinds the tokenizer produces.
fn lexer_token(name: &str) -> Option<Term> {
    if name == "WS" {
        return Some(Term::Ws);
    }
    match TokenKind::from_grammar_name(name) {
        Some(k) if !k.is_hidden() => Some(Term::Tok(k)),
        _ => None,
    }
}

pub fn load_grammar_set(name: SetName) -> Result<GrammarSet, GrammarLoadError> {
    load_from(name, &GrammarSource::Embedded)
}

pub fn load_grammar_set_from_dir(name: SetName, dir: &Path) -> Result<GrammarSet, GrammarLoadError> {
    load_from(name, &GrammarSource::Dir(dir.to_path_buf()))
}

pub fn load_from(name: SetName, source: &GrammarSource) -> Result<GrammarSet, GrammarLoadError> {
    let root_name = name.root_file();
    let root = read_bnf(root_name, &source.read(root_name)?)?;
    let mut files = vec![root_name.to_string()];
    let mut parsed = vec![root.clone()];
    for imp in &root.imports {
        if files.contains(imp) {
            continue;
        }
        parsed.push(read_bnf(imp, &source.read(imp)?)?);
        files.push(imp.clone());
    }
    let mut raw: Vec<(String, Vec<Vec<RawTerm>>)> = Vec::new();
    let mut lexer_rules = BTreeSet::new();
    for f in &parsed {
        for r in &f.rules {
            if is_lexer_name(&r.name) {
                lexer_rules.insert(r.name.clone());
                continue;
            }
            // First definition wins: the root file, then imports in order.
            if !raw.iter().any(|(n, _)| n == &r.name) {
                raw.push((r.name.clone(), r.alts.clone()));
            }
        }
    }
    build(name, raw, lexer_rules, files)
}

fn is_lexer_name(name: &str) -> bool {
    name.chars().any(|c| c.is_ascii_uppercase()) && !name.chars().any(|c| c.is_ascii_lowercase())
}

fn build(
    name: SetName,
    raw: Vec<(String, Vec<Vec<RawTerm>>)>,
    lexer_rules: BTreeSet<String>,
    files: Vec<String>,
) -> Result<GrammarSet, GrammarLoadError> {
    let index: HashMap<String, usize> = raw.iter().enumerate().map(|(i, (n, _))| (n.clone(), i)).collect();
    if !index.contains_key("input") {
        return Err(GrammarLoadError { rule: "input".into(), reason: "grammar set has no input rule".into() });
    }
    let mut ctx = Compiler { index: &index, lexer_rules: &lexer_rules, next_id: 0, keywords: BTreeSet::new() };
    let mut rules = Vec::new();
    for (rname, alts) in &raw {
        let alts = alts
            .iter()
            .map(|seq| ctx.alt(rname, seq))
            .collect::<Result<Vec<_>, _>>()?;
        rules.push(Rule { name: rname.clone(), alts });
    }
    let keywords = ctx.keywords;
    Ok(GrammarSet { name, rules, index, keywords, files, raw, lexer_rules })
}

struct Compiler<'a> {
    index: &'a HashMap<String, usize>,
    lexer_rules: &'a BTreeSet<String>,
    next_id: usize,
    keywords: BTreeSet<String>,
}

impl Compiler<'_> {
    fn id(&mut self) -> usize {
        self.next_id += 1;
        self.next_id
    }

    fn alt(&mut self, rule: &str, seq: &[RawTerm]) -> Result<Alt, GrammarLoadError> {
        let terms = seq.iter().map(|t| self.term(rule, t)).collect::<Result<Vec<_>, _>>()?;
        Ok(Alt { id: self.id(), terms })
    }

    fn term(&mut self, rule: &str, t: &RawTerm) -> Result<Term, GrammarLoadError> {
        let fail = |reason: String| GrammarLoadError { rule: rule.to_string(), reason };
        Ok(match t {
            RawTerm::Lit(text) => {
                let toks = tokenize(&text.to_ascii_lowercase())
                    .map_err(|e| fail(format!("literal {text:?} is not lexable: {e}")))?;
                let words: Vec<(String, TokenKind)> =
                    toks.into_iter().filter(|t| !t.is_hidden()).map(|t| (t.lower, t.kind)).collect();
                if words.is_empty() {
                    return Err(fail(format!("empty literal {text:?}")));
                }
                if words.len() == 1 && words[0].1 == TokenKind::Id {
                    self.keywords.insert(words[0].0.clone());
                }
                Term::Lit(words.into_iter().map(|(w, _)| w).collect())
            }
            RawTerm::Ref(name) => {
                if let Some(&i) = self.index.get(name) {
                    Term::Rule(i)
                } else if is_lexer_name(name) {
                    if !self.lexer_rules.contains(name) {
                        return Err(fail(format!("undefined lexer rule <{name}>")));
                    }
                    lexer_token(name).ok_or_else(|| fail(format!("lexer rule <{name}> is not a token class")))?
                } else {
                    return Err(fail(format!("undefined rule <{name}>")));
                }
            }
            RawTerm::CharClass(c) => return Err(fail(format!("character class [{c}] in a parser rule"))),
            RawTerm::Group(alts) => {
                Term::Group(alts.iter().map(|a| self.alt(rule, a)).collect::<Result<Vec<_>, _>>()?)
            }
            RawTerm::Opt(inner) => Term::Opt(Box::new(self.term(rule, inner)?)),
            RawTerm::Star(inner) => {
                let t = self.term(rule, inner)?;
                Term::Star(self.id(), Box::new(t))
            }
            RawTerm::Plus(inner) => {
                let t = self.term(rule, inner)?;
                Term::Plus(self.id(), Box::new(t))
            }
        })
    }
}

/// Every loaded set, keyed by name.
#[derive(Debug, Clone)]
pub struct Grammars {
    pub sets: Vec<GrammarSet>,
}

impl Grammars {
    pub fn load(source: &GrammarSource, stores: Option<&[String]>) -> Result<Grammars, GrammarLoadError> {
        let mut sets = Vec::new();
        for n in SetName::ALL {
            let mut g = load_from(n, source)?;
            if let Some(list) = stores {
                if g.has_rule("store") {
                    g = g.overlay_literals("store", list)?;
                }
            }
            sets.push(g);
        }
        Ok(Grammars { sets })
    }

    pub fn get(&self, name: SetName) -> &GrammarSet {
        self.sets.iter().find(|g| g.name == name).expect("every set is loaded")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wake_alternatives() {
        let g = load_grammar_set(SetName::RootVns).unwrap();
        assert_eq!(
            g.literal_alternatives("wake").unwrap(),
            vec!["huey", "sigma", "sigmoid", "sigmund", "alexander", "alex"]
        );
    }

    #[test]
    fn shop_set_rules() {
        let g = load_grammar_set(SetName::RootShop).unwrap();
        for r in ["input", "stmt", "meta_shop", "stmt_shop_top", "add_item"] {
            assert!(g.has_rule(r), "{r}");
        }
        assert_eq!(g.files[0], "RootShop");
    }

    #[test]
    fn first_definition_wins() {
        let g = load_grammar_set(SetName::RootShop).unwrap();
        let i = g.rule_index("stmt_shop_top").unwrap();
        assert_eq!(g.rules[i].alts.len(), 3);
    }

    #[test]
    fn multiword_literal_words_stay_ids() {
        let g = load_grammar_set(SetName::RootShop).unwrap();
        assert!(g.is_keyword("add"));
        assert!(g.is_keyword("list"));
        assert!(!g.is_keyword("whole"));
    }

    #[test]
    fn missing_rule_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("RootVNS.bnf"), "<input> ::= <nothing_here>").unwrap();
        let e = load_grammar_set_from_dir(SetName::RootVns, dir.path()).unwrap_err();
        assert_eq!(e.rule, "input");
    }

    #[test]
    fn store_overlay() {
        let g = load_grammar_set(SetName::RootShop).unwrap();
        let g2 = g.overlay_literals("store", &["alpha beta".to_string(), "lidl".to_string()]).unwrap();
        assert_eq!(g2.literal_alternatives("store").unwrap(), vec!["alpha beta", "lidl"]);
        assert!(g.overlay_literals("nope", &["x".to_string()]).is_err());
    }
}
