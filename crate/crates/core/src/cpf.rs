//! Conversational privacy firewall.
//!
//! In strong incognito mode the firewall strips sentiment, open-ended offers
//! and filler structure from a parse tree before it is compiled, so that the
//! command reaching a skill carries only what the skill needs. Requests that
//! mention a safety word are passed through untouched and flagged.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::GrammarSet;
use crate::sexpr::SExpr;

pub const DEFAULT_LEXICON: &str = include_str!("../data/lexicon.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CpfMode {
    #[default]
    Off,
    /// Audio is not retained; the tree is left as parsed.
    SpeechIncognito,
    StrongIncognito,
}

impl CpfMode {
    pub fn parse(s: &str) -> Option<CpfMode> {
        match s.to_ascii_lowercase().replace(['-', '_'], " ").trim() {
            "off" | "none" => Some(CpfMode::Off),
            "speech" | "speech incognito" => Some(CpfMode::SpeechIncognito),
            "strong" | "strong incognito" | "incognito" => Some(CpfMode::StrongIncognito),
            _ => None,
        }
    }
}

impl fmt::Display for CpfMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CpfMode::Off => "off",
            CpfMode::SpeechIncognito => "speech-incognito",
            CpfMode::StrongIncognito => "strong-incognito",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexiconError {
    #[error("lexicon line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("lexicon word {word:?} collides with grammar rule <{rule}>")]
    Overlap { word: String, rule: String },
    #[error("cannot read lexicon: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rewrite {
    Splice(String),
    Drop(String),
    Rename(String, String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SentimentLexicon {
    pub sentiment: BTreeSet<String>,
    pub safety: BTreeSet<String>,
    pub unbounded: BTreeSet<String>,
    pub remove: BTreeSet<String>,
    pub rewrites: Vec<Rewrite>,
}

/// Heads whose presence decides whether an offer is dropped. A rename onto
/// one of these could make a second pass erase more than the first.
const OFFER_HEADS: [&str; 2] = ["offer_price", "amount"];

impl SentimentLexicon {
    pub fn parse(text: &str) -> Result<SentimentLexicon, LexiconError> {
        let mut lex = SentimentLexicon::default();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = Some(name.trim().to_string());
                continue;
            }
            let err = |reason: &str| LexiconError::Parse { line: line_no, reason: reason.to_string() };
            let word = line.to_lowercase();
            match section.as_deref() {
                Some("sentiment") => {
                    lex.sentiment.insert(word);
                }
                Some("safety") => {
                    lex.safety.insert(word);
                }
                Some("unbounded") => {
                    lex.unbounded.insert(word);
                }
                Some("remove") => {
                    lex.remove.insert(line.to_string());
                }
                Some("rewrite") => {
                    let parts: Vec<&str> = line.split_whitespace().collect();
                    let r = match parts.as_slice() {
                        ["splice", h] => Rewrite::Splice(h.to_string()),
                        ["drop", h] => Rewrite::Drop(h.to_string()),
                        ["rename", a, b] => Rewrite::Rename(a.to_string(), b.to_string()),
                        _ => return Err(err("expected `splice HEAD`, `drop HEAD` or `rename FROM TO`")),
                    };
                    lex.rewrites.push(r);
                }
                Some(other) => return Err(err(&format!("unknown section [{other}]"))),
                None => return Err(err("entry before any section header")),
            }
            if section.as_deref() != Some("rewrite") && line.split_whitespace().count() != 1 {
                return Err(err("entries must be single words"));
            }
        }
        for r in &lex.rewrites {
            if let Rewrite::Rename(_, to) = r {
                let bad = OFFER_HEADS.contains(&to.as_str())
                    || lex.remove.contains(to)
                    || lex.rewrites.iter().any(|o| matches!(o, Rewrite::Splice(h) | Rewrite::Drop(h) if h == to));
                if bad {
                    return Err(LexiconError::Parse { line: 0, reason: format!("rename target {to} would be filtered again") });
                }
            }
        }
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<SentimentLexicon, LexiconError> {
        let text = std::fs::read_to_string(path).map_err(|e| LexiconError::Io(format!("{}: {e}", path.display())))?;
        SentimentLexicon::parse(&text)
    }

    pub fn default_lexicon() -> SentimentLexicon {
        SentimentLexicon::parse(DEFAULT_LEXICON).expect("embedded lexicon is valid")
    }

    /// Filter words must never be grammar verbs or determiners, otherwise
    /// erasing them would change what a command does.
    pub fn validate(&self, g: &GrammarSet) -> Result<(), LexiconError> {
        for rule in ["verb", "det"] {
            let words = g.literal_words(rule);
            for w in self.sentiment.iter().chain(&self.unbounded) {
                if words.contains(w) {
                    return Err(LexiconError::Overlap { word: w.clone(), rule: rule.into() });
                }
            }
        }
        Ok(())
    }

    fn rewrite_for(&self, head: &str) -> Option<&Rewrite> {
        self.rewrites.iter().find(|r| match r {
            Rewrite::Splice(h) | Rewrite::Drop(h) | Rewrite::Rename(h, _) => h == head,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterOutcome {
    pub filtered: SExpr,
    pub removed_words: BTreeSet<String>,
    pub safety_flag: bool,
}

pub struct Firewall {
    pub lexicon: SentimentLexicon,
}

impl Firewall {
    pub fn new(lexicon: SentimentLexicon) -> Firewall {
        Firewall { lexicon }
    }

    pub fn filter(&self, tree: &SExpr, mode: CpfMode) -> FilterOutcome {
        let unchanged = |flag| FilterOutcome { filtered: tree.clone(), removed_words: BTreeSet::new(), safety_flag: flag };
        let lex = &self.lexicon;
        let safety = tree.leaves().iter().any(|w| lex.safety.contains(&w.to_lowercase()));
        if mode != CpfMode::StrongIncognito || safety {
            return unchanged(safety);
        }

        let mut erased = false;
        let pruned = self.erase(tree, &mut erased);
        if !erased {
            return unchanged(false);
        }
        let filtered = match pruned {
            Some(t) => self.rewrite_root(t),
            None => SExpr::node(tree.head(), Vec::new()),
        };
        let kept: BTreeSet<String> = filtered.leaves().iter().map(|w| w.to_lowercase()).collect();
        let removed_words = tree
            .leaves()
            .iter()
            .map(|w| w.to_lowercase())
            .filter(|w| !kept.contains(w))
            .collect();
        FilterOutcome { filtered, removed_words, safety_flag: false }
    }

    fn erase(&self, t: &SExpr, erased: &mut bool) -> Option<SExpr> {
        let lex = &self.lexicon;
        match t {
            SExpr::Atom(w) => {
                if lex.sentiment.contains(&w.to_lowercase()) {
                    *erased = true;
                    None
                } else {
                    Some(t.clone())
                }
            }
            SExpr::Node { head, children } => {
                if lex.remove.contains(head) || (head == "offer_price" && self.unbounded_offer(t)) {
                    *erased = true;
                    return None;
                }
                let children = children.iter().filter_map(|c| self.erase(c, erased)).collect();
                Some(SExpr::node(head.clone(), children))
            }
        }
    }

    fn unbounded_offer(&self, offer: &SExpr) -> bool {
        let mut hit = false;
        offer.walk_nodes(&mut |n| {
            if n.head() == "amount" && n.leaves().iter().any(|w| self.lexicon.unbounded.contains(&w.to_lowercase())) {
                hit = true;
            }
        });
        hit
    }

    fn rewrite_root(&self, t: SExpr) -> SExpr {
        let head = t.head().to_string();
        let mut out = self.rewrite(t);
        if out.len() == 1 && out[0].is_node() {
            return out.remove(0);
        }
        // The root was spliced into several pieces or dropped; keep a root node.
        let head = match self.lexicon.rewrite_for(&head) {
            Some(Rewrite::Rename(_, to)) => to.clone(),
            _ => head,
        };
        SExpr::node(head, out)
    }

    fn rewrite(&self, t: SExpr) -> Vec<SExpr> {
        let (head, children) = match t {
            SExpr::Atom(_) => return vec![t],
            SExpr::Node { head, children } => (head, children),
        };
        let children: Vec<SExpr> = children.into_iter().flat_map(|c| self.rewrite(c)).collect();
        match self.lexicon.rewrite_for(&head) {
            Some(Rewrite::Drop(_)) => Vec::new(),
            Some(Rewrite::Splice(_)) => children,
            _ if children.is_empty() => Vec::new(),
            Some(Rewrite::Rename(_, to)) => vec![SExpr::node(to.clone(), children)],
            None => vec![SExpr::node(head, children)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("filtered tree introduces {word:?}")]
pub struct MonotoneViolation {
    pub word: String,
}

/// Every leaf of `filtered` must come from `original`, counted with
/// multiplicity.
pub fn assert_monotone(original: &SExpr, filtered: &SExpr) -> Result<(), MonotoneViolation> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for w in original.leaves() {
        *counts.entry(w).or_default() += 1;
    }
    for w in filtered.leaves() {
        match counts.get_mut(w) {
            Some(n) if *n > 0 => *n -= 1,
            _ => return Err(MonotoneViolation { word: w.to_string() }),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{load_grammar_set, SetName};
    use crate::sexpr::{parse_sexpr, print_canonical};

    const FIXTURE: &str = "(input (stmt (stmt_shop_top (stmt_shop_search (subject I) (search_item (search need) (qty 2) (bundled_item (unit tickets) (for_of for) (det the) (when Sunday) (item red sox game))) (offer_price (amount any)) (sentiment_literal desperately need)))))";

    fn fw() -> Firewall {
        Firewall::new(SentimentLexicon::default_lexicon())
    }

    #[test]
    fn red_sox_fixture() {
        let t = parse_sexpr(FIXTURE).unwrap();
        let out = fw().filter(&t, CpfMode::StrongIncognito);
        assert_eq!(
            print_canonical(&out.filtered),
            "(action_shop (shop_search (search_item (qty 2) (unit tickets) (when Sunday) (item red sox game))))"
        );
        for w in ["desperately", "need", "any"] {
            assert!(out.removed_words.contains(w), "{w}");
        }
        assert!(!out.safety_flag);
        assert_monotone(&t, &out.filtered).unwrap();
    }

    #[test]
    fn safety_passes_through() {
        let t = parse_sexpr("(input (stmt (subject i) (sentiment_literal desperately) (x need help)))").unwrap();
        let out = fw().filter(&t, CpfMode::StrongIncognito);
        assert!(out.safety_flag);
        assert_eq!(out.filtered, t);
        assert!(out.removed_words.is_empty());
    }

    #[test]
    fn other_modes_do_nothing() {
        let t = parse_sexpr(FIXTURE).unwrap();
        for m in [CpfMode::Off, CpfMode::SpeechIncognito] {
            assert_eq!(fw().filter(&t, m).filtered, t);
        }
    }

    #[test]
    fn untouched_when_nothing_erased() {
        let t = parse_sexpr("(input (stmt (add_item (add add) (item bananas) (det the))))").unwrap();
        assert_eq!(fw().filter(&t, CpfMode::StrongIncognito).filtered, t);
    }

    #[test]
    fn bounded_offer_is_kept() {
        let t = parse_sexpr("(input (stmt (x (sentiment_literal really) (offer_price (amount 200 dollars)))))").unwrap();
        let out = fw().filter(&t, CpfMode::StrongIncognito);
        assert_eq!(print_canonical(&out.filtered), "(x (offer_price (amount 200 dollars)))");
    }

    #[test]
    fn lexicon_errors() {
        assert!(matches!(SentimentLexicon::parse("word"), Err(LexiconError::Parse { line: 1, .. })));
        assert!(SentimentLexicon::parse("[rewrite]\nexplode x").is_err());
        assert!(SentimentLexicon::parse("[nope]\nx").is_err());
        assert!(SentimentLexicon::parse("[rewrite]\nrename a amount").is_err());
        assert!(SentimentLexicon::parse("[sentiment]\ntwo words").is_err());
    }

    #[test]
    fn validates_against_grammar() {
        let g = load_grammar_set(SetName::RootShop).unwrap();
        fw().lexicon.validate(&g).unwrap();
        let bad = SentimentLexicon::parse("[sentiment]\nthe").unwrap();
        assert!(matches!(bad.validate(&g), Err(LexiconError::Overlap { .. })));
    }

    #[test]
    fn monotone_counts_multiplicity() {
        let a = parse_sexpr("(x a b)").unwrap();
        let b = parse_sexpr("(x a a)").unwrap();
        assert!(assert_monotone(&a, &b).is_err());
        assert!(assert_monotone(&b, &a).is_err());
        assert!(assert_monotone(&a, &parse_sexpr("(y (z b))").unwrap()).is_ok());
    }
}
