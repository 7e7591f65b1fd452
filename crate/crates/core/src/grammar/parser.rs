//! Memoized backtracking matcher.
//!
//! Every rule, sequence suffix and repetition is evaluated to the ordered
//! list of positions it can end at, each paired with the subtree built on
//! the way. The order is the preference order (alternatives in grammar
//! order, repetitions greedy, optional terms tried before skipping). Only
//! the first tree for a given end position is kept.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use super::{Alt, GrammarSet, SetName, Term};
use crate::lexicon::{tokenize, visible, LexError, Token, TokenKind};
use crate::sexpr::SExpr;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseResult {
    pub tree: SExpr,
    /// Number of visible tokens covered, including trailing terminators.
    pub consumed: usize,
    pub grammar: SetName,
    /// Index of the `input` alternative that matched.
    pub matched_rule: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no parse: stopped at token {position}, expected {}", fmt_expected(.expected))]
    NoMatch { position: usize, expected: Vec<String> },
    #[error(transparent)]
    Lex(#[from] LexError),
}

fn fmt_expected(e: &[String]) -> String {
    if e.is_empty() {
        "end of input".to_string()
    } else {
        e.join(" or ")
    }
}

type Partial = Vec<(usize, Vec<SExpr>)>;

fn push_unique(out: &mut Partial, end: usize, children: Vec<SExpr>) {
    if !out.iter().any(|(e, _)| *e == end) {
        out.push((end, children));
    }
}

struct Matcher<'g> {
    g: &'g GrammarSet,
    toks: Vec<(Token, bool)>,
    rule_memo: HashMap<(usize, usize), Vec<(usize, SExpr)>>,
    seq_memo: HashMap<(usize, usize, usize), Partial>,
    rep_memo: HashMap<(usize, usize), Partial>,
    active: HashSet<(usize, usize)>,
    furthest: usize,
    expected: BTreeSet<String>,
}

impl<'g> Matcher<'g> {
    fn fail(&mut self, pos: usize, what: String) {
        if pos > self.furthest {
            self.furthest = pos;
            self.expected.clear();
        }
        if pos == self.furthest {
            self.expected.insert(what);
        }
    }

    fn rule(&mut self, r: usize, pos: usize) -> Vec<(usize, SExpr)> {
        if let Some(m) = self.rule_memo.get(&(r, pos)) {
            return m.clone();
        }
        if !self.active.insert((r, pos)) {
            return Vec::new();
        }
        let g = self.g;
        let rule = &g.rules[r];
        let mut out: Vec<(usize, SExpr)> = Vec::new();
        for alt in &rule.alts {
            for (end, children) in self.seq(alt, 0, pos) {
                if !out.iter().any(|(e, _)| *e == end) {
                    out.push((end, SExpr::node(rule.name.clone(), children)));
                }
            }
        }
        self.active.remove(&(r, pos));
        self.rule_memo.insert((r, pos), out.clone());
        out
    }

    fn seq(&mut self, alt: &'g Alt, i: usize, pos: usize) -> Partial {
        if i == alt.terms.len() {
            return vec![(pos, Vec::new())];
        }
        let key = (alt.id, i, pos);
        if let Some(m) = self.seq_memo.get(&key) {
            return m.clone();
        }
        let mut out = Vec::new();
        for (e1, c1) in self.term(&alt.terms[i], pos) {
            for (e2, c2) in self.seq(alt, i + 1, e1) {
                if out.iter().any(|(e, _)| *e == e2) {
                    continue;
                }
                let mut c = c1.clone();
                c.extend(c2);
                out.push((e2, c));
            }
        }
        self.seq_memo.insert(key, out.clone());
        out
    }

    fn term(&mut self, t: &'g Term, pos: usize) -> Partial {
        match t {
            Term::Lit(words) => {
                let ok = words.iter().enumerate().all(|(k, w)| {
                    self.toks.get(pos + k).is_some_and(|(tok, _)| &tok.lower == w)
                });
                if ok {
                    let atoms = words.iter().map(|w| SExpr::atom(w.clone())).collect();
                    vec![(pos + words.len(), atoms)]
                } else {
                    self.fail(pos, format!("\"{}\"", words.join(" ")));
                    Vec::new()
                }
            }
            Term::Tok(kind) => {
                let hit = self.toks.get(pos).and_then(|(tok, _)| {
                    let keyword = *kind == TokenKind::Id && self.g.is_keyword(&tok.lower);
                    (tok.has_class(*kind) && !keyword).then(|| {
                        if tok.kind == TokenKind::Id {
                            tok.lower.clone()
                        } else {
                            tok.text.clone()
                        }
                    })
                });
                match hit {
                    Some(text) => vec![(pos + 1, vec![SExpr::atom(text)])],
                    None => {
                        self.fail(pos, format!("<{}>", kind.grammar_name()));
                        Vec::new()
                    }
                }
            }
            Term::Ws => {
                if self.toks.get(pos).is_some_and(|(_, ws)| *ws) {
                    vec![(pos, Vec::new())]
                } else {
                    self.fail(pos, "<WS>".to_string());
                    Vec::new()
                }
            }
            Term::Rule(r) => self.rule(*r, pos).into_iter().map(|(e, n)| (e, vec![n])).collect(),
            Term::Opt(inner) => {
                let mut out = self.term(inner, pos);
                push_unique(&mut out, pos, Vec::new());
                out
            }
            Term::Star(id, inner) => self.repeat(*id, inner, pos),
            Term::Plus(id, inner) => {
                let mut out = Vec::new();
                for (e1, c1) in self.term(inner, pos) {
                    for (e2, c2) in self.repeat(*id, inner, e1) {
                        if out.iter().any(|(e, _)| *e == e2) {
                            continue;
                        }
                        let mut c = c1.clone();
                        c.extend(c2);
                        out.push((e2, c));
                    }
                }
                out
            }
            Term::Group(alts) => {
                let mut out = Vec::new();
                for alt in alts {
                    for (e, c) in self.seq(alt, 0, pos) {
                        push_unique(&mut out, e, c);
                    }
                }
                out
            }
        }
    }

    /// Zero or more non-empty iterations of `inner`, longest first.
    fn repeat(&mut self, id: usize, inner: &'g Term, pos: usize) -> Partial {
        if let Some(m) = self.rep_memo.get(&(id, pos)) {
            return m.clone();
        }
        let mut out = Vec::new();
        for (e1, c1) in self.term(inner, pos) {
            if e1 == pos {
                continue;
            }
            for (e2, c2) in self.repeat(id, inner, e1) {
                if out.iter().any(|(e, _)| *e == e2) {
                    continue;
                }
                let mut c = c1.clone();
                c.extend(c2);
                out.push((e2, c));
            }
        }
        push_unique(&mut out, pos, Vec::new());
        self.rep_memo.insert((id, pos), out.clone());
        out
    }
}

/// Parse a token stream (hidden tokens allowed) against `g`.
///
/// The parse must cover every visible token, except that trailing `.` and
/// `!` terminators may be left over; they do not appear in the tree.
pub fn parse(g: &GrammarSet, tokens: &[Token]) -> Result<ParseResult, ParseError> {
    let toks = visible(tokens);
    let n = toks.len();
    let tail_ok: Vec<bool> = (0..=n)
        .map(|p| toks[p..].iter().all(|(t, _)| matches!(t.kind, TokenKind::Dot | TokenKind::Bang)))
        .collect();
    let mut m = Matcher {
        g,
        toks,
        rule_memo: HashMap::new(),
        seq_memo: HashMap::new(),
        rep_memo: HashMap::new(),
        active: HashSet::new(),
        furthest: 0,
        expected: BTreeSet::new(),
    };
    let input = g.rule_index("input").expect("validated at load");
    let rule = &g.rules[input];
    if n > 0 {
        m.active.insert((input, 0));
        for (ai, alt) in rule.alts.iter().enumerate() {
            for (end, children) in m.seq(alt, 0, 0) {
                if end == n || (end > 0 && tail_ok[end]) {
                    return Ok(ParseResult {
                        tree: SExpr::node("input", children),
                        consumed: n,
                        grammar: g.name,
                        matched_rule: ai,
                    });
                }
            }
        }
    }
    let position = m.furthest;
    if position < n {
        m.fail(position, String::new());
    }
    let expected = m.expected.into_iter().filter(|s| !s.is_empty()).collect();
    Err(ParseError::NoMatch { position, expected })
}

pub fn parse_text(g: &GrammarSet, text: &str) -> Result<ParseResult, ParseError> {
    let tokens = tokenize(text)?;
    parse(g, &tokens)
}

impl fmt::Display for ParseResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.tree)
    }
}
