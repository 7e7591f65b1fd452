//! Reader for the BNF dialect the grammar files are written in:
//! `<name> ::= alt | alt`, double-quoted literals, `?`/`*`/`+` postfix
//! quantifiers, parenthesized groups and `/* ... */` comments.
//!
//! A reference written as `<a|b>` is read as the group `(<a> | <b>)`.
//! Character classes such as `[0-9]` are accepted so the lexer grammar can
//! be read, but only lexer (upper-case) rules may use them.

use super::GrammarLoadError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RawTerm {
    Lit(String),
    Ref(String),
    CharClass(String),
    Group(Vec<Vec<RawTerm>>),
    Opt(Box<RawTerm>),
    Star(Box<RawTerm>),
    Plus(Box<RawTerm>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRule {
    pub name: String,
    pub alts: Vec<Vec<RawTerm>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawFile {
    pub rules: Vec<RawRule>,
    /// Grammar names listed by an `import A, B;` directive inside a comment.
    pub imports: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Name(String),
    Define,
    Lit(String),
    Class(String),
    LParen,
    RParen,
    Bar,
    Quant(char),
}

fn err(file: &str, reason: impl Into<String>) -> GrammarLoadError {
    GrammarLoadError { rule: file.to_string(), reason: reason.into() }
}

fn scan(file: &str, src: &str) -> Result<(Vec<Tok>, Vec<String>), GrammarLoadError> {
    let mut toks = Vec::new();
    let mut imports = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            let start = i + 2;
            let mut j = start;
            while j + 1 < chars.len() && !(chars[j] == '*' && chars[j + 1] == '/') {
                j += 1;
            }
            if j + 1 >= chars.len() {
                return Err(err(file, "unterminated comment"));
            }
            let body: String = chars[start..j].iter().collect();
            if let Some(rest) = body.trim().strip_prefix("import ") {
                let list = rest.trim().trim_end_matches(';');
                imports = list.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
            }
            i = j + 2;
        } else if c == '<' {
            let end = chars[i..]
                .iter()
                .position(|&ch| ch == '>')
                .ok_or_else(|| err(file, "unterminated rule reference"))?;
            let name: String = chars[i + 1..i + end].iter().collect();
            if name.trim().is_empty() {
                return Err(err(file, "empty rule reference"));
            }
            toks.push(Tok::Name(name.trim().to_string()));
            i += end + 1;
        } else if c == ':' && chars.get(i + 1) == Some(&':') && chars.get(i + 2) == Some(&'=') {
            toks.push(Tok::Define);
            i += 3;
        } else if c == '"' {
            let end = chars[i + 1..]
                .iter()
                .position(|&ch| ch == '"')
                .ok_or_else(|| err(file, "unterminated literal"))?;
            toks.push(Tok::Lit(chars[i + 1..i + 1 + end].iter().collect()));
            i += end + 2;
        } else if c == '[' {
            let end = chars[i..]
                .iter()
                .position(|&ch| ch == ']')
                .ok_or_else(|| err(file, "unterminated character class"))?;
            toks.push(Tok::Class(chars[i + 1..i + end].iter().collect()));
            i += end + 1;
        } else {
            toks.push(match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '|' => Tok::Bar,
                '?' | '*' | '+' => Tok::Quant(c),
                _ => return Err(err(file, format!("unexpected character {c:?}"))),
            });
            i += 1;
        }
    }
    Ok((toks, imports))
}

pub fn read_bnf(file: &str, src: &str) -> Result<RawFile, GrammarLoadError> {
    let (toks, imports) = scan(file, src)?;
    let mut starts = Vec::new();
    for (i, w) in toks.windows(2).enumerate() {
        if matches!(w[0], Tok::Name(_)) && w[1] == Tok::Define {
            starts.push(i);
        }
    }
    if let Some(&first) = starts.first() {
        if first != 0 {
            return Err(err(file, "text before the first rule"));
        }
    } else if !toks.is_empty() {
        return Err(err(file, "no rule definitions"));
    }
    let mut rules = Vec::new();
    for (k, &s) in starts.iter().enumerate() {
        let end = starts.get(k + 1).copied().unwrap_or(toks.len());
        let name = match &toks[s] {
            Tok::Name(n) => n.clone(),
            _ => unreachable!(),
        };
        let body = &toks[s + 2..end];
        let mut p = BodyParser { toks: body, pos: 0, rule: &name };
        let alts = p.alternatives()?;
        if p.pos != body.len() {
            return Err(err(&name, "unbalanced ')'"));
        }
        rules.push(RawRule { name, alts });
    }
    Ok(RawFile { rules, imports })
}

struct BodyParser<'a> {
    toks: &'a [Tok],
    pos: usize,
    rule: &'a str,
}

impl BodyParser<'_> {
    fn alternatives(&mut self) -> Result<Vec<Vec<RawTerm>>, GrammarLoadError> {
        let mut alts = vec![self.sequence()?];
        while self.toks.get(self.pos) == Some(&Tok::Bar) {
            self.pos += 1;
            alts.push(self.sequence()?);
        }
        Ok(alts)
    }

    fn sequence(&mut self) -> Result<Vec<RawTerm>, GrammarLoadError> {
        let mut seq = Vec::new();
        loop {
            let base = match self.toks.get(self.pos) {
                Some(Tok::Name(n)) => {
                    self.pos += 1;
                    if n.contains('|') {
                        let alts = n.split('|').map(|s| vec![RawTerm::Ref(s.trim().to_string())]).collect();
                        RawTerm::Group(alts)
                    } else {
                        RawTerm::Ref(n.clone())
                    }
                }
                Some(Tok::Lit(l)) => {
                    self.pos += 1;
                    RawTerm::Lit(l.clone())
                }
                Some(Tok::Class(c)) => {
                    self.pos += 1;
                    RawTerm::CharClass(c.clone())
                }
                Some(Tok::LParen) => {
                    self.pos += 1;
                    let alts = self.alternatives()?;
                    if self.toks.get(self.pos) != Some(&Tok::RParen) {
                        return Err(err(self.rule, "missing ')'"));
                    }
                    self.pos += 1;
                    RawTerm::Group(alts)
                }
                Some(Tok::Quant(q)) => return Err(err(self.rule, format!("quantifier '{q}' without a term"))),
                _ => break,
            };
            let mut term = base;
            while let Some(Tok::Quant(q)) = self.toks.get(self.pos) {
                self.pos += 1;
                term = match q {
                    '?' => RawTerm::Opt(Box::new(term)),
                    '*' => RawTerm::Star(Box::new(term)),
                    _ => RawTerm::Plus(Box::new(term)),
                };
            }
            seq.push(term);
        }
        if seq.is_empty() {
            return Err(err(self.rule, "empty alternative"));
        }
        Ok(seq)
    }
}
