//! Jak: the small intermediate language requests compile to.
//!
//! A program is a list of `set`, `call` and `constant` statements, one per
//! line:
//!
//! ```text
//! set(shoppingList, "shopping list")
//! set(add_item, "bananas")
//! call(shoppingHandler, add_item, shoppingList)
//! ```

mod compile;
mod exec;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::numbers::Fixed;

pub use compile::{words_value, CompileError, DEFAULT_RULES, DEFAULT_SLOTS, Compiler, Occurrence, RuleRow, RuleTable, Selection, SkillKind, SlotSchema, SlotSpec};
pub use exec::{execute, Arg, CallArgs, CallOutcome, Engine, EngineError, EngineRegistry, ExecutionResult, JakError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JakValue {
    String(String),
    Number(Fixed),
    Symbol(String),
}

impl JakValue {
    pub fn as_text(&self) -> String {
        match self {
            JakValue::String(s) | JakValue::Symbol(s) => s.clone(),
            JakValue::Number(n) => n.to_string(),
        }
    }

    pub fn as_number(&self) -> Option<Fixed> {
        match self {
            JakValue::Number(n) => Some(*n),
            JakValue::String(s) => s.parse().ok(),
            JakValue::Symbol(_) => None,
        }
    }
}

impl fmt::Display for JakValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JakValue::String(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        _ => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
            JakValue::Number(n) => write!(f, "{n}"),
            JakValue::Symbol(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JakStatement {
    Set { name: String, value: JakValue },
    SetRecord { name: String, fields: Vec<(String, JakValue)> },
    Call { target: String, args: Vec<String> },
    Constant { name: String, value: JakValue },
}

impl fmt::Display for JakStatement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JakStatement::Set { name, value } => write!(f, "set({name}, {value})"),
            JakStatement::SetRecord { name, fields } => {
                write!(f, "set({name}")?;
                for (k, v) in fields {
                    write!(f, ", {k}={v}")?;
                }
                f.write_str(")")
            }
            JakStatement::Call { target, args } => {
                write!(f, "call({target}")?;
                for a in args {
                    write!(f, ", {a}")?;
                }
                f.write_str(")")
            }
            JakStatement::Constant { name, value } => write!(f, "constant({name}, {value})"),
        }
    }
}

/// A compiled program. Equality ignores `provenance`.
#[derive(Debug, Clone, Default)]
pub struct JakProgram {
    pub statements: Vec<JakStatement>,
    /// SHA-256 of the canonical s-expression the program was compiled from.
    pub provenance: Option<String>,
}

impl PartialEq for JakProgram {
    fn eq(&self, other: &Self) -> bool {
        self.statements == other.statements
    }
}

impl Eq for JakProgram {}

impl JakProgram {
    pub fn new(statements: Vec<JakStatement>) -> JakProgram {
        JakProgram { statements, provenance: None }
    }

    /// Call arguments and symbol values that no earlier statement binds.
    pub fn unresolved(&self) -> Vec<String> {
        let mut bound = BTreeSet::new();
        let mut out = Vec::new();
        for s in &self.statements {
            match s {
                JakStatement::Set { name, value } | JakStatement::Constant { name, value } => {
                    if let JakValue::Symbol(sym) = value {
                        if !bound.contains(sym) {
                            out.push(sym.clone());
                        }
                    }
                    bound.insert(name.clone());
                }
                JakStatement::SetRecord { name, fields } => {
                    for (_, v) in fields {
                        if let JakValue::Symbol(sym) = v {
                            if !bound.contains(sym) {
                                out.push(sym.clone());
                            }
                        }
                    }
                    bound.insert(name.clone());
                }
                JakStatement::Call { args, .. } => {
                    out.extend(args.iter().filter(|a| !bound.contains(*a)).cloned());
                }
            }
        }
        out
    }

    /// Every word appearing in the printed program (identifiers, string
    /// contents split on whitespace, numbers).
    pub fn words(&self) -> BTreeSet<String> {
        print_jak(self)
            .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '.'))
            .filter(|w| !w.is_empty())
            .map(|w| w.to_ascii_lowercase())
            .collect()
    }
}

pub fn print_jak(p: &JakProgram) -> String {
    p.statements.iter().map(|s| format!("{s}\n")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("Jak syntax error on line {line}: {reason}")]
pub struct JakSyntaxError {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Lx {
    Ident(String),
    Num(Fixed),
    Str(String),
    LParen,
    RParen,
    Comma,
    Eq,
}

fn lex_line(line: &str) -> Result<Vec<Lx>, String> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' | '\r' => i += 1,
            '(' => {
                out.push(Lx::LParen);
                i += 1;
            }
            ')' => {
                out.push(Lx::RParen);
                i += 1;
            }
            ',' => {
                out.push(Lx::Comma);
                i += 1;
            }
            '=' => {
                out.push(Lx::Eq);
                i += 1;
            }
            '"' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return Err("unterminated string".into()),
                        Some('"') => {
                            i += 1;
                            break;
                        }
                        Some('\\') => {
                            match chars.get(i + 1) {
                                Some('n') => s.push('\n'),
                                Some(&e @ ('"' | '\\')) => s.push(e),
                                _ => return Err("bad escape in string".into()),
                            }
                            i += 2;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                out.push(Lx::Str(s));
            }
            c if c.is_ascii_digit() || c == '-' => {
                let start = i;
                i += 1;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                out.push(Lx::Num(text.parse().map_err(|_| format!("bad number {text:?}"))?));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Lx::Ident(chars[start..i].iter().collect()));
            }
            _ => return Err(format!("unexpected character {c:?}")),
        }
    }
    Ok(out)
}

fn value_of(t: &Lx) -> Option<JakValue> {
    Some(match t {
        Lx::Ident(s) => JakValue::Symbol(s.clone()),
        Lx::Num(n) => JakValue::Number(*n),
        Lx::Str(s) => JakValue::String(s.clone()),
        _ => return None,
    })
}

fn parse_statement(line: &str) -> Result<JakStatement, String> {
    let toks = lex_line(line)?;
    let (kw, rest) = match toks.split_first() {
        Some((Lx::Ident(k), rest)) => (k.as_str(), rest),
        _ => return Err("expected set, call or constant".into()),
    };
    if rest.first() != Some(&Lx::LParen) {
        return Err("expected '('".into());
    }
    if rest.last() != Some(&Lx::RParen) || rest.len() < 2 {
        return Err("expected ')' at end of statement".into());
    }
    let inner = &rest[1..rest.len() - 1];
    // Split the argument list on commas.
    let mut args: Vec<&[Lx]> = Vec::new();
    if !inner.is_empty() {
        args = inner.split(|t| *t == Lx::Comma).collect();
    }
    if args.iter().any(|a| a.is_empty()) {
        return Err("empty argument".into());
    }
    let name = match args.first() {
        Some([Lx::Ident(n)]) => n.clone(),
        _ => return Err("first argument must be an identifier".into()),
    };
    match kw {
        "call" => {
            let mut out = Vec::new();
            for a in &args[1..] {
                match a {
                    [Lx::Ident(s)] => out.push(s.clone()),
                    _ => return Err("call arguments must be identifiers".into()),
                }
            }
            Ok(JakStatement::Call { target: name, args: out })
        }
        "set" | "constant" => {
            if args.len() < 2 {
                return Err(format!("{kw} needs a value"));
            }
            let is_record = args[1..].iter().any(|a| a.len() == 3 && a[1] == Lx::Eq);
            if is_record {
                if kw == "constant" {
                    return Err("constant cannot hold a record".into());
                }
                let mut fields = Vec::new();
                for a in &args[1..] {
                    match a {
                        [Lx::Ident(k), Lx::Eq, v] => {
                            let v = value_of(v).ok_or("bad field value")?;
                            fields.push((k.clone(), v));
                        }
                        _ => return Err("record fields must be key=value".into()),
                    }
                }
                return Ok(JakStatement::SetRecord { name, fields });
            }
            if args.len() != 2 {
                return Err(format!("{kw} takes a name and one value"));
            }
            let value = match args[1] {
                [v] => value_of(v).ok_or("bad value")?,
                _ => return Err("bad value".into()),
            };
            Ok(if kw == "set" {
                JakStatement::Set { name, value }
            } else {
                JakStatement::Constant { name, value }
            })
        }
        other => Err(format!("unknown statement {other:?}")),
    }
}

pub fn parse_jak(text: &str) -> Result<JakProgram, JakSyntaxError> {
    let mut statements = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let s = parse_statement(line).map_err(|reason| JakSyntaxError { line: i + 1, reason })?;
        statements.push(s);
    }
    Ok(JakProgram::new(statements))
}
