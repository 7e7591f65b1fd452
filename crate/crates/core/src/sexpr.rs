//! S-expression values: the tree shape shared by the parser, the privacy
//! filter and the Jak compiler.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SExpr {
    Atom(String),
    Node { head: String, children: Vec<SExpr> },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SexprError {
    #[error("s-expression syntax error at byte {position}: {reason}")]
    Syntax { position: usize, reason: String },
}

impl SExpr {
    pub fn atom(text: impl Into<String>) -> SExpr {
        SExpr::Atom(text.into())
    }

    pub fn node(head: impl Into<String>, children: Vec<SExpr>) -> SExpr {
        SExpr::Node { head: head.into(), children }
    }

    /// Head of a node, or the text of an atom.
    pub fn head(&self) -> &str {
        match self {
            SExpr::Atom(t) => t,
            SExpr::Node { head, .. } => head,
        }
    }

    pub fn children(&self) -> &[SExpr] {
        match self {
            SExpr::Atom(_) => &[],
            SExpr::Node { children, .. } => children,
        }
    }

    pub fn is_node(&self) -> bool {
        matches!(self, SExpr::Node { .. })
    }

    /// Leaf words in left-to-right order. Node heads are not leaves, so an
    /// empty production contributes nothing.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            SExpr::Atom(t) => out.push(t),
            SExpr::Node { children, .. } => {
                for c in children {
                    c.collect_leaves(out);
                }
            }
        }
    }

    /// Visit every node (not atoms) in pre-order.
    pub fn walk_nodes<'a>(&'a self, f: &mut dyn FnMut(&'a SExpr)) {
        if let SExpr::Node { children, .. } = self {
            f(self);
            for c in children {
                c.walk_nodes(f);
            }
        }
    }

    pub fn contains_head(&self, name: &str) -> bool {
        !extract(self, name).is_empty()
    }
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_canonical(self))
    }
}

pub fn print_canonical(x: &SExpr) -> String {
    let mut s = String::new();
    write_canonical(x, &mut s);
    s
}

fn write_canonical(x: &SExpr, out: &mut String) {
    match x {
        SExpr::Atom(t) => out.push_str(t),
        SExpr::Node { head, children } if children.is_empty() => out.push_str(head),
        SExpr::Node { head, children } => {
            out.push('(');
            out.push_str(head);
            for c in children {
                out.push(' ');
                write_canonical(c, out);
            }
            out.push(')');
        }
    }
}

pub fn parse_sexpr(text: &str) -> Result<SExpr, SexprError> {
    let mut p = Reader { src: text, pos: 0 };
    p.skip_ws();
    let value = p.value()?;
    p.skip_ws();
    if p.pos != text.len() {
        return Err(p.err("trailing input after expression"));
    }
    Ok(value)
}

struct Reader<'a> {
    src: &'a str,
    pos: usize,
}

impl Reader<'_> {
    fn err(&self, reason: &str) -> SexprError {
        SexprError::Syntax { position: self.pos, reason: reason.to_string() }
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b) if b.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn word(&mut self) -> Option<String> {
        let start = self.pos;
        while matches!(self.peek(), Some(b) if !b.is_ascii_whitespace() && b != b'(' && b != b')') {
            self.pos += 1;
        }
        (self.pos > start).then(|| self.src[start..self.pos].to_string())
    }

    fn value(&mut self) -> Result<SExpr, SexprError> {
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(b')') => Err(self.err("unbalanced ')'")),
            Some(b'(') => {
                self.pos += 1;
                self.skip_ws();
                let head = self.word().ok_or_else(|| self.err("empty node or missing head"))?;
                let mut children = Vec::new();
                loop {
                    self.skip_ws();
                    match self.peek() {
                        None => return Err(self.err("missing ')'")),
                        Some(b')') => {
                            self.pos += 1;
                            return Ok(SExpr::Node { head, children });
                        }
                        _ => children.push(self.value()?),
                    }
                }
            }
            Some(_) => Ok(SExpr::Atom(self.word().expect("non-delimiter byte"))),
        }
    }
}

/// Leaf words joined with single spaces.
pub fn leaves_text(x: &SExpr) -> String {
    x.leaves().join(" ")
}

/// All subtrees headed `rule_name`, in pre-order. Bare atoms that spell
/// the rule name are not included; they carry no content.
pub fn extract<'a>(tree: &'a SExpr, rule_name: &str) -> Vec<&'a SExpr> {
    let mut out = Vec::new();
    tree.walk_nodes(&mut |n| {
        if n.head() == rule_name {
            out.push(n);
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn printing() {
        assert_eq!(print_canonical(&SExpr::node("add", vec![SExpr::atom("add")])), "(add add)");
        assert_eq!(print_canonical(&SExpr::node("more_items", vec![])), "more_items");
        assert_eq!(print_canonical(&SExpr::atom("bananas")), "bananas");
    }

    #[test]
    fn parsing() {
        let x = parse_sexpr("(item red sox game)").unwrap();
        assert_eq!(x.head(), "item");
        assert_eq!(x.children().len(), 3);
        assert!(parse_sexpr("(a (b) c").is_err());
        assert!(parse_sexpr("()").is_err());
        assert!(parse_sexpr("(a) b").is_err());
    }

    #[test]
    fn leaves() {
        assert_eq!(leaves_text(&parse_sexpr("(qty 2)").unwrap()), "2");
        assert_eq!(leaves_text(&SExpr::node("more_items", vec![])), "");
    }

    #[test]
    fn punctuation_atoms_survive() {
        let s = "(meta (attn hi) (wake huey) (ignore ,))";
        assert_eq!(print_canonical(&parse_sexpr(s).unwrap()), s);
    }
}
