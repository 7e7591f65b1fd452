//! Golden corpus replay. Each line is `input<TAB>kind<TAB>expected` where
//! kind is `sexpr` (the canonical parse of the input) or `response` (what
//! the shell answers). Response lines run in order through one shell, so
//! they may depend on earlier lines. In `expected`, `\n` stands for a line
//! break and `\t` for a tab.

use std::fmt;

use thiserror::Error;

use huey_core::sexpr::print_canonical;
use huey_core::shell::Shell;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Sexpr,
    Response,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Case {
    pub line: usize,
    pub input: String,
    pub kind: Kind,
    pub expected: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CorpusError {
    #[error("line {line}: expected input<TAB>kind<TAB>expected")]
    Shape { line: usize },
    #[error("line {line}: unknown kind {kind:?}, use sexpr or response")]
    Kind { line: usize, kind: String },
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

pub fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\n', "\\n").replace('\t', "\\t")
}

pub fn parse_corpus(text: &str) -> Result<Vec<Case>, CorpusError> {
    let mut cases = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
            continue;
        }
        let mut parts = raw.splitn(3, '\t');
        let (Some(input), Some(kind), Some(expected)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(CorpusError::Shape { line });
        };
        let kind = match kind.trim() {
            "sexpr" => Kind::Sexpr,
            "response" => Kind::Response,
            k => return Err(CorpusError::Kind { line, kind: k.into() }),
        };
        cases.push(Case { line, input: unescape(input), kind, expected: unescape(expected) });
    }
    Ok(cases)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub line: usize,
    pub input: String,
    pub expected: String,
    pub actual: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Report {
    pub total: usize,
    pub failures: Vec<Mismatch>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// What the shell produces for `case`. A response case drains any split
/// sub-requests and joins their answers with line breaks.
pub fn actual(shell: &mut Shell, case: &Case) -> String {
    match case.kind {
        Kind::Sexpr => match shell.parse_best(&case.input) {
            Some(r) => print_canonical(&r.tree),
            None => "<no parse>".into(),
        },
        Kind::Response => {
            shell.run_script([case.input.as_str()]).into_iter().map(|r| r.text).collect::<Vec<_>>().join("\n")
        }
    }
}

pub fn run_corpus(shell: &mut Shell, cases: &[Case]) -> Report {
    let mut report = Report { total: cases.len(), failures: Vec::new() };
    for case in cases {
        let got = actual(shell, case);
        if got != case.expected {
            report.failures.push(Mismatch { line: case.line, input: case.input.clone(), expected: case.expected.clone(), actual: got });
        }
    }
    report
}

impl fmt::Display for Mismatch {
    /// One unified-diff hunk per mismatch.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let exp: Vec<&str> = self.expected.split('\n').collect();
        let act: Vec<&str> = self.actual.split('\n').collect();
        writeln!(f, "--- expected (line {})", self.line)?;
        writeln!(f, "+++ actual")?;
        writeln!(f, "@@ -1,{} +1,{} @@ {}", exp.len(), act.len(), self.input)?;
        let common = exp.iter().zip(&act).take_while(|(a, b)| a == b).count();
        for l in &exp[..common] {
            writeln!(f, " {l}")?;
        }
        for l in &exp[common..] {
            writeln!(f, "-{l}")?;
        }
        for l in &act[common..] {
            writeln!(f, "+{l}")?;
        }
        Ok(())
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in &self.failures {
            write!(f, "{m}")?;
        }
        writeln!(f, "{} cases, {} passed, {} failed", self.total, self.total - self.failures.len(), self.failures.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_escapes() {
        let text = "# comment\n\nadd bananas\tresponse\t[OK]\nshow my list\tresponse\t[OK]\\nshopping list:\\n1 bananas\n";
        let cases = parse_corpus(text).unwrap();
        assert_eq!(cases.len(), 2);
        assert_eq!(cases[1].line, 4);
        assert_eq!(cases[1].expected, "[OK]\nshopping list:\n1 bananas");
        assert_eq!(unescape(&escape("a\tb\\n\nc")), "a\tb\\n\nc");
        assert_eq!(parse_corpus("x\ty"), Err(CorpusError::Shape { line: 1 }));
        assert!(matches!(parse_corpus("x\tjson\ty"), Err(CorpusError::Kind { .. })));
        assert_eq!(parse_corpus("").unwrap(), vec![]);
    }

    #[test]
    fn diff_hunk() {
        let m = Mismatch { line: 7, input: "show".into(), expected: "[OK]\na\nb".into(), actual: "[OK]\nc".into() };
        assert_eq!(m.to_string(), "--- expected (line 7)\n+++ actual\n@@ -1,3 +1,2 @@ show\n [OK]\n-a\n-b\n+c\n");
    }
}
