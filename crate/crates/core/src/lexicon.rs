//! Tokenizer for request text.
//!
//! Token classes follow the common lexer grammar: identifiers, the numeric
//! family (NUMBER, FLOAT, INT2, INT4, MONTH_NUM, DAY_NUM, YEAR_NUM),
//! punctuation and the hidden channel (whitespace and comments).

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TokenKind {
    Id,
    Number,
    Float,
    Int2,
    Int4,
    MonthNum,
    DayNum,
    YearNum,
    Dot,
    Semi,
    Colon,
    Comma,
    Bang,
    /// `-`, only consumed through literals such as the `to` rule.
    Dash,
    /// `/`, used by numeric date expressions.
    Slash,
    Ws,
    Comment,
    LineComment,
}

impl TokenKind {
    pub fn is_hidden(self) -> bool {
        matches!(self, TokenKind::Ws | TokenKind::Comment | TokenKind::LineComment)
    }

    /// Name used for this kind inside grammar files.
    pub fn grammar_name(self) -> &'static str {
        match self {
            TokenKind::Id => "ID",
            TokenKind::Number => "NUMBER",
            TokenKind::Float => "FLOAT",
            TokenKind::Int2 => "INT2",
            TokenKind::Int4 => "INT4",
            TokenKind::MonthNum => "MONTH_NUM",
            TokenKind::DayNum => "DAY_NUM",
            TokenKind::YearNum => "YEAR_NUM",
            TokenKind::Dot => "DOT",
            TokenKind::Semi => "SEMI",
            TokenKind::Colon => "COLON",
            TokenKind::Comma => "COMMA",
            TokenKind::Bang => "BANG",
            TokenKind::Dash => "DASH",
            TokenKind::Slash => "SLASH",
            TokenKind::Ws => "WS",
            TokenKind::Comment => "COMMENT",
            TokenKind::LineComment => "LINE_COMMENT",
        }
    }

    pub fn from_grammar_name(name: &str) -> Option<TokenKind> {
        ALL_KINDS.iter().copied().find(|k| k.grammar_name() == name)
    }

    pub fn is_numeric(self) -> bool {
        NUMERIC_ORDER.contains(&self)
    }
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.grammar_name())
    }
}

const ALL_KINDS: [TokenKind; 18] = [
    TokenKind::Id,
    TokenKind::Number,
    TokenKind::Float,
    TokenKind::Int2,
    TokenKind::Int4,
    TokenKind::MonthNum,
    TokenKind::DayNum,
    TokenKind::YearNum,
    TokenKind::Dot,
    TokenKind::Semi,
    TokenKind::Colon,
    TokenKind::Comma,
    TokenKind::Bang,
    TokenKind::Dash,
    TokenKind::Slash,
    TokenKind::Ws,
    TokenKind::Comment,
    TokenKind::LineComment,
];

/// Numeric kinds in the order the lexer grammar lists them; the first
/// kind that matches a digit string becomes the token's primary kind.
const NUMERIC_ORDER: [TokenKind; 7] = [
    TokenKind::Number,
    TokenKind::Int2,
    TokenKind::Int4,
    TokenKind::Float,
    TokenKind::MonthNum,
    TokenKind::DayNum,
    TokenKind::YearNum,
];

/// INT2 and INT4 are defined by the lexer grammar but never referenced by a
/// parser rule. They are still classified so callers can inspect them.
pub const UNUSED_KINDS: [TokenKind; 2] = [TokenKind::Int2, TokenKind::Int4];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub lower: String,
    pub span: (usize, usize),
    /// Every numeric kind whose pattern matches `text` (empty for
    /// non-numeric tokens).
    pub classes: BTreeSet<TokenKind>,
}

impl Token {
    pub fn is_hidden(&self) -> bool {
        self.kind.is_hidden()
    }

    /// True when the token can stand for `kind` in a grammar rule.
    pub fn has_class(&self, kind: TokenKind) -> bool {
        self.kind == kind || self.classes.contains(&kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexError {
    #[error("unexpected character {ch:?} at byte {position}")]
    UnexpectedChar { position: usize, ch: char },
    #[error("unterminated comment starting at byte {position}")]
    UnterminatedComment { position: usize },
}

impl LexError {
    pub fn position(&self) -> usize {
        match self {
            LexError::UnexpectedChar { position, .. } => *position,
            LexError::UnterminatedComment { position } => *position,
        }
    }
}

fn is_ws(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\r' | b'\n' | 0x0c)
}

pub fn tokenize(input: &str) -> Result<Vec<Token>, LexError> {
    let bytes = input.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let start = i;
        let b = bytes[i];
        let kind = if is_ws(b) {
            while i < bytes.len() && is_ws(bytes[i]) {
                i += 1;
            }
            TokenKind::Ws
        } else if b == b'/' && bytes.get(i + 1) == Some(&b'*') {
            match input[i + 2..].find("*/") {
                Some(off) => i = i + 2 + off + 2,
                None => return Err(LexError::UnterminatedComment { position: start }),
            }
            TokenKind::Comment
        } else if b == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            if i < bytes.len() {
                i += 1;
            }
            TokenKind::LineComment
        } else if b.is_ascii_alphabetic() {
            while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
                i += 1;
            }
            TokenKind::Id
        } else if b.is_ascii_digit() {
            let (len, kind) = longest_numeric(&input[i..]);
            i += len;
            kind
        } else {
            i += 1;
            match b {
                b'.' => TokenKind::Dot,
                b';' => TokenKind::Semi,
                b':' => TokenKind::Colon,
                b',' => TokenKind::Comma,
                b'!' => TokenKind::Bang,
                b'-' => TokenKind::Dash,
                b'/' => TokenKind::Slash,
                _ => {
                    let ch = input[start..].chars().next().unwrap_or('\0');
                    return Err(LexError::UnexpectedChar { position: start, ch });
                }
            }
        };
        let text = &input[start..i];
        let classes = if kind.is_numeric() {
            classify_numeric(text)
        } else {
            BTreeSet::new()
        };
        out.push(Token {
            kind,
            text: text.to_string(),
            lower: text.to_ascii_lowercase(),
            span: (start, i),
            classes,
        });
    }
    Ok(out)
}

/// Longest prefix of `s` (which starts with a digit) that some numeric
/// pattern accepts, with the kind chosen for it.
fn longest_numeric(s: &str) -> (usize, TokenKind) {
    let bytes = s.as_bytes();
    let mut run = 0;
    while run < bytes.len() && bytes[run].is_ascii_digit() {
        run += 1;
    }
    let mut ends = Vec::new();
    if run < bytes.len() && bytes[run] == b'.' {
        let mut frac = run + 1;
        while frac < bytes.len() && bytes[frac].is_ascii_digit() {
            frac += 1;
        }
        if frac > run + 1 {
            ends.push(frac);
        }
    }
    ends.extend((1..=run).rev());
    for end in ends {
        let set = classify_numeric(&s[..end]);
        if let Some(kind) = primary_kind(&s[..end], &set) {
            return (end, kind);
        }
    }
    // A single digit always matches DIGIT, so this is unreachable in practice.
    (1, TokenKind::Number)
}

fn primary_kind(text: &str, set: &BTreeSet<TokenKind>) -> Option<TokenKind> {
    if text.contains('.') && set.contains(&TokenKind::Float) {
        return Some(TokenKind::Float);
    }
    NUMERIC_ORDER.iter().copied().find(|k| set.contains(k))
}

/// All numeric kinds whose pattern fully matches `text`.
pub fn classify_numeric(text: &str) -> BTreeSet<TokenKind> {
    let mut set = BTreeSet::new();
    if text.is_empty() {
        return set;
    }
    let b = text.as_bytes();
    let digits = |s: &[u8]| !s.is_empty() && s.iter().all(u8::is_ascii_digit);
    let nz = |c: u8| (b'1'..=b'9').contains(&c);

    if let Some(dot) = text.find('.') {
        let (int, frac) = (&b[..dot], &b[dot + 1..]);
        if digits(int) && digits(frac) {
            set.insert(TokenKind::Float);
            set.insert(TokenKind::Number);
        }
        return set;
    }
    if !digits(b) {
        return set;
    }
    let n = b.len();
    // NUMBER : DIGIT_NO_ZERO | DIGIT | LEAD_ZERO_TWO_DIGITS
    //        | NO_LEAD_ZERO_TWO_DIGITS | DIGIT_NO_ZERO DIGIT*
    if n == 1 || (n == 2 && b[0] == b'0' && nz(b[1])) || nz(b[0]) {
        set.insert(TokenKind::Number);
    }
    if n == 2 {
        set.insert(TokenKind::Int2);
    }
    if n == 4 {
        set.insert(TokenKind::Int4);
    }
    // MONTH_NUM : DIGIT_NO_ZERO | '0' [1-9] | '1' [0-2]
    let month = (n == 1 && nz(b[0]))
        || (n == 2 && b[0] == b'0' && nz(b[1]))
        || (n == 2 && b[0] == b'1' && (b'0'..=b'2').contains(&b[1]));
    if month {
        set.insert(TokenKind::MonthNum);
    }
    // DAY_NUM : DIGIT_NO_ZERO | '0' [1-9] | [1-2] DIGIT | '30' | '31'
    let day = (n == 1 && nz(b[0]))
        || (n == 2 && b[0] == b'0' && nz(b[1]))
        || (n == 2 && (b[0] == b'1' || b[0] == b'2'))
        || text == "30"
        || text == "31";
    if day {
        set.insert(TokenKind::DayNum);
    }
    // YEAR_NUM : ('19' | '20')? DIGIT DIGIT
    if n == 2 || (n == 4 && (text.starts_with("19") || text.starts_with("20"))) {
        set.insert(TokenKind::YearNum);
    }
    set
}

/// Non-hidden tokens paired with a flag telling whether whitespace (or a
/// comment) preceded them.
pub fn visible(tokens: &[Token]) -> Vec<(Token, bool)> {
    let mut out = Vec::new();
    let mut gap = false;
    for t in tokens {
        if t.is_hidden() {
            gap = true;
        } else {
            out.push((t.clone(), gap));
            gap = false;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(s: &str) -> Vec<TokenKind> {
        tokenize(s).unwrap().iter().map(|t| t.kind).collect()
    }

    #[test]
    fn words_and_spaces() {
        assert_eq!(kinds("add bananas"), vec![TokenKind::Id, TokenKind::Ws, TokenKind::Id]);
        assert!(tokenize("").unwrap().is_empty());
    }

    #[test]
    fn float_and_number() {
        let t = tokenize("200.57").unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].kind, TokenKind::Float);
        assert_eq!(kinds("5."), vec![TokenKind::Number, TokenKind::Dot]);
    }

    #[test]
    fn greeting_lowercase() {
        let t = tokenize("Hi Huey, please").unwrap();
        let lows: Vec<_> = t.iter().filter(|t| !t.is_hidden()).map(|t| t.lower.as_str()).collect();
        assert_eq!(lows, vec!["hi", "huey", ",", "please"]);
        assert_eq!(t[3].kind, TokenKind::Comma);
    }

    #[test]
    fn numeric_classes() {
        use TokenKind::*;
        let twelve: BTreeSet<_> = [Number, Int2, MonthNum, DayNum, YearNum].into_iter().collect();
        assert_eq!(classify_numeric("12"), twelve);
        let t31 = classify_numeric("31");
        assert!(t31.contains(&DayNum) && !t31.contains(&MonthNum));
        assert_eq!(classify_numeric("0"), [Number].into_iter().collect());
        assert!(classify_numeric("abc").is_empty());
        let six = classify_numeric("06");
        assert!(six.contains(&MonthNum) && six.contains(&DayNum) && six.contains(&Number));
    }

    #[test]
    fn rejects_non_ascii_and_apostrophe() {
        assert!(matches!(tokenize("café"), Err(LexError::UnexpectedChar { position: 3, .. })));
        assert!(tokenize("don't").is_err());
        assert!(tokenize("a /* open").is_err());
    }

    #[test]
    fn digits_then_letters_split() {
        let t = tokenize("8am").unwrap();
        assert_eq!(t[0].text, "8");
        assert_eq!(t[1].kind, TokenKind::Id);
    }
}
