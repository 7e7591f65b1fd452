//! Fixed-point amounts and English number-word evaluation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A decimal with exactly two fraction digits, stored as hundredths.
/// Serializes as its decimal text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Fixed(i128);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("not a decimal number: {0:?}")]
pub struct FixedParseError(pub String);

impl Fixed {
    pub const ZERO: Fixed = Fixed(0);

    pub fn from_int(v: i128) -> Fixed {
        Fixed(v * 100)
    }

    pub fn from_hundredths(v: i128) -> Fixed {
        Fixed(v)
    }

    pub fn hundredths(self) -> i128 {
        self.0
    }

    pub fn is_integral(self) -> bool {
        self.0 % 100 == 0
    }

    /// Always two fraction digits, e.g. `200.00`.
    pub fn to_currency(self) -> String {
        let sign = if self.0 < 0 { "-" } else { "" };
        let a = self.0.abs();
        format!("{sign}{}.{:02}", a / 100, a % 100)
    }

    pub fn checked_add(self, o: Fixed) -> Option<Fixed> {
        self.0.checked_add(o.0).map(Fixed)
    }
}

impl std::ops::Add for Fixed {
    type Output = Fixed;
    fn add(self, o: Fixed) -> Fixed {
        Fixed(self.0 + o.0)
    }
}

impl std::ops::AddAssign for Fixed {
    fn add_assign(&mut self, o: Fixed) {
        self.0 += o.0;
    }
}

impl std::iter::Sum for Fixed {
    fn sum<I: Iterator<Item = Fixed>>(iter: I) -> Fixed {
        iter.fold(Fixed::ZERO, |a, b| a + b)
    }
}

/// Integral values print without a fraction, others with two digits.
impl fmt::Display for Fixed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integral() {
            write!(f, "{}", self.0 / 100)
        } else {
            f.write_str(&self.to_currency())
        }
    }
}

impl From<Fixed> for String {
    fn from(f: Fixed) -> String {
        f.to_currency()
    }
}

impl TryFrom<String> for Fixed {
    type Error = FixedParseError;
    fn try_from(s: String) -> Result<Fixed, FixedParseError> {
        s.parse()
    }
}

impl FromStr for Fixed {
    type Err = FixedParseError;

    fn from_str(s: &str) -> Result<Fixed, FixedParseError> {
        let bad = || FixedParseError(s.to_string());
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (int, frac) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int.is_empty() || !int.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        if frac.len() > 2 || !frac.bytes().all(|b| b.is_ascii_digit()) || (body.contains('.') && frac.is_empty()) {
            return Err(bad());
        }
        let whole: i128 = int.parse().map_err(|_| bad())?;
        let mut cents: i128 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        if frac.len() == 1 {
            cents *= 10;
        }
        let v = whole.checked_mul(100).and_then(|w| w.checked_add(cents)).ok_or_else(bad)?;
        Ok(Fixed(if neg { -v } else { v }))
    }
}

fn small_value(w: &str) -> Option<i128> {
    Some(match w {
        "zero" => 0,
        "one" | "a" => 1,
        "two" => 2,
        "three" => 3,
        "four" => 4,
        "five" => 5,
        "six" => 6,
        "seven" => 7,
        "eight" => 8,
        "nine" => 9,
        "ten" => 10,
        "eleven" => 11,
        "twelve" => 12,
        "thirteen" => 13,
        "fourteen" => 14,
        "fifteen" => 15,
        "sixteen" => 16,
        "seventeen" => 17,
        "eighteen" => 18,
        "nineteen" => 19,
        "twenty" => 20,
        "thirty" => 30,
        "forty" => 40,
        "fifty" => 50,
        "sixty" => 60,
        "seventy" => 70,
        "eighty" => 80,
        "ninety" => 90,
        _ => return None,
    })
}

fn scale_value(w: &str) -> Option<i128> {
    Some(match w {
        "thousand" => 1_000,
        "million" => 1_000_000,
        "billion" => 1_000_000_000,
        "trillion" => 1_000_000_000_000,
        "quadrillion" => 1_000_000_000_000_000,
        _ => return None,
    })
}

pub fn is_number_word(w: &str) -> bool {
    w != "a" && (small_value(w).is_some() || w == "hundred" || scale_value(w).is_some())
}

/// Evaluate an English number phrase: units and tens add, "hundred"
/// multiplies the current group, larger scales close the group.
/// Returns `None` for an empty phrase or an unknown word.
pub fn words_to_number<S: AsRef<str>>(words: &[S]) -> Option<i128> {
    if words.is_empty() {
        return None;
    }
    let mut total: i128 = 0;
    let mut group: i128 = 0;
    for w in words {
        let w = w.as_ref();
        if let Some(v) = small_value(w) {
            group += v;
        } else if w == "hundred" {
            group = group.max(1) * 100;
        } else {
            total += group.max(1) * scale_value(w)?;
            group = 0;
        }
    }
    Some(total + group)
}

/// Value of a coin phrase such as "and fifty seven cents", in hundredths.
pub fn coin_phrase_cents<S: AsRef<str>>(words: &[S]) -> Option<i128> {
    let core: Vec<&str> = words
        .iter()
        .map(|w| w.as_ref())
        .filter(|w| !matches!(*w, "and" | "plus" | "cent" | "cents"))
        .collect();
    if core.is_empty() {
        return words.iter().any(|w| matches!(w.as_ref(), "cent" | "cents")).then_some(1);
    }
    words_to_number(&core)
}
