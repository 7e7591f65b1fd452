//! Spreadsheets: templates, progressive row capture, typed cells, totals,
//! column selection and row filters.

use std::any::Any;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{Datelike, NaiveDate};
use thiserror::Error;

use crate::jak::{CallArgs, Engine, EngineError, JakValue};
use crate::numbers::{coin_phrase_cents, words_to_number, Fixed};

pub const TRAVEL_TEMPLATE: &str = include_str!("../../data/travel_template.tsv");
pub const VEHICLES_CSV: &str = include_str!("../../data/vehicles.csv");
pub const TOTAL_LABEL: &str = "TOTAL";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SheetError {
    #[error("there is no template called {0}")]
    UnknownTemplate(String),
    #[error("template {name}: {reason}")]
    BadTemplate { name: String, reason: String },
    #[error("no row is selected; add an expense first")]
    NoCurrentRow,
    #[error("cannot read {0:?} as a date")]
    BadDate(String),
    #[error("cannot read {0:?} as an amount")]
    BadAmount(String),
    #[error("column {0} does not hold numbers")]
    NonNumericColumn(String),
    #[error("there is no column called {0}")]
    UnknownColumn(String),
    #[error("nothing is selected")]
    NoSelection,
    #[error("no spreadsheet is open")]
    NoSheet,
    #[error("unknown comparison {0:?}")]
    BadOperator(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("unsupported sheet action {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Text,
    Date,
    Currency,
    Number,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Cell {
    #[default]
    Empty,
    Text(String),
    Date(NaiveDate),
    Money(Fixed),
    /// A number with the text it was written as, if any.
    Number { value: Fixed, text: Option<String> },
}

impl Cell {
    pub fn number(&self) -> Option<Fixed> {
        match self {
            Cell::Money(v) | Cell::Number { value: v, .. } => Some(*v),
            _ => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Cell::Empty)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Empty => Ok(()),
            Cell::Text(t) => f.write_str(t),
            Cell::Date(d) => write!(f, "{}/{}/{}", d.month(), d.day(), d.year()),
            Cell::Money(v) => f.write_str(&v.to_currency()),
            Cell::Number { text: Some(t), .. } => f.write_str(t),
            Cell::Number { value, text: None } => write!(f, "{value}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub cells: Vec<Cell>,
    pub total: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selection {
    Column(usize),
    Rows(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Gt,
    Eq,
    Le,
    Ge,
}

impl CmpOp {
    pub fn parse(words: &str) -> Result<CmpOp, SheetError> {
        let w = words.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        Ok(match w.as_str() {
            "less than" | "under" | "<" => CmpOp::Lt,
            "greater than" | "more than" | "over" | ">" => CmpOp::Gt,
            "equal to" | "equals" | "is" | "=" => CmpOp::Eq,
            "at most" | "<=" => CmpOp::Le,
            "at least" | ">=" => CmpOp::Ge,
            _ => return Err(SheetError::BadOperator(words.to_string())),
        })
    }

    fn holds<T: Ord>(self, a: T, b: T) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Gt => a > b,
            CmpOp::Eq => a == b,
            CmpOp::Le => a <= b,
            CmpOp::Ge => a >= b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sheet {
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
    pub current_row: Option<usize>,
    pub selection: Option<Selection>,
    /// Columns summed into the TOTAL row.
    pub totals: BTreeSet<usize>,
}

impl Sheet {
    pub fn new(name: &str, columns: Vec<Column>) -> Sheet {
        Sheet {
            name: name.to_string(),
            columns,
            rows: Vec::new(),
            current_row: None,
            selection: None,
            totals: BTreeSet::new(),
        }
    }

    /// Load a sheet from CSV with a header row. Columns whose every
    /// non-empty value is a decimal become numeric.
    pub fn from_csv(name: &str, text: &str) -> Result<Sheet, SheetError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let headers: Vec<String> =
            rdr.headers().map_err(|e| SheetError::Csv(e.to_string()))?.iter().map(str::to_string).collect();
        let mut raw: Vec<Vec<String>> = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| SheetError::Csv(e.to_string()))?;
            raw.push(rec.iter().map(|c| c.split_whitespace().collect::<Vec<_>>().join(" ")).collect());
        }
        let numeric: Vec<bool> = (0..headers.len())
            .map(|c| {
                let mut vals = raw.iter().filter_map(|r| r.get(c)).filter(|v| !v.is_empty()).peekable();
                vals.peek().is_some() && vals.all(|v| v.parse::<Fixed>().is_ok())
            })
            .collect();
        let columns = headers
            .iter()
            .zip(&numeric)
            .map(|(h, &n)| Column { name: h.clone(), kind: if n { ColumnKind::Number } else { ColumnKind::Text } })
            .collect();
        let mut sheet = Sheet::new(name, columns);
        for r in raw {
            let cells = (0..headers.len())
                .map(|c| match r.get(c).map(String::as_str) {
                    None | Some("") => Cell::Empty,
                    Some(v) if numeric[c] => Cell::Number { value: v.parse().expect("checked numeric"), text: Some(v.into()) },
                    Some(v) => Cell::Text(v.into()),
                })
                .collect();
            sheet.rows.push(Row { cells, total: false });
        }
        Ok(sheet)
    }

    pub fn column_index(&self, name: &str) -> Result<usize, SheetError> {
        let want = name.trim().to_lowercase();
        self.columns
            .iter()
            .position(|c| c.name.to_lowercase() == want)
            .ok_or_else(|| SheetError::UnknownColumn(name.to_string()))
    }

    fn total_row(&self) -> Option<usize> {
        self.rows.iter().position(|r| r.total)
    }

    fn empty_row(&self) -> Row {
        Row { cells: vec![Cell::Empty; self.columns.len()], total: false }
    }

    pub fn cell(&self, row: usize, column: &str) -> Option<&Cell> {
        let c = self.column_index(column).ok()?;
        self.rows.get(row)?.cells.get(c)
    }

    /// Text of every data row's cell in `column`, TOTAL row excluded.
    pub fn column_text(&self, column: &str) -> Vec<String> {
        let Ok(c) = self.column_index(column) else { return Vec::new() };
        self.rows.iter().filter(|r| !r.total).map(|r| r.cells[c].to_string()).collect()
    }

    pub fn total(&self, column: &str) -> Option<&Cell> {
        let c = self.column_index(column).ok()?;
        Some(&self.rows[self.total_row()?].cells[c])
    }

    /// Insert a row for `category` after the last row of that category, or
    /// before the TOTAL row when the category is new. The row becomes
    /// current.
    pub fn add_row(&mut self, category: &str) -> usize {
        let want = category.to_lowercase();
        let at = self
            .rows
            .iter()
            .rposition(|r| !r.total && r.cells.first().is_some_and(|c| c.to_string().to_lowercase() == want))
            .map(|i| i + 1)
            .or_else(|| self.total_row())
            .unwrap_or(self.rows.len());
        let mut row = self.empty_row();
        if let Some(first) = row.cells.first_mut() {
            *first = Cell::Text(category.to_string());
        }
        self.rows.insert(at, row);
        self.current_row = Some(at);
        self.selection = None;
        self.recompute_totals();
        at
    }

    /// Write `value` into `column` of the current row, typed by the column.
    pub fn set_cell(&mut self, column: &str, value: &str, year: i32) -> Result<(), SheetError> {
        let row = self.current_row.ok_or(SheetError::NoCurrentRow)?;
        let c = self.column_index(column)?;
        let cell = match self.columns[c].kind {
            ColumnKind::Text => Cell::Text(value.to_string()),
            ColumnKind::Date => Cell::Date(parse_date(value, year)?),
            ColumnKind::Currency => Cell::Money(parse_amount(value)?),
            ColumnKind::Number => Cell::Number { value: parse_amount(value)?, text: None },
        };
        self.rows[row].cells[c] = cell;
        self.recompute_totals();
        Ok(())
    }

    fn amount_column(&self) -> Result<usize, SheetError> {
        self.columns
            .iter()
            .position(|c| c.kind == ColumnKind::Currency)
            .ok_or_else(|| SheetError::UnknownColumn("amount".into()))
    }

    pub fn set_amount(&mut self, amount: Fixed) -> Result<(), SheetError> {
        let row = self.current_row.ok_or(SheetError::NoCurrentRow)?;
        let c = self.amount_column()?;
        self.rows[row].cells[c] = Cell::Money(amount);
        self.recompute_totals();
        Ok(())
    }

    /// Add cents to the current row's amount.
    pub fn add_cents(&mut self, cents: i128) -> Result<(), SheetError> {
        let row = self.current_row.ok_or(SheetError::NoCurrentRow)?;
        let c = self.amount_column()?;
        let base = self.rows[row].cells[c].number().unwrap_or(Fixed::ZERO);
        self.rows[row].cells[c] = Cell::Money(base + Fixed::from_hundredths(cents));
        self.recompute_totals();
        Ok(())
    }

    pub fn select_column(&mut self, name: &str) -> Result<usize, SheetError> {
        let c = self.column_index(name)?;
        self.selection = Some(Selection::Column(c));
        Ok(c)
    }

    /// Sum a column into the TOTAL row, adding the row if needed. `target`
    /// of `None` or "it" means the selected column.
    pub fn sum_selection(&mut self, target: Option<&str>) -> Result<Fixed, SheetError> {
        let c = match target.map(str::trim) {
            None | Some("it") => match self.selection {
                Some(Selection::Column(c)) => c,
                _ => return Err(SheetError::NoSelection),
            },
            Some(name) => self.column_index(name.trim_end_matches(" column"))?,
        };
        let name = self.columns[c].name.clone();
        let numeric = self
            .rows
            .iter()
            .filter(|r| !r.total)
            .all(|r| r.cells[c].is_empty() || r.cells[c].number().is_some());
        if !numeric {
            return Err(SheetError::NonNumericColumn(name));
        }
        if self.total_row().is_none() {
            let mut row = self.empty_row();
            row.total = true;
            row.cells[0] = Cell::Text(TOTAL_LABEL.into());
            self.rows.push(row);
        }
        self.totals.insert(c);
        self.recompute_totals();
        Ok(self.column_sum(c))
    }

    /// Select data rows where `column op literal` holds. Numbers compare
    /// numerically, everything else as case-folded text.
    pub fn filter_rows(&mut self, column: &str, op: CmpOp, literal: &str) -> Result<Vec<usize>, SheetError> {
        let c = self.column_index(column)?;
        let lit_num = literal.parse::<Fixed>().ok();
        let lit_text = literal.to_lowercase();
        let rows: Vec<usize> = self
            .rows
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.total)
            .filter(|(_, r)| match (r.cells[c].number(), lit_num) {
                (Some(v), Some(l)) => op.holds(v, l),
                (None, None) => !r.cells[c].is_empty() && op.holds(r.cells[c].to_string().to_lowercase(), lit_text.clone()),
                _ => false,
            })
            .map(|(i, _)| i)
            .collect();
        self.selection = Some(Selection::Rows(rows.clone()));
        Ok(rows)
    }

    fn column_sum(&self, c: usize) -> Fixed {
        self.rows.iter().filter(|r| !r.total).filter_map(|r| r.cells[c].number()).sum()
    }

    /// Keep the TOTAL row equal to the column sums. A tracked column with no
    /// values yet shows a blank total.
    fn recompute_totals(&mut self) {
        let Some(t) = self.total_row() else { return };
        for &c in &self.totals.clone() {
            let any = self.rows.iter().any(|r| !r.total && r.cells[c].number().is_some());
            let sum = self.column_sum(c);
            self.rows[t].cells[c] = match (any, self.columns[c].kind) {
                (false, _) => Cell::Empty,
                (true, ColumnKind::Currency) => Cell::Money(sum),
                (true, _) => Cell::Number { value: sum, text: None },
            };
        }
    }

    /// Grid as tab-separated text: a letter header, then numbered rows
    /// starting with the column names.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let letters: Vec<String> = (0..self.columns.len()).map(column_letter).collect();
        out.push_str(&format!("\t{}\n", letters.join("\t")));
        let names: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        out.push_str(&format!("1\t{}\n", names.join("\t")));
        for (i, r) in self.rows.iter().enumerate() {
            let cells: Vec<String> = r.cells.iter().map(|c| c.to_string()).collect();
            out.push_str(&format!("{}\t{}\n", i + 2, cells.join("\t")));
        }
        out
    }
}

fn column_letter(i: usize) -> String {
    let mut n = i + 1;
    let mut s = Vec::new();
    while n > 0 {
        let r = (n - 1) % 26;
        s.push(b'A' + r as u8);
        n = (n - 1) / 26;
    }
    s.reverse();
    String::from_utf8(s).expect("ascii")
}

/// A template: typed columns, seed rows and an optional TOTAL row that
/// tracks every currency column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub name: String,
    pub sheet: Sheet,
}

impl Template {
    /// The header line holds `name:kind` columns separated by tabs; each
    /// further line is a row, and a line reading `TOTAL` is the total row.
    pub fn parse(name: &str, text: &str) -> Result<Template, SheetError> {
        let bad = |reason: String| SheetError::BadTemplate { name: name.into(), reason };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| bad("empty template".into()))?;
        let mut columns = Vec::new();
        for spec in header.split('\t') {
            let (col, kind) = spec.split_once(':').unwrap_or((spec, "text"));
            let kind = match kind.trim() {
                "text" => ColumnKind::Text,
                "date" => ColumnKind::Date,
                "currency" => ColumnKind::Currency,
                "number" => ColumnKind::Number,
                k => return Err(bad(format!("unknown column kind {k}"))),
            };
            columns.push(Column { name: col.trim().to_string(), kind });
        }
        let mut sheet = Sheet::new(name, columns);
        for line in lines {
            let mut row = sheet.empty_row();
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() > row.cells.len() {
                return Err(bad(format!("row {line:?} has too many cells")));
            }
            row.total = fields[0].trim() == TOTAL_LABEL;
            for (i, f) in fields.iter().enumerate() {
                if !f.trim().is_empty() {
                    row.cells[i] = Cell::Text(f.trim().to_string());
                }
            }
            sheet.rows.push(row);
        }
        if sheet.total_row().is_some() {
            sheet.totals = (0..sheet.columns.len()).filter(|&c| sheet.columns[c].kind == ColumnKind::Currency).collect();
        }
        Ok(Template { name: name.to_string(), sheet })
    }

    pub fn travel() -> Template {
        Template::parse("travel", TRAVEL_TEMPLATE).expect("embedded template is valid")
    }
}

fn ordinal_value(w: &str) -> Option<u32> {
    Some(match w {
        "first" => 1,
        "second" => 2,
        "third" => 3,
        "fourth" => 4,
        "fifth" => 5,
        "sixth" => 6,
        "seventh" => 7,
        "eighth" => 8,
        "ninth" => 9,
        "tenth" => 10,
        "eleventh" => 11,
        "twelfth" => 12,
        "thirteenth" => 13,
        "fourteenth" => 14,
        "fifteenth" => 15,
        "sixteenth" => 16,
        "seventeenth" => 17,
        "eighteenth" => 18,
        "nineteenth" => 19,
        "twentieth" => 20,
        "thirtieth" => 30,
        _ => return None,
    })
}

fn month_value(w: &str) -> Option<u32> {
    const MONTHS: [&str; 12] = [
        "january", "february", "march", "april", "may", "june", "july", "august", "september", "october", "november",
        "december",
    ];
    MONTHS.iter().position(|m| *m == w).map(|i| i as u32 + 1)
}

fn day_value(words: &[&str]) -> Option<u32> {
    match words {
        [w] => ordinal_value(w).or_else(|| w.trim_end_matches(|c: char| c.is_ascii_alphabetic()).parse().ok()),
        ["twenty", w] => Some(20 + ordinal_value(w).filter(|&d| d < 10)?),
        ["thirty", "first"] => Some(31),
        _ => None,
    }
}

/// Parse "june first", "june 1 2021" or "6/1/2020". A missing year is
/// the session year.
pub fn parse_date(text: &str, year: i32) -> Result<NaiveDate, SheetError> {
    let bad = || SheetError::BadDate(text.to_string());
    let lower = text.trim().to_lowercase();
    if lower.contains('/') {
        let parts: Vec<&str> = lower.split('/').map(str::trim).collect();
        let (m, d, y) = match parts.as_slice() {
            [m, d] => (m.parse().map_err(|_| bad())?, d.parse().map_err(|_| bad())?, year),
            [m, d, y] => (m.parse().map_err(|_| bad())?, d.parse().map_err(|_| bad())?, y.parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        return NaiveDate::from_ymd_opt(y, m, d).ok_or_else(bad);
    }
    let words: Vec<&str> = lower.split_whitespace().collect();
    let (&first, rest) = words.split_first().ok_or_else(bad)?;
    let month = month_value(first).ok_or_else(bad)?;
    let (day_words, y) = match rest.split_last() {
        Some((last, init)) if last.len() == 4 && last.bytes().all(|b| b.is_ascii_digit()) => {
            (init, last.parse().map_err(|_| bad())?)
        }
        _ => (rest, year),
    };
    let day = day_value(day_words).ok_or_else(bad)?;
    NaiveDate::from_ymd_opt(y, month, day).ok_or_else(bad)
}

/// Parse a decimal or an English amount such as "two hundred dollars".
pub fn parse_amount(text: &str) -> Result<Fixed, SheetError> {
    let t = text.trim().trim_start_matches('$');
    if let Ok(v) = t.parse::<Fixed>() {
        return Ok(v);
    }
    let lower = t.to_lowercase();
    let words: Vec<&str> =
        lower.split_whitespace().filter(|w| !matches!(*w, "dollar" | "dollars" | "bucks" | "usd")).collect();
    if let Some(and) = words.iter().position(|w| *w == "and") {
        let dollars = words_to_number(&words[..and]).ok_or_else(|| SheetError::BadAmount(text.into()))?;
        let cents = coin_phrase_cents(&words[and..]).ok_or_else(|| SheetError::BadAmount(text.into()))?;
        return Ok(Fixed::from_int(dollars) + Fixed::from_hundredths(cents));
    }
    words_to_number(&words).map(Fixed::from_int).ok_or_else(|| SheetError::BadAmount(text.into()))
}

/// Engine binding for `sheetHandler`. Works on the current sheet.
pub struct SheetEngine {
    pub sheets: Vec<Sheet>,
    pub current: Option<usize>,
    pub templates: BTreeMap<String, Template>,
    pub session_year: i32,
    saved: Option<(Vec<Sheet>, Option<usize>)>,
}

impl SheetEngine {
    pub fn new(session_year: i32) -> SheetEngine {
        let mut templates = BTreeMap::new();
        let t = Template::travel();
        templates.insert(t.name.clone(), t);
        SheetEngine { sheets: Vec::new(), current: None, templates, session_year, saved: None }
    }

    pub fn open(&mut self, sheet: Sheet) -> usize {
        self.sheets.push(sheet);
        self.current = Some(self.sheets.len() - 1);
        self.sheets.len() - 1
    }

    /// Start a sheet from the template named by any word of `topic`.
    pub fn create_from_template(&mut self, topic: &str) -> Result<usize, SheetError> {
        let lower = topic.to_lowercase();
        let t = lower
            .split_whitespace()
            .find_map(|w| self.templates.get(w))
            .ok_or_else(|| SheetError::UnknownTemplate(topic.to_string()))?;
        let mut sheet = t.sheet.clone();
        sheet.name = format!("{} {}", t.name, self.sheets.len() + 1);
        Ok(self.open(sheet))
    }

    pub fn sheet(&self) -> Option<&Sheet> {
        self.sheets.get(self.current?)
    }

    fn sheet_mut(&mut self) -> Result<&mut Sheet, SheetError> {
        let i = self.current.ok_or(SheetError::NoSheet)?;
        Ok(&mut self.sheets[i])
    }

    fn dispatch(&mut self, args: &CallArgs) -> Result<String, SheetError> {
        let year = self.session_year;
        let text = |k: &str| args.text(k).unwrap_or_default();
        match args.action() {
            "sheet_from_template" => {
                self.create_from_template(&args.text("template_topic").unwrap_or_else(|| "travel".into()))?;
                Ok(String::new())
            }
            "create_sheet" => {
                let columns = self.templates["travel"].sheet.columns.clone();
                let name = format!("sheet {}", self.sheets.len() + 1);
                self.open(Sheet::new(&name, columns));
                Ok(String::new())
            }
            "show_sheet" => Ok(self.sheet().ok_or(SheetError::NoSheet)?.render()),
            "save_sheet" | "share_sheet" => Err(SheetError::Unsupported(args.action().to_string())),
            "close_sheet" => {
                self.current = None;
                Ok(String::new())
            }
            "add_expense" => {
                self.sheet_mut()?.add_row(&text("add_expense"));
                Ok(String::new())
            }
            "set_cell" => {
                let value = value_text(args.value("set_cell"));
                self.sheet_mut()?.set_cell(&text("column"), &value, year)?;
                Ok(String::new())
            }
            "set_fields" => {
                let s = self.sheet_mut()?;
                s.set_cell(&text("set_fields"), &text("value"), year)?;
                if let (Some(f), Some(v)) = (args.text("field2"), args.value("value2")) {
                    s.set_cell(&f, &value_text(Some(v)), year)?;
                }
                Ok(String::new())
            }
            "set_amount" => {
                let dollars = match args.value("dollars") {
                    Some(JakValue::Number(n)) => Some(*n),
                    Some(v) => Some(parse_amount(&v.as_text())?),
                    None => None,
                };
                let cents = match args.text("cents") {
                    Some(c) => {
                        let words: Vec<&str> = c.split_whitespace().collect();
                        Some(coin_phrase_cents(&words).ok_or(SheetError::BadAmount(c.clone()))?)
                    }
                    None => None,
                };
                if dollars.is_none() && cents.is_none() {
                    return Err(SheetError::BadAmount(String::new()));
                }
                let amount = dollars.unwrap_or(Fixed::ZERO) + Fixed::from_hundredths(cents.unwrap_or(0));
                self.sheet_mut()?.set_amount(amount)?;
                Ok(String::new())
            }
            "add_cents" => {
                let phrase = text("add_cents");
                let words: Vec<&str> = phrase.split_whitespace().collect();
                let cents = coin_phrase_cents(&words).ok_or(SheetError::BadAmount(phrase.clone()))?;
                self.sheet_mut()?.add_cents(cents)?;
                Ok(String::new())
            }
            "select_column" => {
                self.sheet_mut()?.select_column(&text("select_column"))?;
                Ok(String::new())
            }
            "sum_selection" => {
                let target = args.text("sum_selection");
                let total = self.sheet_mut()?.sum_selection(target.as_deref())?;
                Ok(format!("{TOTAL_LABEL} {total}"))
            }
            "select_rows" => {
                let op = CmpOp::parse(&text("op"))?;
                let value = value_text(args.value("value"));
                let rows = self.sheet_mut()?.filter_rows(&text("select_rows"), op, &value)?;
                let nums: Vec<String> = rows.iter().map(|r| (r + 2).to_string()).collect();
                Ok(format!("Selected {} rows: {}", rows.len(), nums.join(", ")))
            }
            other => Err(SheetError::Unsupported(other.to_string())),
        }
    }
}

fn value_text(v: Option<&JakValue>) -> String {
    v.map(|v| v.as_text()).unwrap_or_default()
}

impl Engine for SheetEngine {
    fn begin(&mut self) {
        self.saved = Some((self.sheets.clone(), self.current));
    }

    fn commit(&mut self) {
        self.saved = None;
    }

    fn rollback(&mut self) {
        if let Some((s, c)) = self.saved.take() {
            self.sheets = s;
            self.current = c;
        }
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn travel_template_shape() {
        let t = Template::travel();
        let names: Vec<&str> = t.sheet.columns.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["Category", "Description", "Date", "Amount"]);
        assert_eq!(
            t.sheet.column_text("Category"),
            ["airfare", "lodging", "ground transportation", "meals", "other"]
        );
        assert_eq!(t.sheet.total("Amount"), Some(&Cell::Empty));
    }

    #[test]
    fn dates() {
        let d = parse_date("june first", 2020).unwrap();
        assert_eq!(Cell::Date(d).to_string(), "6/1/2020");
        assert_eq!(parse_date("march twenty third 2021", 2020).unwrap(), NaiveDate::from_ymd_opt(2021, 3, 23).unwrap());
        assert_eq!(parse_date("6/1/2020", 1999).unwrap(), d);
        assert!(parse_date("june thirty first", 2020).is_err());
        assert!(parse_date("someday", 2020).is_err());
    }

    #[test]
    fn amounts() {
        assert_eq!(parse_amount("two hundred dollars").unwrap(), Fixed::from_int(200));
        assert_eq!(parse_amount("200.57").unwrap(), Fixed::from_hundredths(20057));
        assert_eq!(parse_amount("two hundred dollars and fifty seven cents").unwrap(), Fixed::from_hundredths(20057));
        assert!(parse_amount("lots").is_err());
    }

    #[test]
    fn add_row_places_after_category() {
        let mut s = Template::travel().sheet;
        assert_eq!(s.add_row("lodging"), 2);
        assert_eq!(s.add_row("lodging"), 3);
        assert_eq!(s.add_row("breakfast"), 7);
        assert!(s.rows[8].total);
    }

    #[test]
    fn no_current_row() {
        let mut s = Template::travel().sheet;
        assert_eq!(s.set_cell("Description", "hotel", 2020), Err(SheetError::NoCurrentRow));
    }

    #[test]
    fn text_filters_and_letters() {
        let mut s = Sheet::from_csv("v", VEHICLES_CSV).unwrap();
        assert_eq!(s.filter_rows("make", CmpOp::Eq, "chevy").unwrap(), [1, 2]);
        assert_eq!(column_letter(0), "A");
        assert_eq!(column_letter(26), "AA");
        assert!(CmpOp::parse("around").is_err());
    }
}
