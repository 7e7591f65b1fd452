//! Compiling parse trees into Jak programs.
//!
//! Two data tables drive the compiler:
//!
//! * `rules.tsv` maps a tree head to an engine and an action. The first node
//!   (pre-order) whose head has a row selects it.
//! * `slots.tsv` lists, per action, the slots to extract. Each slot names
//!   the rule(s) it reads, whether it is mandatory and an optional default.
//!
//! Slot rule syntax: `a|b` reads nodes headed `a` or `b`; a trailing `@N`
//! takes the Nth occurrence, `*` joins all occurrences, `{f1,f2}` builds a
//! record from descendant fields, a leading `/` restricts the search to
//! direct children of the action node, and `=name` refers to another slot.

use std::collections::BTreeSet;
use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{JakProgram, JakStatement, JakValue};
use crate::numbers::{is_number_word, words_to_number, Fixed};
use crate::sexpr::{print_canonical, SExpr};

pub const DEFAULT_RULES: &str = include_str!("../../data/rules.tsv");
pub const DEFAULT_SLOTS: &str = include_str!("../../data/slots.tsv");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("no action is defined for this request")]
    NoAction,
    #[error("action {action} is missing slot {slot} (rule {rule})")]
    MissingSlot { action: String, slot: String, rule: String },
    #[error("request belongs to {found}, not {expected}")]
    WrongSkill { expected: SkillKind, found: SkillKind },
    #[error("engine {0} is not bound to any interpreter")]
    UnknownEngine(String),
    #[error("no slot schema for action {0}")]
    NoSchema(String),
    #[error("{file} line {line}: {reason}")]
    BadTable { file: String, line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SkillKind {
    Shopping,
    Sheet,
    Messages,
    Vns,
}

impl SkillKind {
    pub fn interpreter(self) -> &'static str {
        match self {
            SkillKind::Shopping => "ShoppingInterpreter",
            SkillKind::Sheet => "SheetInterpreter",
            SkillKind::Messages => "MessageInterpreter",
            SkillKind::Vns => "VNSInterpreter",
        }
    }

    pub fn for_engine(engine: &str) -> Option<SkillKind> {
        Some(match engine {
            "shoppingHandler" | "action_shop" => SkillKind::Shopping,
            "sheetHandler" => SkillKind::Sheet,
            "messageHandler" => SkillKind::Messages,
            "vns" => SkillKind::Vns,
            _ => return None,
        })
    }
}

impl fmt::Display for SkillKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.interpreter())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleRow {
    pub input_type: String,
    pub engine: String,
    pub action: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleTable {
    pub rows: Vec<RuleRow>,
}

fn table_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let t = l.trim_end_matches('\r');
        if t.trim().is_empty() || t.trim_start().starts_with('#') {
            None
        } else {
            Some((i + 1, t.split('\t').map(str::trim).collect()))
        }
    })
}

impl RuleTable {
    pub fn parse(text: &str) -> Result<RuleTable, CompileError> {
        let mut rows: Vec<RuleRow> = Vec::new();
        for (line, cols) in table_lines(text) {
            let bad = |reason: &str| CompileError::BadTable { file: "rules.tsv".into(), line, reason: reason.into() };
            if cols.len() != 3 || cols.iter().any(|c| c.is_empty()) {
                return Err(bad("expected input_type, engine and action"));
            }
            if rows.iter().any(|r| r.input_type == cols[0]) {
                return Err(bad("duplicate input_type"));
            }
            if SkillKind::for_engine(cols[1]).is_none() {
                return Err(bad("unknown engine"));
            }
            rows.push(RuleRow { input_type: cols[0].into(), engine: cols[1].into(), action: cols[2].into() });
        }
        Ok(RuleTable { rows })
    }

    pub fn get(&self, input_type: &str) -> Option<&RuleRow> {
        self.rows.iter().find(|r| r.input_type == input_type)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Occurrence {
    First,
    Nth(usize),
    All,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotSpec {
    pub action: String,
    pub slot: String,
    pub heads: Vec<String>,
    pub occurrence: Occurrence,
    pub direct: bool,
    pub record: Option<Vec<String>>,
    pub symbol: Option<String>,
    pub mandatory: bool,
    pub default: Option<String>,
}

impl SlotSpec {
    fn rule_text(&self) -> String {
        match &self.symbol {
            Some(s) => format!("={s}"),
            None => self.heads.join("|"),
        }
    }

    /// Plain specs can repeat: one call per occurrence.
    fn repeatable(&self) -> bool {
        self.occurrence == Occurrence::First && self.record.is_none() && self.symbol.is_none() && !self.direct
    }
}

/// Heads, occurrence, direct-child flag, record fields and symbol reference.
type ParsedSpec = (Vec<String>, Occurrence, bool, Option<Vec<String>>, Option<String>);

fn parse_rule_spec(spec: &str) -> Result<ParsedSpec, String> {
    if let Some(sym) = spec.strip_prefix('=') {
        if sym.is_empty() {
            return Err("empty symbol reference".into());
        }
        return Ok((Vec::new(), Occurrence::First, false, None, Some(sym.to_string())));
    }
    let (direct, mut body) = match spec.strip_prefix('/') {
        Some(r) => (true, r),
        None => (false, spec),
    };
    let mut occurrence = Occurrence::First;
    let mut record = None;
    if let Some(open) = body.find('{') {
        let fields = body[open + 1..].strip_suffix('}').ok_or("unclosed record field list")?;
        let fields: Vec<String> = fields.split(',').map(|f| f.trim().to_string()).collect();
        if fields.iter().any(|f| f.is_empty()) {
            return Err("empty record field".into());
        }
        record = Some(fields);
        body = &body[..open];
    } else if let Some(rest) = body.strip_suffix('*') {
        occurrence = Occurrence::All;
        body = rest;
    } else if let Some((b, n)) = body.split_once('@') {
        let n: usize = n.parse().map_err(|_| "bad occurrence number")?;
        if n == 0 {
            return Err("occurrences count from 1".into());
        }
        occurrence = Occurrence::Nth(n);
        body = b;
    }
    let heads: Vec<String> = body.split('|').map(|h| h.trim().to_string()).collect();
    if heads.iter().any(|h| h.is_empty()) {
        return Err("empty rule name".into());
    }
    Ok((heads, occurrence, direct, record, None))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotSchema {
    pub specs: Vec<SlotSpec>,
}

impl SlotSchema {
    pub fn parse(text: &str) -> Result<SlotSchema, CompileError> {
        let mut specs: Vec<SlotSpec> = Vec::new();
        for (line, cols) in table_lines(text) {
            let bad = |reason: String| CompileError::BadTable { file: "slots.tsv".into(), line, reason };
            if cols.len() < 4 || cols.len() > 5 {
                return Err(bad("expected action, slot, rule, mandatory|optional and an optional default".into()));
            }
            let (heads, occurrence, direct, record, symbol) = parse_rule_spec(cols[2]).map_err(bad)?;
            let mandatory = match cols[3] {
                "mandatory" => true,
                "optional" => false,
                other => return Err(bad(format!("expected mandatory or optional, got {other:?}"))),
            };
            let default = cols.get(4).filter(|d| !d.is_empty()).map(|d| d.to_string());
            if specs.iter().any(|s| s.action == cols[0] && s.slot == cols[1]) {
                return Err(bad(format!("duplicate slot {}", cols[1])));
            }
            specs.push(SlotSpec {
                action: cols[0].into(),
                slot: cols[1].into(),
                heads,
                occurrence,
                direct,
                record,
                symbol,
                mandatory,
                default,
            });
        }
        let actions: BTreeSet<&str> = specs.iter().map(|s| s.action.as_str()).collect();
        for a in actions {
            let group: Vec<&SlotSpec> = specs.iter().filter(|s| s.action == a).collect();
            if !group.iter().any(|s| s.mandatory) {
                return Err(CompileError::BadTable {
                    file: "slots.tsv".into(),
                    line: 0,
                    reason: format!("action {a} has no mandatory slot"),
                });
            }
            for s in &group {
                if let Some(r) = &s.symbol {
                    if !group.iter().any(|o| &o.slot == r) {
                        return Err(CompileError::BadTable {
                            file: "slots.tsv".into(),
                            line: 0,
                            reason: format!("slot {} refers to unknown slot {r}", s.slot),
                        });
                    }
                }
            }
        }
        Ok(SlotSchema { specs })
    }

    pub fn for_action(&self, action: &str) -> Vec<&SlotSpec> {
        self.specs.iter().filter(|s| s.action == action).collect()
    }

    pub fn actions(&self) -> BTreeSet<&str> {
        self.specs.iter().map(|s| s.action.as_str()).collect()
    }
}

/// Turn leaf words into a value: a single decimal literal or a phrase made
/// only of number words becomes a Number, anything else a String.
pub fn words_value(words: &[&str]) -> JakValue {
    if let [w] = words {
        if w.bytes().all(|b| b.is_ascii_digit() || b == b'.') {
            if let Ok(n) = w.parse::<Fixed>() {
                return JakValue::Number(n);
            }
        }
    }
    if !words.is_empty() && words.iter().all(|w| is_number_word(w)) {
        if let Some(n) = words_to_number(words) {
            return JakValue::Number(Fixed::from_int(n));
        }
    }
    JakValue::String(words.join(" "))
}

struct Info<'a> {
    node: &'a SExpr,
    parent: Option<usize>,
    /// One past the last pre-order index inside this subtree.
    end: usize,
}

fn index_tree(tree: &SExpr) -> Vec<Info<'_>> {
    fn go<'a>(x: &'a SExpr, parent: Option<usize>, out: &mut Vec<Info<'a>>) {
        if !x.is_node() {
            return;
        }
        let me = out.len();
        out.push(Info { node: x, parent, end: 0 });
        for c in x.children() {
            go(c, Some(me), out);
        }
        out[me].end = out.len();
    }
    let mut out = Vec::new();
    go(tree, None, &mut out);
    out
}

/// Where a slot may be read from during one call segment.
#[derive(Clone, Copy)]
struct Region {
    /// Subtree `[start, end)` searched first.
    subtree: (usize, usize),
    /// Pre-order interval `(lo, hi]` searched when the subtree has nothing.
    interval: Option<(Option<usize>, usize)>,
}

const WHOLE: Region = Region { subtree: (0, usize::MAX), interval: None };

struct Ctx<'a> {
    idx: Vec<Info<'a>>,
    action_node: usize,
}

impl<'a> Ctx<'a> {
    fn candidates(&self, spec: &SlotSpec, region: Region) -> Vec<usize> {
        let matches = |i: usize| {
            let n = self.idx[i].node;
            spec.heads.iter().any(|h| h == n.head())
                && !n.leaves().is_empty()
                && (!spec.direct || self.idx[i].parent == Some(self.action_node))
        };
        let (s, e) = region.subtree;
        let first: Vec<usize> = (s..e.min(self.idx.len())).filter(|&i| matches(i)).collect();
        if !first.is_empty() {
            return first;
        }
        match region.interval {
            Some((lo, hi)) => {
                let start = lo.map_or(0, |l| l + 1);
                (start..=hi.min(self.idx.len().saturating_sub(1))).filter(|&i| matches(i)).collect()
            }
            None => first,
        }
    }

    fn value(&self, spec: &SlotSpec, region: Region) -> Option<JakStatementValue> {
        let c = self.candidates(spec, region);
        let picked: Vec<usize> = match spec.occurrence {
            Occurrence::First => c.into_iter().take(1).collect(),
            Occurrence::Nth(n) => c.get(n - 1).copied().into_iter().collect(),
            Occurrence::All => c,
        };
        if picked.is_empty() {
            return None;
        }
        if let Some(fields) = &spec.record {
            let root = picked[0];
            let mut out = Vec::new();
            for f in fields {
                let hit = (root + 1..self.idx[root].end)
                    .find(|&i| self.idx[i].node.head() == f && !self.idx[i].node.leaves().is_empty());
                if let Some(i) = hit {
                    out.push((f.clone(), words_value(&self.idx[i].node.leaves())));
                }
            }
            return (!out.is_empty()).then_some(JakStatementValue::Record(out));
        }
        let words: Vec<&str> = picked.iter().flat_map(|&i| self.idx[i].node.leaves()).collect();
        Some(JakStatementValue::Value(words_value(&words)))
    }
}

enum JakStatementValue {
    Value(JakValue),
    Record(Vec<(String, JakValue)>),
}

#[derive(Debug, Clone)]
pub struct Compiler {
    pub rules: RuleTable,
    pub slots: SlotSchema,
}

/// The action chosen for a tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub engine: String,
    pub action: String,
    pub skill: SkillKind,
}

impl Compiler {
    pub fn new(rules: RuleTable, slots: SlotSchema) -> Compiler {
        Compiler { rules, slots }
    }

    pub fn from_text(rules: &str, slots: &str) -> Result<Compiler, CompileError> {
        Ok(Compiler::new(RuleTable::parse(rules)?, SlotSchema::parse(slots)?))
    }

    pub fn embedded() -> Compiler {
        Compiler::from_text(DEFAULT_RULES, DEFAULT_SLOTS).expect("shipped tables are valid")
    }

    fn find(&self, idx: &[Info<'_>], skill: Option<SkillKind>) -> Result<(usize, &RuleRow, SkillKind), CompileError> {
        for (i, info) in idx.iter().enumerate() {
            if let Some(row) = self.rules.get(info.node.head()) {
                let k = SkillKind::for_engine(&row.engine).ok_or_else(|| CompileError::UnknownEngine(row.engine.clone()))?;
                match skill {
                    Some(want) if want != k => continue,
                    _ => return Ok((i, row, k)),
                }
            }
        }
        Err(CompileError::NoAction)
    }

    /// Skill that would handle `tree`, if any.
    pub fn skill_of(&self, tree: &SExpr) -> Option<SkillKind> {
        let idx = index_tree(tree);
        self.find(&idx, None).ok().map(|(_, _, k)| k)
    }

    pub fn compile_any(&self, tree: &SExpr) -> Result<(SkillKind, JakProgram), CompileError> {
        let idx = index_tree(tree);
        let (_, _, k) = self.find(&idx, None)?;
        Ok((k, self.compile(tree, k)?))
    }

    pub fn compile(&self, tree: &SExpr, skill: SkillKind) -> Result<JakProgram, CompileError> {
        let idx = index_tree(tree);
        let (at, row, found) = match self.find(&idx, Some(skill)) {
            Ok(x) => x,
            Err(CompileError::NoAction) => {
                return Err(match self.find(&idx, None) {
                    Ok((_, _, found)) => CompileError::WrongSkill { expected: skill, found },
                    Err(e) => e,
                })
            }
            Err(e) => return Err(e),
        };
        debug_assert_eq!(found, skill);
        let action = refine(&row.action, idx[at].node, tree);
        let specs = self.slots.for_action(&action);
        if specs.is_empty() {
            return Err(CompileError::NoSchema(action));
        }
        let ctx = Ctx { idx, action_node: at };
        let mut program = emit(&ctx, &row.engine, &action, &specs)?;
        program.provenance = Some(hex::encode(Sha256::digest(print_canonical(tree).as_bytes())));
        Ok(program)
    }
}

fn emit(ctx: &Ctx<'_>, engine: &str, action: &str, specs: &[&SlotSpec]) -> Result<JakProgram, CompileError> {
    let pi = specs.iter().position(|s| s.mandatory).expect("validated at load");
    let primary = specs[pi];
    let referenced: BTreeSet<&str> = specs.iter().filter_map(|s| s.symbol.as_deref()).collect();

    let mut regions = vec![WHOLE];
    if primary.repeatable() {
        let occ = ctx.candidates(primary, WHOLE);
        if occ.len() >= 2 {
            regions = occ
                .iter()
                .enumerate()
                .map(|(k, &p)| {
                    let mut root = p;
                    while let Some(up) = ctx.idx[root].parent {
                        let (s, e) = (up, ctx.idx[up].end);
                        if occ.iter().any(|&o| o != p && o >= s && o < e) {
                            break;
                        }
                        root = up;
                    }
                    let lo = if k == 0 { None } else { Some(occ[k - 1]) };
                    Region { subtree: (root, ctx.idx[root].end), interval: Some((lo, p)) }
                })
                .collect();
        }
    }
    let segmented = regions.len() > 1;

    let missing = |s: &SlotSpec| CompileError::MissingSlot {
        action: action.to_string(),
        slot: s.slot.clone(),
        rule: s.rule_text(),
    };
    let default_of = |s: &SlotSpec| {
        s.default.as_ref().map(|d| {
            let words: Vec<&str> = d.split_whitespace().collect();
            JakStatementValue::Value(words_value(&words))
        })
    };

    let mut statements = Vec::new();
    let mut globals: Vec<&str> = Vec::new();
    let mut emitted_globals: BTreeSet<&str> = BTreeSet::new();
    let scan = |s: &SlotSpec, region: Region, bound: &BTreeSet<&str>| -> Option<JakStatementValue> {
        if let Some(r) = &s.symbol {
            return bound.contains(r.as_str()).then(|| JakStatementValue::Value(JakValue::Symbol(r.clone())));
        }
        ctx.value(s, region).or_else(|| default_of(s))
    };
    let push = |statements: &mut Vec<JakStatement>, s: &SlotSpec, v: JakStatementValue| {
        statements.push(match v {
            JakStatementValue::Value(value) => JakStatement::Set { name: s.slot.clone(), value },
            JakStatementValue::Record(fields) => JakStatement::SetRecord { name: s.slot.clone(), fields },
        });
    };

    let global_specs: &[&SlotSpec] = if segmented { &specs[..pi] } else { &[] };
    for s in global_specs {
        match scan(s, WHOLE, &emitted_globals) {
            Some(v) => {
                push(&mut statements, s, v);
                emitted_globals.insert(&s.slot);
                globals.push(&s.slot);
            }
            None if s.mandatory => return Err(missing(s)),
            None => {}
        }
    }
    let local_specs: &[&SlotSpec] = if segmented { &specs[pi..] } else { specs };
    for region in &regions {
        let mut bound = emitted_globals.clone();
        for s in local_specs {
            match scan(s, *region, &bound) {
                Some(v) => {
                    push(&mut statements, s, v);
                    bound.insert(&s.slot);
                }
                None if s.mandatory => return Err(missing(s)),
                None => {}
            }
        }
        let emitted = |s: &&&SlotSpec| bound.contains(s.slot.as_str()) && !referenced.contains(s.slot.as_str());
        let args: Vec<String> = specs
            .iter()
            .filter(|s| s.mandatory)
            .filter(emitted)
            .chain(specs.iter().filter(|s| !s.mandatory).filter(emitted))
            .map(|s| s.slot.clone())
            .collect();
        statements.push(JakStatement::Call { target: engine.to_string(), args });
    }
    Ok(JakProgram::new(statements))
}

/// Narrow a generic table action using the shape of the matched node.
fn refine(action: &str, node: &SExpr, tree: &SExpr) -> String {
    let child_heads: Vec<&str> = node.children().iter().filter(|c| c.is_node()).map(|c| c.head()).collect();
    let has = |h: &str| child_heads.contains(&h);
    match action {
        "meta_shop" => {
            let verb = [("create", "create_list"), ("share", "share_list"), ("save", "save_list"), ("print", "show_list"), ("bye", "close_list")];
            verb.iter().find(|(h, _)| has(h)).map_or(action, |(_, a)| a).to_string()
        }
        "meta_sheet" => {
            if tree.contains_head("template") {
                return "sheet_from_template".to_string();
            }
            let verb = [("create", "create_sheet"), ("share", "share_sheet"), ("save", "save_sheet"), ("print", "show_sheet"), ("bye", "close_sheet")];
            verb.iter().find(|(h, _)| has(h)).map_or(action, |(_, a)| a).to_string()
        }
        "stmt_expense" => {
            if has("add") {
                "add_expense".to_string()
            } else if has("num_word") || has("currency") || has("coin_phrase") {
                "set_amount".to_string()
            } else {
                "set_fields".to_string()
            }
        }
        _ => action.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jak::print_jak;
    use crate::sexpr::parse_sexpr;

    fn jak(tree: &str, skill: SkillKind) -> String {
        print_jak(&Compiler::embedded().compile(&parse_sexpr(tree).unwrap(), skill).unwrap())
    }

    #[test]
    fn rule_specs() {
        let (h, o, d, r, s) = parse_rule_spec("store|place@2").unwrap();
        assert_eq!((h.len(), o, d, r, s), (2, Occurrence::Nth(2), false, None, None));
        let (_, o, d, _, _) = parse_rule_spec("/num_word*").unwrap();
        assert_eq!((o, d), (Occurrence::All, true));
        let (_, _, _, r, _) = parse_rule_spec("search_item{qty,unit}").unwrap();
        assert_eq!(r.unwrap(), vec!["qty", "unit"]);
        assert!(parse_rule_spec("a@0").is_err());
        assert!(parse_rule_spec("a{").is_err());
    }

    #[test]
    fn symbol_must_exist() {
        assert!(SlotSchema::parse("x\ta\t=b\tmandatory\n").is_err());
        assert!(SlotSchema::parse("x\ta\titem\toptional\n").is_err());
    }

    #[test]
    fn add_bananas_program() {
        let t = "(input (stmt (stmt_shop_top (stmt_shop (add_item (add_qty_item (add add) (item bananas)) more_items to_shop_list)))))";
        assert_eq!(
            jak(t, SkillKind::Shopping),
            "set(shoppingList, \"shopping list\")\nset(add_item, \"bananas\")\ncall(shoppingHandler, add_item, shoppingList)\n"
        );
    }

    #[test]
    fn repeated_items_make_one_call_each() {
        let t = "(input (stmt (stmt_shop_top (stmt_shop (add_item (add add) (qty 2) (bundled_item (unit pounds) (for_of of) (item apples) (more_items (and and) (qty 3) (item pears) (and and) (item figs))) to_shop_list)))))";
        assert_eq!(
            jak(t, SkillKind::Shopping),
            concat!(
                "set(shoppingList, \"shopping list\")\n",
                "set(add_item, \"apples\")\nset(qty, 2)\nset(unit, \"pounds\")\ncall(shoppingHandler, add_item, shoppingList, qty, unit)\n",
                "set(add_item, \"pears\")\nset(qty, 3)\ncall(shoppingHandler, add_item, shoppingList, qty)\n",
                "set(add_item, \"figs\")\ncall(shoppingHandler, add_item, shoppingList)\n",
            )
        );
    }

    #[test]
    fn wrong_skill_and_no_action() {
        let c = Compiler::embedded();
        let t = parse_sexpr("(input (stmt (stmt_shop_top (stmt_shop (purge_list (purge purge))))))").unwrap();
        assert!(matches!(c.compile(&t, SkillKind::Sheet), Err(CompileError::WrongSkill { .. })));
        let t = parse_sexpr("(input (meta (wake huey)))").unwrap();
        assert_eq!(c.compile_any(&t).unwrap_err(), CompileError::NoAction);
    }

    #[test]
    fn number_words_become_numbers() {
        assert_eq!(words_value(&["two", "hundred"]), JakValue::Number(Fixed::from_int(200)));
        assert_eq!(words_value(&["2"]), JakValue::Number(Fixed::from_int(2)));
        assert_eq!(words_value(&["red", "sox"]), JakValue::String("red sox".into()));
    }
}
