//! Running Jak programs against registered engines.

use std::any::Any;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use super::{JakProgram, JakStatement, JakValue};
use crate::numbers::Fixed;
use crate::svc::PrivilegeLevel;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message}")]
pub struct EngineError {
    pub message: String,
}

impl EngineError {
    pub fn new(message: impl Into<String>) -> EngineError {
        EngineError { message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JakError {
    #[error("unknown engine {0}")]
    UnknownEngine(String),
    #[error("statement {index} ({target}): {source}")]
    EngineError { index: usize, target: String, source: EngineError },
    #[error("{action} requires {required:?} privileges, session has {have:?}")]
    PrivilegeError { action: String, required: PrivilegeLevel, have: PrivilegeLevel },
    #[error("statement {index}: {name} is not bound")]
    Unbound { index: usize, name: String },
    #[error("statement {index}: constant {name} cannot be reassigned")]
    ConstantReassigned { index: usize, name: String },
    #[error("statement {index}: call to {target} has no arguments")]
    NoAction { index: usize, target: String },
}

/// A bound argument as an engine sees it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Arg {
    Value(JakValue),
    Record(Vec<(String, JakValue)>),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CallArgs {
    pub pairs: Vec<(String, Arg)>,
}

impl CallArgs {
    /// The action an engine dispatches on: the first argument's name.
    pub fn action(&self) -> &str {
        self.pairs.first().map_or("", |(n, _)| n.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&Arg> {
        self.pairs.iter().find(|(n, _)| n == name).map(|(_, a)| a)
    }

    pub fn has(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    pub fn text(&self, name: &str) -> Option<String> {
        match self.get(name)? {
            Arg::Value(v) => Some(v.as_text()),
            Arg::Record(_) => None,
        }
    }

    pub fn number(&self, name: &str) -> Option<Fixed> {
        match self.get(name)? {
            Arg::Value(v) => v.as_number(),
            Arg::Record(_) => None,
        }
    }

    pub fn value(&self, name: &str) -> Option<&JakValue> {
        match self.get(name)? {
            Arg::Value(v) => Some(v),
            Arg::Record(_) => None,
        }
    }

    pub fn record(&self, name: &str) -> Option<&[(String, JakValue)]> {
        match self.get(name)? {
            Arg::Record(r) => Some(r),
            Arg::Value(_) => None,
        }
    }
}

pub trait Engine: Any + Send {
    /// Privilege needed for `action`. Defaults to anonymous access.
    fn required_level(&self, _action: &str) -> PrivilegeLevel {
        PrivilegeLevel::Anonymous
    }

    /// Start a transaction. Engines snapshot whatever `rollback` restores.
    fn begin(&mut self);
    fn commit(&mut self);
    fn rollback(&mut self);

    fn call(&mut self, args: &CallArgs) -> Result<String, EngineError>;

    fn as_any(&self) -> &dyn Any;
    fn as_any_mut(&mut self) -> &mut dyn Any;
}

#[derive(Default)]
pub struct EngineRegistry {
    engines: Vec<Box<dyn Engine>>,
    names: BTreeMap<String, usize>,
}

impl EngineRegistry {
    pub fn new() -> EngineRegistry {
        EngineRegistry::default()
    }

    /// Register `engine` under one or more call targets.
    pub fn register(&mut self, names: &[&str], engine: Box<dyn Engine>) {
        let i = self.engines.len();
        self.engines.push(engine);
        for n in names {
            self.names.insert(n.to_string(), i);
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.names.contains_key(name)
    }

    pub fn targets(&self) -> impl Iterator<Item = &str> {
        self.names.keys().map(String::as_str)
    }

    pub fn engine<T: 'static>(&self, name: &str) -> Option<&T> {
        self.engines[*self.names.get(name)?].as_any().downcast_ref()
    }

    pub fn engine_mut<T: 'static>(&mut self, name: &str) -> Option<&mut T> {
        let i = *self.names.get(name)?;
        self.engines[i].as_any_mut().downcast_mut()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallOutcome {
    pub index: usize,
    pub target: String,
    pub action: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExecutionResult {
    pub outcomes: Vec<CallOutcome>,
    pub response: String,
}

/// Execute `p`. All calls succeed or none of their effects remain.
pub fn execute(p: &JakProgram, engines: &mut EngineRegistry, level: PrivilegeLevel) -> Result<ExecutionResult, JakError> {
    // Static pass: every target exists and the session may run every call.
    let mut involved = BTreeSet::new();
    for (index, s) in p.statements.iter().enumerate() {
        if let JakStatement::Call { target, args } = s {
            let &ei = engines.names.get(target).ok_or_else(|| JakError::UnknownEngine(target.clone()))?;
            let action = args.first().ok_or_else(|| JakError::NoAction { index, target: target.clone() })?;
            let required = engines.engines[ei].required_level(action);
            if required > level {
                return Err(JakError::PrivilegeError { action: action.clone(), required, have: level });
            }
            involved.insert(ei);
        }
    }
    for &ei in &involved {
        engines.engines[ei].begin();
    }
    match run(p, engines) {
        Ok(r) => {
            for &ei in &involved {
                engines.engines[ei].commit();
            }
            Ok(r)
        }
        Err(e) => {
            for &ei in &involved {
                engines.engines[ei].rollback();
            }
            Err(e)
        }
    }
}

fn run(p: &JakProgram, engines: &mut EngineRegistry) -> Result<ExecutionResult, JakError> {
    let mut env: HashMap<String, Arg> = HashMap::new();
    let mut constants: BTreeSet<String> = BTreeSet::new();
    let mut result = ExecutionResult::default();
    let resolve = |env: &HashMap<String, Arg>, v: &JakValue| match v {
        JakValue::Symbol(s) => env.get(s).cloned().unwrap_or_else(|| Arg::Value(v.clone())),
        other => Arg::Value(other.clone()),
    };
    for (index, s) in p.statements.iter().enumerate() {
        match s {
            JakStatement::Set { name, value } | JakStatement::Constant { name, value } => {
                if constants.contains(name) {
                    return Err(JakError::ConstantReassigned { index, name: name.clone() });
                }
                let bound = resolve(&env, value);
                env.insert(name.clone(), bound);
                if matches!(s, JakStatement::Constant { .. }) {
                    constants.insert(name.clone());
                }
            }
            JakStatement::SetRecord { name, fields } => {
                if constants.contains(name) {
                    return Err(JakError::ConstantReassigned { index, name: name.clone() });
                }
                env.insert(name.clone(), Arg::Record(fields.clone()));
            }
            JakStatement::Call { target, args } => {
                let mut pairs = Vec::new();
                for a in args {
                    let v = env.get(a).cloned().ok_or_else(|| JakError::Unbound { index, name: a.clone() })?;
                    pairs.push((a.clone(), v));
                }
                let call = CallArgs { pairs };
                let ei = engines.names[target];
                let response = engines.engines[ei]
                    .call(&call)
                    .map_err(|source| JakError::EngineError { index, target: target.clone(), source })?;
                result.outcomes.push(CallOutcome {
                    index,
                    target: target.clone(),
                    action: call.action().to_string(),
                    response,
                });
            }
        }
    }
    result.response = result
        .outcomes
        .iter()
        .map(|o| o.response.as_str())
        .filter(|r| !r.is_empty())
        .collect::<Vec<_>>()
        .join("\n");
    Ok(result)
}
