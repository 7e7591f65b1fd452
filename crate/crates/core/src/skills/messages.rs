//! Voice messages. Reading needs a logged-in user; bulk deletion needs
//! elevated privileges.

use std::any::Any;

use crate::jak::{CallArgs, Engine, EngineError};
use crate::svc::PrivilegeLevel;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub year: i32,
    pub from: String,
    pub text: String,
}

#[derive(Default)]
pub struct MessageEngine {
    pub messages: Vec<Message>,
    saved: Option<Vec<Message>>,
}

impl MessageEngine {
    pub fn new(messages: Vec<Message>) -> MessageEngine {
        MessageEngine { messages, saved: None }
    }

    /// A small mailbox spanning a few years.
    pub fn sample() -> MessageEngine {
        let m = |year, from: &str, text: &str| Message { year, from: from.into(), text: text.into() };
        MessageEngine::new(vec![
            m(2019, "bob", "see you tuesday"),
            m(2019, "sally", "call me back"),
            m(2020, "bob", "lunch?"),
        ])
    }
}

impl Engine for MessageEngine {
    fn required_level(&self, action: &str) -> PrivilegeLevel {
        match action {
            "delete_messages" => PrivilegeLevel::Elevated,
            _ => PrivilegeLevel::User,
        }
    }

    fn begin(&mut self) {
        self.saved = Some(self.messages.clone());
    }

    fn commit(&mut self) {
        self.saved = None;
    }

    fn rollback(&mut self) {
        if let Some(m) = self.saved.take() {
            self.messages = m;
        }
    }

    fn call(&mut self, args: &CallArgs) -> Result<String, EngineError> {
        match args.action() {
            "delete_messages" => {
                let year = args
                    .number("delete_messages")
                    .filter(|y| y.is_integral())
                    .ok_or_else(|| EngineError::new("a year is required"))?;
                let year = (year.hundredths() / 100) as i32;
                let before = self.messages.len();
                self.messages.retain(|m| m.year != year);
                Ok(format!("Deleted {} messages from {year}.", before - self.messages.len()))
            }
            "read_messages" => Ok(self.messages.iter().map(|m| format!("{} ({}): {}", m.from, m.year, m.text)).collect::<Vec<_>>().join("\n")),
            other => Err(EngineError::new(format!("unsupported message action {other}"))),
        }
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}
