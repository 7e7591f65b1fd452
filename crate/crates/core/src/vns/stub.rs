//! A stand-in remote assistant. It answers forecast and briefing requests
//! with canned text and keeps a small per-session shopping list so that a
//! routed conversation can carry on across requests.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use super::wire::{Frame, Handler};

pub const CANNED_FORECAST: &str = "Today's forecast: sunny with a high of 75 and a low of 58.";
pub const CANNED_BRIEFING: &str = "Here is your daily briefing: no new headlines.";

#[derive(Debug, Default)]
struct StubSession {
    items: Vec<String>,
}

#[derive(Debug, Default)]
pub struct StubAssistant {
    pub name: String,
    sessions: Mutex<HashMap<String, StubSession>>,
    /// Every request frame received, for inspection by tests.
    pub captured: Mutex<Vec<Frame>>,
}

const FILLER: [&str; 12] = ["to", "my", "the", "a", "an", "shopping", "list", "please", "for", "me", "on", "some"];

impl StubAssistant {
    pub fn new(name: &str) -> StubAssistant {
        StubAssistant { name: name.into(), ..StubAssistant::default() }
    }

    pub fn handler(self: &Arc<Self>) -> Handler {
        let me = Arc::clone(self);
        Arc::new(move |f| me.handle(&f))
    }

    pub fn handle(&self, req: &Frame) -> Frame {
        self.captured.lock().expect("capture lock").push(req.clone());
        match req.get("verb") {
            Some("route") => {
                let session = req.get("session").unwrap_or("anonymous").to_string();
                Frame::ok().with("from", &self.name).body(&self.reply(&session, &req.body))
            }
            Some("ping") => Frame::ok().body(&format!("server:{}", self.name)),
            Some(v) => Frame::error("protocol", &format!("unsupported verb {v:?}")),
            None => Frame::error("protocol", "missing verb"),
        }
    }

    fn reply(&self, session: &str, text: &str) -> String {
        let lower = text.to_lowercase();
        let words: Vec<&str> = lower
            .split(|c: char| !c.is_alphanumeric() && c != '\'')
            .filter(|w| !w.is_empty())
            .collect();
        if words.iter().any(|w| matches!(*w, "forecast" | "weather")) {
            return CANNED_FORECAST.into();
        }
        if words.contains(&"briefing") {
            return CANNED_BRIEFING.into();
        }
        let mut sessions = self.sessions.lock().expect("session lock");
        let s = sessions.entry(session.to_string()).or_default();
        if words.first().is_some_and(|w| matches!(*w, "show" | "read" | "what's" | "list")) {
            return if s.items.is_empty() {
                "Your shopping list is empty.".into()
            } else {
                format!("Your shopping list: {}.", s.items.join(", "))
            };
        }
        // "add shopping list soap", or a bare item continuing an add.
        let rest: Vec<&str> = words
            .iter()
            .copied()
            .skip_while(|w| *w == "add")
            .filter(|w| !FILLER.contains(w))
            .collect();
        if rest.is_empty() {
            return format!("Sorry, {} can't help with that.", self.name);
        }
        let item = rest.join(" ");
        s.items.push(item.clone());
        format!("Added {item} to your shopping list.")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn route(s: &StubAssistant, session: &str, body: &str) -> String {
        s.handle(&Frame::request("route").with("session", session).body(body)).body
    }

    #[test]
    fn canned_and_list() {
        let s = StubAssistant::new("alexa");
        assert_eq!(route(&s, "a", "what is my forecast"), CANNED_FORECAST);
        assert_eq!(route(&s, "a", "add shopping list soap"), "Added soap to your shopping list.");
        assert_eq!(route(&s, "a", "carrots"), "Added carrots to your shopping list.");
        assert_eq!(route(&s, "a", "show my list"), "Your shopping list: soap, carrots.");
        assert_eq!(route(&s, "b", "show my list"), "Your shopping list is empty.");
        assert_eq!(s.captured.lock().unwrap().len(), 5);
        assert_eq!(s.handle(&Frame::request("fly")).status().unwrap_err().0, "protocol");
    }
}
