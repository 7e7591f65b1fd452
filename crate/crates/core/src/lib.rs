//! Core library for the Huey voice assistant shell: tokenizer, grammar
//! engine, Jak programs, the privacy firewall, second-factor verification,
//! skills, the voice name system and the interactive shell.

pub mod cpf;
pub mod grammar;
pub mod jak;
pub mod lexicon;
pub mod numbers;
pub mod sexpr;
pub mod shell;
pub mod skills;
pub mod svc;
pub mod vns;
