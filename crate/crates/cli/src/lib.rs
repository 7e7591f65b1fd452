//! Shared plumbing for the command line tools: configuration loading and
//! the golden corpus runner.

pub mod config;
pub mod corpus;

pub use config::{Config, ConfigError};
pub use corpus::{parse_corpus, run_corpus, Case, CorpusError, Kind, Report};
