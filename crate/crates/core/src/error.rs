use std::path::PathBuf;

use thiserror::Error;

use crate::valuations::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("market must have at least one agent")]
    EmptyMarket,

    #[error("{what} supports at most {max} agents, got {n}")]
    TooManyAgents { what: &'static str, n: usize, max: usize },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("valuation profile violates {} condition(s); first: {}", .0.len(), .0[0])]
    ConditionViolations(Vec<Violation>),

    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("{0} requires an additive valuation profile")]
    NotAdditive(&'static str),

    #[error("allocation rule fails the truthfulness conditions for agent {agent}: {reason}")]
    RuleNotImplementable { agent: usize, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("instance generation failed after {attempts} attempts: {reason}")]
    Generation { attempts: usize, reason: String },

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
