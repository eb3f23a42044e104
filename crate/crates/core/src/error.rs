use thiserror::Error;

use crate::graph::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid transition graph: {}", format_violations(.0))]
    InvalidGraph(Vec<Violation>),

    #[error("domain mismatch for {what}: expected {expected} entries, found {found}")]
    DomainMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("unknown state `{0}`")]
    UnknownState(String),

    #[error("unknown action `{0}`")]
    UnknownAction(String),

    #[error("transition ({src}, {action}, {dst}) is not in the graph")]
    UnknownTransition {
        src: String,
        action: String,
        dst: String,
    },

    #[error("reward for transition ({src}, {action}, {dst}) given more than once")]
    DuplicateReward {
        src: String,
        action: String,
        dst: String,
    },

    #[error("reward missing for transition ({src}, {action}, {dst})")]
    MissingReward {
        src: String,
        action: String,
        dst: String,
    },

    #[error("non-finite value for {0}")]
    NonFinite(String),

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("{operation} requires gamma < 1 (got {gamma})")]
    GammaNotBelowOne { operation: &'static str, gamma: f64 },

    #[error("{what}: {count} items exceeds the cap of {cap}")]
    CapExceeded {
        what: &'static str,
        count: u128,
        cap: u128,
    },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
