//! Moral-dilemma grid worlds with trolleys, levers and pushable bystanders,
//! force-ranked norm chains, and tools to score, train and compare policies
//! against them.

pub mod agents;
pub mod engine;
pub mod env;
pub mod eval;
pub mod ledger;
pub mod morality;
pub mod protocol;
pub mod scenario;
pub mod service;
pub mod trace;

use thiserror::Error;

/// Any failure surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Scenario(#[from] scenario::ScenarioError),
    #[error(transparent)]
    Morality(#[from] morality::MoralityError),
    #[error(transparent)]
    Engine(#[from] engine::EngineError),
    #[error(transparent)]
    Ledger(#[from] ledger::LedgerError),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Resource(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for problems with the inputs (scenario, chain, options) rather
    /// than failures while running.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Scenario(_) | Error::Morality(_) | Error::Config(_) | Error::Json(_))
    }
}
