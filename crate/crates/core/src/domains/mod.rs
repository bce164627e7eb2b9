//! Benchmark domains: racetrack, sailing and EV charging, each built as a
//! lazily generated [`SspModel`](crate::mdp::SspModel) plus its risk predicate.

pub mod ev;
pub mod racetrack;
pub mod sailing;
mod tracks;

use std::sync::Arc;

use thiserror::Error;

use crate::mdp::SspModel;
use crate::risk::RiskPredicate;

pub use tracks::{builtin_track, BUILTIN_TRACKS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("map line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown instance `{0}`")]
    UnknownInstance(String),
}

/// A built benchmark problem with its risk predicate.
#[derive(Clone)]
pub struct Instance {
    pub name: String,
    pub problem: Arc<dyn SspModel>,
    pub risk: RiskPredicate,
}

impl std::fmt::Debug for Instance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Instance")
            .field("name", &self.name)
            .field("states", &self.problem.num_states())
            .finish_non_exhaustive()
    }
}
