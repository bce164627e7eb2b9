//! SSP solvers: LAO* (primary planner), value iteration (oracle), labeled
//! LRTA* for the `h_min` heuristic, and A* for determinized models.

mod astar;
mod hmin;
mod lao;
mod vi;

use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

use crate::mdp::{ActionId, Heuristic, MdpError, Policy, StateId, ValueTable, ZeroHeuristic};

pub use astar::solve_deterministic;
pub use hmin::{compute_hmin, Hmin};
pub use lao::{solve_lao_star, LaoStar};
pub use vi::solve_value_iteration;

pub const DEFAULT_EPSILON: f64 = 1e-3;

#[derive(Clone)]
pub struct SolverConfig {
    /// Bellman residual convergence threshold.
    pub epsilon: f64,
    /// Cap on LAO* passes, VI sweeps or LRTA* trials.
    pub max_iterations: usize,
    /// Admissible lower bound used to seed unexplored states.
    pub heuristic: Arc<dyn Heuristic>,
    /// Largest reachable state space value iteration will enumerate.
    pub state_cap: usize,
}

impl SolverConfig {
    pub fn with_heuristic(mut self, heuristic: Arc<dyn Heuristic>) -> Self {
        self.heuristic = heuristic;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        assert!(epsilon > 0.0, "epsilon must be positive");
        self.epsilon = epsilon;
        self
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            max_iterations: 100_000,
            heuristic: Arc::new(ZeroHeuristic),
            state_cap: 2_000_000,
        }
    }
}

impl fmt::Debug for SolverConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SolverConfig")
            .field("epsilon", &self.epsilon)
            .field("max_iterations", &self.max_iterations)
            .field("state_cap", &self.state_cap)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub start: StateId,
    /// Greedy actions over the envelope reachable from `start` under the policy.
    pub policy: Policy,
    pub values: ValueTable,
    pub expanded_states: usize,
    pub solve_time: Duration,
}

impl Solution {
    pub fn start_value(&self) -> f64 {
        self.values.get(self.start).unwrap_or(0.0)
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("dead end at state {0}")]
    DeadEnd(StateId),
    #[error("no convergence after {iterations} iterations")]
    NonConvergence { iterations: usize, best: Box<Solution> },
    #[error("reachable state space exceeds enumeration cap of {cap}")]
    TooManyStates { cap: usize },
    #[error("({state}, {action}) has {outcomes} outcomes; deterministic model required")]
    NotDeterministic { state: StateId, action: ActionId, outcomes: usize },
}

impl From<MdpError> for SolverError {
    fn from(e: MdpError) -> Self {
        match e {
            MdpError::DeadEnd(s) => SolverError::DeadEnd(s),
            MdpError::TooManyStates { cap } => SolverError::TooManyStates { cap },
            other => panic!("unexpected model error in solver: {other}"),
        }
    }
}

impl SolverError {
    /// The best-so-far solution carried by a non-convergence error.
    pub fn into_best(self) -> Option<Solution> {
        match self {
            SolverError::NonConvergence { best, .. } => Some(*best),
            _ => None,
        }
    }
}
