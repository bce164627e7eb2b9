//! Stochastic shortest path problems: identifiers, outcome distributions, the
//! model trait shared by full and reduced models, and Bellman backups.

mod distribution;
mod explicit;
mod validate;
mod value;

use std::borrow::Cow;
use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use distribution::{DistributionError, OutcomeDistribution, PROB_TOLERANCE};
pub use explicit::ExplicitSsp;
pub use validate::{validate_problem, Violation};
pub use value::{bellman_backup, q_value, Backup, Heuristic, Policy, ValueTable, ZeroHeuristic};

/// Dense index of a state within one problem instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub u32);

impl StateId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn from_index(index: usize) -> Self {
        StateId(index as u32)
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Dense index of an action. Not every action is applicable in every state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionId(pub u32);

impl ActionId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MdpError {
    #[error("dead end: state {0} has no applicable action")]
    DeadEnd(StateId),
    #[error("state {state} out of range (problem has {num_states} states)")]
    StateOutOfRange { state: StateId, num_states: usize },
    #[error("reachable state count exceeds cap of {cap}")]
    TooManyStates { cap: usize },
    #[error("invalid distribution for ({state}, {action}): {source}")]
    Distribution {
        state: StateId,
        action: ActionId,
        source: DistributionError,
    },
}

/// The view every solver, reduction and simulator works against:
/// `M = <S, A, T, C, s0, S_G>` with successors generated on demand.
///
/// Goal states are absorbing: each applicable action is a zero-cost self-loop.
/// `applicable_actions` returns actions in ascending id order.
pub trait SspModel: Send + Sync {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn start(&self) -> StateId;
    fn is_goal(&self, s: StateId) -> bool;
    fn applicable_actions(&self, s: StateId) -> Vec<ActionId>;
    fn transition(&self, s: StateId, a: ActionId) -> Cow<'_, OutcomeDistribution>;
    fn cost(&self, s: StateId, a: ActionId) -> f64;

    /// Human-readable label for a state, used in dumps and error messages.
    fn describe_state(&self, s: StateId) -> String {
        s.to_string()
    }
}

macro_rules! forward_ssp_model {
    ($($ptr:ty),*) => {$(
        impl<M: SspModel + ?Sized> SspModel for $ptr {
            fn num_states(&self) -> usize { (**self).num_states() }
            fn num_actions(&self) -> usize { (**self).num_actions() }
            fn start(&self) -> StateId { (**self).start() }
            fn is_goal(&self, s: StateId) -> bool { (**self).is_goal(s) }
            fn applicable_actions(&self, s: StateId) -> Vec<ActionId> { (**self).applicable_actions(s) }
            fn transition(&self, s: StateId, a: ActionId) -> Cow<'_, OutcomeDistribution> {
                (**self).transition(s, a)
            }
            fn cost(&self, s: StateId, a: ActionId) -> f64 { (**self).cost(s, a) }
            fn describe_state(&self, s: StateId) -> String { (**self).describe_state(s) }
        }
    )*};
}

forward_ssp_model!(&M, Box<M>, Arc<M>);

/// States reachable from `from` under any applicable action, in BFS order.
pub fn reachable_states<M: SspModel + ?Sized>(model: &M, from: StateId) -> Vec<StateId> {
    reachable_states_capped(model, from, usize::MAX).expect("uncapped traversal")
}

/// Like [`reachable_states`] but gives up once more than `cap` states are found.
pub fn reachable_states_capped<M: SspModel + ?Sized>(
    model: &M,
    from: StateId,
    cap: usize,
) -> Result<Vec<StateId>, MdpError> {
    let mut seen = vec![false; model.num_states()];
    let mut order = Vec::new();
    let mut queue = VecDeque::new();
    seen[from.index()] = true;
    queue.push_back(from);
    while let Some(s) = queue.pop_front() {
        order.push(s);
        if order.len() > cap {
            return Err(MdpError::TooManyStates { cap });
        }
        if model.is_goal(s) {
            continue;
        }
        for a in model.applicable_actions(s) {
            for &(next, _) in model.transition(s, a).entries() {
                if !seen[next.index()] {
                    seen[next.index()] = true;
                    queue.push_back(next);
                }
            }
        }
    }
    Ok(order)
}

/// True when every applicable action of every state reachable from `from`
/// has exactly one outcome.
pub fn is_deterministic_from<M: SspModel + ?Sized>(model: &M, from: StateId) -> bool {
    reachable_states(model, from).into_iter().all(|s| {
        model.is_goal(s)
            || model
                .applicable_actions(s)
                .into_iter()
                .all(|a| model.transition(s, a).is_deterministic())
    })
}
