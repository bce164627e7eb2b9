use std::collections::HashMap;
use std::fmt;

use super::{reachable_states, ActionId, SspModel, StateId, PROB_TOLERANCE};

/// A broken modelling assumption found by [`validate_problem`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    StartOutOfRange { start: StateId },
    SuccessorOutOfRange { state: StateId, action: ActionId, successor: StateId },
    EmptyDistribution { state: StateId, action: ActionId },
    Normalization { state: StateId, action: ActionId, mass: f64 },
    InvalidProbability { state: StateId, action: ActionId, successor: StateId, probability: f64 },
    DuplicateSuccessor { state: StateId, action: ActionId, successor: StateId },
    NonPositiveCost { state: StateId, action: ActionId, cost: f64 },
    GoalNotAbsorbing { state: StateId, action: ActionId },
    NoApplicableAction { state: StateId },
    NoProperPolicy { state: StateId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::StartOutOfRange { start } => write!(f, "start state {start} out of range"),
            Violation::SuccessorOutOfRange { state, action, successor } => {
                write!(f, "({state}, {action}): successor {successor} out of range")
            }
            Violation::EmptyDistribution { state, action } => write!(f, "({state}, {action}): no outcomes"),
            Violation::Normalization { state, action, mass } => {
                write!(f, "({state}, {action}): probabilities sum to {mass}")
            }
            Violation::InvalidProbability { state, action, successor, probability } => {
                write!(f, "({state}, {action}): successor {successor} has probability {probability}")
            }
            Violation::DuplicateSuccessor { state, action, successor } => {
                write!(f, "({state}, {action}): successor {successor} listed twice")
            }
            Violation::NonPositiveCost { state, action, cost } => {
                write!(f, "({state}, {action}): non-goal cost {cost} is not positive")
            }
            Violation::GoalNotAbsorbing { state, action } => {
                write!(f, "goal {state}: action {action} is not a zero-cost self-loop")
            }
            Violation::NoApplicableAction { state } => write!(f, "state {state} has no applicable action"),
            Violation::NoProperPolicy { state } => write!(f, "no goal reachable from state {state}"),
        }
    }
}

/// Checks the SSP assumptions over the states reachable from the start:
/// normalized distributions, positive non-goal costs, absorbing zero-cost
/// goals, and a path to some goal from every reachable state.
pub fn validate_problem<M: SspModel + ?Sized>(model: &M) -> Vec<Violation> {
    let n = model.num_states();
    let start = model.start();
    if start.index() >= n {
        return vec![Violation::StartOutOfRange { start }];
    }
    let mut violations = Vec::new();
    let reachable = reachable_states_checked(model, start, &mut violations);

    let index: HashMap<StateId, usize> = reachable.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let mut predecessors: Vec<Vec<usize>> = vec![Vec::new(); reachable.len()];

    for (i, &s) in reachable.iter().enumerate() {
        let actions = model.applicable_actions(s);
        if actions.is_empty() {
            violations.push(Violation::NoApplicableAction { state: s });
            continue;
        }
        let goal = model.is_goal(s);
        for a in actions {
            let dist = model.transition(s, a);
            let cost = model.cost(s, a);
            if goal {
                if cost != 0.0 || dist.entries() != [(s, 1.0)] {
                    violations.push(Violation::GoalNotAbsorbing { state: s, action: a });
                }
                continue;
            }
            if cost.is_nan() || cost <= 0.0 {
                violations.push(Violation::NonPositiveCost { state: s, action: a, cost });
            }
            if dist.is_empty() {
                violations.push(Violation::EmptyDistribution { state: s, action: a });
                continue;
            }
            let mass = dist.total_mass();
            if (mass - 1.0).abs() > PROB_TOLERANCE {
                violations.push(Violation::Normalization { state: s, action: a, mass });
            }
            let mut prev: Option<StateId> = None;
            for &(next, p) in dist.entries() {
                if !(p > 0.0 && p <= 1.0 + PROB_TOLERANCE) {
                    violations.push(Violation::InvalidProbability {
                        state: s,
                        action: a,
                        successor: next,
                        probability: p,
                    });
                }
                if prev == Some(next) {
                    violations.push(Violation::DuplicateSuccessor { state: s, action: a, successor: next });
                }
                prev = Some(next);
                if let Some(&j) = index.get(&next) {
                    predecessors[j].push(i);
                }
            }
        }
    }

    // Backward search from the reachable goals.
    let mut can_reach_goal = vec![false; reachable.len()];
    let mut stack: Vec<usize> = (0..reachable.len()).filter(|&i| model.is_goal(reachable[i])).collect();
    for &i in &stack {
        can_reach_goal[i] = true;
    }
    while let Some(j) = stack.pop() {
        for &i in &predecessors[j] {
            if !can_reach_goal[i] {
                can_reach_goal[i] = true;
                stack.push(i);
            }
        }
    }
    for (i, &s) in reachable.iter().enumerate() {
        if !can_reach_goal[i] {
            violations.push(Violation::NoProperPolicy { state: s });
        }
    }
    violations
}

fn reachable_states_checked<M: SspModel + ?Sized>(
    model: &M,
    start: StateId,
    violations: &mut Vec<Violation>,
) -> Vec<StateId> {
    // Out-of-range successors would make the plain traversal panic.
    let n = model.num_states();
    let mut bad = false;
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start.index()] = true;
    while let Some(s) = stack.pop() {
        if model.is_goal(s) {
            continue;
        }
        for a in model.applicable_actions(s) {
            for next in model.transition(s, a).support() {
                if next.index() >= n {
                    violations.push(Violation::SuccessorOutOfRange { state: s, action: a, successor: next });
                    bad = true;
                } else if !seen[next.index()] {
                    seen[next.index()] = true;
                    stack.push(next);
                }
            }
        }
    }
    if bad {
        return (0..n).filter(|&i| seen[i]).map(StateId::from_index).collect();
    }
    reachable_states(model, start)
}
