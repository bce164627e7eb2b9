use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::time::Instant;

use ordered_float::OrderedFloat;

use crate::mdp::{ActionId, Heuristic, Policy, SspModel, StateId, ValueTable};

use super::{Solution, SolverError};

/// A* over a model in which every outcome distribution is a single
/// successor. The returned policy covers the cheapest path from `start`.
pub fn solve_deterministic<M: SspModel + ?Sized>(
    model: &M,
    start: StateId,
    heuristic: &dyn Heuristic,
) -> Result<Solution, SolverError> {
    let clock = Instant::now();
    let mut g: HashMap<StateId, f64> = HashMap::new();
    let mut parent: HashMap<StateId, (StateId, ActionId)> = HashMap::new();
    let mut closed: HashMap<StateId, f64> = HashMap::new();
    let mut open = BinaryHeap::new();
    let mut expanded = 0usize;

    g.insert(start, 0.0);
    open.push(Reverse((OrderedFloat(heuristic.estimate(start)), start)));

    while let Some(Reverse((_, s))) = open.pop() {
        let gs = g[&s];
        if closed.get(&s).is_some_and(|&c| c <= gs) {
            continue;
        }
        closed.insert(s, gs);
        if model.is_goal(s) {
            return Ok(path_solution(start, s, gs, &g, &parent, expanded, clock));
        }
        expanded += 1;
        let actions = model.applicable_actions(s);
        for a in actions {
            let dist = model.transition(s, a);
            if !dist.is_deterministic() {
                return Err(SolverError::NotDeterministic {
                    state: s,
                    action: a,
                    outcomes: dist.len(),
                });
            }
            let next = dist.entries()[0].0;
            let candidate = gs + model.cost(s, a);
            if g.get(&next).is_none_or(|&old| candidate < old) {
                g.insert(next, candidate);
                parent.insert(next, (s, a));
                let h = if model.is_goal(next) { 0.0 } else { heuristic.estimate(next) };
                open.push(Reverse((OrderedFloat(candidate + h), next)));
            }
        }
    }
    Err(SolverError::DeadEnd(start))
}

fn path_solution(
    start: StateId,
    goal: StateId,
    total: f64,
    g: &HashMap<StateId, f64>,
    parent: &HashMap<StateId, (StateId, ActionId)>,
    expanded: usize,
    clock: Instant,
) -> Solution {
    let mut policy = Policy::new();
    let mut values = ValueTable::new();
    values.set(goal, 0.0);
    let mut s = goal;
    while s != start {
        let (prev, a) = parent[&s];
        policy.insert(prev, a);
        values.set(prev, total - g[&prev]);
        s = prev;
    }
    Solution {
        start,
        policy,
        values,
        expanded_states: expanded,
        solve_time: clock.elapsed(),
    }
}
