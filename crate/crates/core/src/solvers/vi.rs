use std::collections::HashMap;
use std::time::Instant;

use crate::mdp::{reachable_states_capped, ActionId, Policy, SspModel, StateId, ValueTable};

use super::{Solution, SolverConfig, SolverError};

struct LocalEdge {
    action: ActionId,
    cost: f64,
    outcomes: Vec<(usize, f64)>,
}

/// Gauss-Seidel value iteration over every state reachable from the model's
/// start, until the largest residual of a sweep drops below epsilon.
pub fn solve_value_iteration<M: SspModel + ?Sized>(
    model: &M,
    config: &SolverConfig,
) -> Result<Solution, SolverError> {
    let clock = Instant::now();
    let start = model.start();
    let states = reachable_states_capped(model, start, config.state_cap).map_err(|_| {
        SolverError::TooManyStates {
            cap: config.state_cap,
        }
    })?;
    let local: HashMap<StateId, usize> = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let goal: Vec<bool> = states.iter().map(|&s| model.is_goal(s)).collect();

    let mut edges: Vec<Vec<LocalEdge>> = Vec::with_capacity(states.len());
    for (i, &s) in states.iter().enumerate() {
        if goal[i] {
            edges.push(Vec::new());
            continue;
        }
        let actions = model.applicable_actions(s);
        if actions.is_empty() {
            return Err(SolverError::DeadEnd(s));
        }
        edges.push(
            actions
                .into_iter()
                .map(|a| LocalEdge {
                    action: a,
                    cost: model.cost(s, a),
                    outcomes: model
                        .transition(s, a)
                        .entries()
                        .iter()
                        .map(|&(t, p)| (local[&t], p))
                        .collect(),
                })
                .collect(),
        );
    }

    let mut value: Vec<f64> = states
        .iter()
        .zip(&goal)
        .map(|(&s, &g)| if g { 0.0 } else { config.heuristic.estimate(s) })
        .collect();
    let mut best = vec![0usize; states.len()];

    let backup = |edges: &[LocalEdge], value: &[f64]| -> (f64, usize) {
        let mut out = (f64::INFINITY, 0);
        for (k, e) in edges.iter().enumerate() {
            let q = e.cost + e.outcomes.iter().map(|&(t, p)| p * value[t]).sum::<f64>();
            if q < out.0 {
                out = (q, k);
            }
        }
        out
    };

    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < config.max_iterations {
        sweeps += 1;
        let mut residual: f64 = 0.0;
        for i in 0..states.len() {
            if goal[i] {
                continue;
            }
            let (v, k) = backup(&edges[i], &value);
            residual = residual.max((v - value[i]).abs());
            value[i] = v;
            best[i] = k;
        }
        if residual < config.epsilon {
            converged = true;
            break;
        }
    }

    let mut policy = Policy::new();
    let mut in_envelope = vec![false; states.len()];
    let mut stack = vec![0usize];
    in_envelope[0] = true;
    while let Some(i) = stack.pop() {
        if goal[i] {
            continue;
        }
        let edge = &edges[i][best[i]];
        policy.insert(states[i], edge.action);
        for &(t, _) in &edge.outcomes {
            if !in_envelope[t] {
                in_envelope[t] = true;
                stack.push(t);
            }
        }
    }
    let values: ValueTable = states.iter().copied().zip(value.iter().copied()).collect();
    let solution = Solution {
        start,
        policy,
        values,
        expanded_states: states.len(),
        solve_time: clock.elapsed(),
    };
    if converged {
        Ok(solution)
    } else {
        Err(SolverError::NonConvergence {
            iterations: sweeps,
            best: Box::new(solution),
        })
    }
}
