use std::time::Instant;

use crate::mdp::{ActionId, Policy, SspModel, StateId, ValueTable};

use super::{Solution, SolverConfig, SolverError};

const NO_ACTION: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Edge {
    action: ActionId,
    cost: f64,
    outcomes: Box<[(StateId, f64)]>,
}

/// Improved LAO*: repeated depth-first passes over the best partial solution
/// graph, expanding tips and backing up states in postorder, until a pass
/// expands nothing and every residual is below epsilon.
///
/// The solver keeps its value function and expansions between calls, so
/// successive [`LaoStar::solve`] calls from different start states are
/// warm-started.
pub struct LaoStar<'m, M: SspModel + ?Sized> {
    model: &'m M,
    config: SolverConfig,
    value: Vec<f64>,
    best: Vec<u32>,
    edges: Vec<Option<Box<[Edge]>>>,
    mark: Vec<u32>,
    generation: u32,
    expanded_total: usize,
}

impl<M: SspModel + ?Sized> Clone for LaoStar<'_, M> {
    fn clone(&self) -> Self {
        Self {
            model: self.model,
            config: self.config.clone(),
            value: self.value.clone(),
            best: self.best.clone(),
            edges: self.edges.clone(),
            mark: self.mark.clone(),
            generation: self.generation,
            expanded_total: self.expanded_total,
        }
    }
}

impl<'m, M: SspModel + ?Sized> LaoStar<'m, M> {
    pub fn new(model: &'m M, config: SolverConfig) -> Self {
        let n = model.num_states();
        Self {
            model,
            config,
            value: vec![f64::NAN; n],
            best: vec![NO_ACTION; n],
            edges: vec![None; n],
            mark: vec![0; n],
            generation: 0,
            expanded_total: 0,
        }
    }

    /// Total states expanded over the solver's lifetime.
    pub fn expanded_total(&self) -> usize {
        self.expanded_total
    }

    /// Current estimate for `s`, if it has been evaluated.
    pub fn value(&self, s: StateId) -> Option<f64> {
        let v = self.value[s.index()];
        (!v.is_nan()).then_some(v)
    }

    pub fn solve(&mut self, start: StateId) -> Result<Solution, SolverError> {
        let clock = Instant::now();
        let expanded_before = self.expanded_total;
        self.touch(start);
        if self.model.is_goal(start) {
            let mut values = ValueTable::new();
            values.set(start, 0.0);
            return Ok(Solution {
                start,
                policy: Policy::new(),
                values,
                expanded_states: 0,
                solve_time: clock.elapsed(),
            });
        }

        for _ in 0..self.config.max_iterations {
            let (expanded, residual, switched) = self.pass(start)?;
            if expanded == 0 && !switched && residual < self.config.epsilon {
                let (solution, complete) = self.extract(start, expanded_before, clock);
                if complete {
                    return Ok(solution);
                }
            }
        }
        let (best, _) = self.extract(start, expanded_before, clock);
        Err(SolverError::NonConvergence {
            iterations: self.config.max_iterations,
            best: Box::new(best),
        })
    }

    fn touch(&mut self, s: StateId) {
        let i = s.index();
        if self.value[i].is_nan() {
            self.value[i] = if self.model.is_goal(s) {
                0.0
            } else {
                self.config.heuristic.estimate(s)
            };
        }
    }

    fn expand(&mut self, s: StateId) -> Result<(), SolverError> {
        let actions = self.model.applicable_actions(s);
        if actions.is_empty() {
            return Err(SolverError::DeadEnd(s));
        }
        let mut edges = Vec::with_capacity(actions.len());
        for a in actions {
            let outcomes: Box<[(StateId, f64)]> = self.model.transition(s, a).entries().into();
            for &(next, _) in outcomes.iter() {
                self.touch(next);
            }
            edges.push(Edge {
                action: a,
                cost: self.model.cost(s, a),
                outcomes,
            });
        }
        self.edges[s.index()] = Some(edges.into_boxed_slice());
        self.expanded_total += 1;
        Ok(())
    }

    /// Returns the new value and the index of the greedy edge. Ties go to the
    /// lowest action id because edges are stored in action order.
    fn backup(&self, s: StateId) -> (f64, u32) {
        let edges = self.edges[s.index()].as_deref().expect("backup of unexpanded state");
        let mut best = (f64::INFINITY, NO_ACTION);
        for (k, e) in edges.iter().enumerate() {
            let q = e.cost + e.outcomes.iter().map(|&(t, p)| p * self.value[t.index()]).sum::<f64>();
            if q < best.0 {
                best = (q, k as u32);
            }
        }
        best
    }

    /// Backs up `s`; returns the residual and whether the greedy edge moved.
    fn update(&mut self, s: StateId) -> (f64, bool) {
        let (v, k) = self.backup(s);
        let i = s.index();
        let residual = (v - self.value[i]).abs();
        let switched = self.best[i] != k;
        self.value[i] = v;
        self.best[i] = k;
        (residual, switched)
    }

    fn enter(&mut self, s: StateId, expanded: &mut usize) -> Result<(), SolverError> {
        if self.edges[s.index()].is_none() {
            self.expand(s)?;
            *expanded += 1;
            self.update(s);
        }
        Ok(())
    }

    fn greedy_child(&self, s: StateId, k: usize) -> Option<StateId> {
        let edges = self.edges[s.index()].as_deref()?;
        edges[self.best[s.index()] as usize].outcomes.get(k).map(|&(t, _)| t)
    }

    /// One depth-first pass over the greedy graph. A pass can only certify
    /// convergence if no greedy edge moved: a moved edge may lead into states
    /// the pass never visited.
    fn pass(&mut self, start: StateId) -> Result<(usize, f64, bool), SolverError> {
        self.generation = self.generation.wrapping_add(1).max(1);
        let gen = self.generation;
        let mut expanded = 0;
        let mut residual: f64 = 0.0;
        let mut switched = false;

        self.mark[start.index()] = gen;
        self.enter(start, &mut expanded)?;
        let mut stack: Vec<(StateId, usize)> = vec![(start, 0)];
        while let Some(&(s, cursor)) = stack.last() {
            match self.greedy_child(s, cursor) {
                Some(child) => {
                    stack.last_mut().expect("non-empty").1 += 1;
                    let ci = child.index();
                    if self.mark[ci] != gen && !self.model.is_goal(child) {
                        self.mark[ci] = gen;
                        self.enter(child, &mut expanded)?;
                        stack.push((child, 0));
                    }
                }
                None => {
                    stack.pop();
                    let (r, moved) = self.update(s);
                    residual = residual.max(r);
                    switched |= moved;
                }
            }
        }
        Ok((expanded, residual, switched))
    }

    /// Policy over the greedy envelope from `start`; `complete` is false when
    /// the envelope still contains unexpanded non-goal states.
    fn extract(&self, start: StateId, expanded_before: usize, clock: Instant) -> (Solution, bool) {
        let mut policy = Policy::new();
        let mut values = ValueTable::new();
        let mut complete = true;
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![start];
        seen.insert(start);
        while let Some(s) = stack.pop() {
            values.set(s, self.value[s.index()]);
            if self.model.is_goal(s) {
                continue;
            }
            let Some(edges) = self.edges[s.index()].as_deref() else {
                complete = false;
                continue;
            };
            let edge = &edges[self.best[s.index()] as usize];
            policy.insert(s, edge.action);
            for &(t, _) in edge.outcomes.iter() {
                if seen.insert(t) {
                    stack.push(t);
                }
            }
        }
        let solution = Solution {
            start,
            policy,
            values,
            expanded_states: self.expanded_total - expanded_before,
            solve_time: clock.elapsed(),
        };
        (solution, complete)
    }
}

pub fn solve_lao_star<M: SspModel + ?Sized>(
    model: &M,
    start: StateId,
    config: &SolverConfig,
) -> Result<Solution, SolverError> {
    LaoStar::new(model, config.clone()).solve(start)
}
