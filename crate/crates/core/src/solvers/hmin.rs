use std::sync::Mutex;

use crate::mdp::{Heuristic, SspModel, StateId, ValueTable};

use super::SolverConfig;

/// Min-cost relaxation: every action is charged its cost plus the cheapest
/// value among its outcomes, `h(s) = min_a [C(s,a) + min_{s'∈θ(s,a)} h(s')]`.
///
/// Values are computed lazily with labeled LRTA* trials and cached; a state
/// is labeled solved once its residual is below epsilon and its greedy
/// successor is solved, and is never updated again.
pub struct Hmin<M> {
    model: M,
    epsilon: f64,
    max_trials: usize,
    state: Mutex<LrtaState>,
}

struct LrtaState {
    h: Vec<f64>,
    solved: Vec<bool>,
    evaluated: Vec<bool>,
    relaxed: Vec<Option<Box<[RelaxedAction]>>>,
    mark: Vec<u32>,
    generation: u32,
}

struct RelaxedAction {
    cost: f64,
    support: Box<[StateId]>,
}

#[derive(Clone, Copy)]
struct Greedy {
    q: f64,
    successor: StateId,
}

impl<M: SspModel> Hmin<M> {
    pub fn new(model: M, config: &SolverConfig) -> Self {
        let n = model.num_states();
        Self {
            model,
            epsilon: config.epsilon,
            max_trials: config.max_iterations,
            state: Mutex::new(LrtaState {
                h: vec![0.0; n],
                solved: vec![false; n],
                evaluated: vec![false; n],
                relaxed: (0..n).map(|_| None).collect(),
                mark: vec![0; n],
                generation: 0,
            }),
        }
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    /// Runs trials from `s` until it is labeled (or the trial cap is hit).
    pub fn value(&self, s: StateId) -> f64 {
        let mut st = self.state.lock().expect("hmin lock");
        self.solve_from(&mut st, s);
        st.h[s.index()]
    }

    pub fn is_solved(&self, s: StateId) -> bool {
        self.state.lock().expect("hmin lock").solved[s.index()]
    }

    /// Labels every state in `states`.
    pub fn warm<I: IntoIterator<Item = StateId>>(&self, states: I) {
        let mut st = self.state.lock().expect("hmin lock");
        for s in states {
            self.solve_from(&mut st, s);
        }
    }

    /// Every value computed so far.
    pub fn snapshot(&self) -> ValueTable {
        let st = self.state.lock().expect("hmin lock");
        st.evaluated
            .iter()
            .enumerate()
            .filter(|(_, &e)| e)
            .map(|(i, _)| (StateId::from_index(i), st.h[i]))
            .collect()
    }

    fn solve_from(&self, st: &mut LrtaState, s: StateId) {
        let mut trials = 0;
        while !self.labeled(st, s) && trials < self.max_trials {
            trials += 1;
            self.trial(st, s);
        }
    }

    fn labeled(&self, st: &mut LrtaState, s: StateId) -> bool {
        let i = s.index();
        st.evaluated[i] = true;
        if !st.solved[i] && self.model.is_goal(s) {
            st.solved[i] = true;
            st.h[i] = 0.0;
        }
        st.solved[i]
    }

    fn trial(&self, st: &mut LrtaState, start: StateId) {
        let step_cap = self.model.num_states().max(1);
        let mut visited = Vec::new();
        let mut s = start;
        while !self.labeled(st, s) && visited.len() < step_cap {
            visited.push(s);
            let g = self.greedy(st, s);
            st.h[s.index()] = g.q;
            s = g.successor;
        }
        while let Some(s) = visited.pop() {
            if !self.check_solved(st, s) {
                break;
            }
        }
    }

    fn check_solved(&self, st: &mut LrtaState, s: StateId) -> bool {
        st.generation = st.generation.wrapping_add(1).max(1);
        let gen = st.generation;
        let mut consistent = true;
        let mut open = vec![s];
        let mut closed = Vec::new();
        st.mark[s.index()] = gen;
        while let Some(x) = open.pop() {
            closed.push(x);
            if self.labeled(st, x) {
                continue;
            }
            let g = self.greedy(st, x);
            if (g.q - st.h[x.index()]).abs() > self.epsilon {
                consistent = false;
                continue;
            }
            let y = g.successor;
            if !self.labeled(st, y) && st.mark[y.index()] != gen {
                st.mark[y.index()] = gen;
                open.push(y);
            }
        }
        if consistent {
            for x in closed {
                st.solved[x.index()] = true;
            }
        } else {
            for &x in closed.iter().rev() {
                if !st.solved[x.index()] {
                    let g = self.greedy(st, x);
                    st.h[x.index()] = g.q;
                }
            }
        }
        consistent
    }

    fn greedy(&self, st: &mut LrtaState, s: StateId) -> Greedy {
        if st.relaxed[s.index()].is_none() {
            let actions: Box<[RelaxedAction]> = self
                .model
                .applicable_actions(s)
                .into_iter()
                .map(|a| RelaxedAction {
                    cost: self.model.cost(s, a),
                    support: self.model.transition(s, a).support().collect(),
                })
                .collect();
            st.relaxed[s.index()] = Some(actions);
        }
        let mut best = Greedy {
            q: f64::INFINITY,
            successor: s,
        };
        let actions = st.relaxed[s.index()].as_deref().expect("cached");
        for action in actions {
            let mut min = (f64::INFINITY, s);
            for &t in action.support.iter() {
                let v = if self.model.is_goal(t) { 0.0 } else { st.h[t.index()] };
                if v < min.0 {
                    min = (v, t);
                }
            }
            let q = action.cost + min.0;
            if q < best.q {
                best = Greedy { q, successor: min.1 };
            }
        }
        best
    }
}

impl<M: SspModel> Heuristic for Hmin<M> {
    fn estimate(&self, s: StateId) -> f64 {
        self.value(s)
    }
}

/// Runs labeled LRTA* on the min-cost relaxation until `start` is solved and
/// returns every value computed along the way. States never touched by the
/// trials are absent.
pub fn compute_hmin<M: SspModel + ?Sized>(model: &M, start: StateId, config: &SolverConfig) -> ValueTable {
    let hmin = Hmin::new(model, config);
    hmin.value(start);
    hmin.snapshot()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{ActionId, ExplicitSsp};

    #[test]
    fn goal_adjacent_single_action() {
        let mut m = ExplicitSsp::new(2, 1, StateId(0));
        m.add_deterministic(StateId(0), ActionId(0), 3.0, StateId(1));
        m.set_goal(StateId(1));
        let h = compute_hmin(&m, StateId(0), &SolverConfig::default());
        assert_eq!(h.get(StateId(0)), Some(3.0));
    }

    #[test]
    fn relaxation_takes_cheapest_outcome() {
        // 0 -a(1)-> {1: 0.9, 3: 0.1}; 1 -(5)-> 3. The relaxation ignores the
        // likely detour, so h(0) = 1.
        let mut m = ExplicitSsp::new(4, 1, StateId(0));
        m.add_action(StateId(0), ActionId(0), 1.0, vec![(StateId(1), 0.9), (StateId(3), 0.1)]);
        m.add_deterministic(StateId(1), ActionId(0), 5.0, StateId(3));
        m.add_deterministic(StateId(2), ActionId(0), 1.0, StateId(3));
        m.set_goal(StateId(3));
        let hmin = Hmin::new(&m, &SolverConfig::default());
        assert_eq!(hmin.value(StateId(0)), 1.0);
        assert!(hmin.is_solved(StateId(0)));
        let snap = hmin.snapshot();
        assert!(snap.get(StateId(2)).is_none(), "unreachable state is never evaluated");
    }

    #[test]
    fn longer_chain_converges() {
        let n = 30u32;
        let mut m = ExplicitSsp::new(n as usize + 1, 2, StateId(0));
        for i in 0..n {
            m.add_deterministic(StateId(i), ActionId(0), 1.0, StateId(i + 1));
            m.add_deterministic(StateId(i), ActionId(1), 0.5, StateId(i.saturating_sub(1)));
        }
        m.set_goal(StateId(n));
        let h = compute_hmin(&m, StateId(0), &SolverConfig::default());
        assert!((h.get(StateId(0)).unwrap() - n as f64).abs() < 1e-9);
    }
}
