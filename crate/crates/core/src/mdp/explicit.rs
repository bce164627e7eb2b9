use std::borrow::Cow;

use super::{reachable_states_capped, ActionId, MdpError, OutcomeDistribution, SspModel, StateId};

#[derive(Debug, Clone)]
struct ActionEntry {
    action: ActionId,
    cost: f64,
    outcomes: OutcomeDistribution,
}

/// Fully materialized SSP. Used for small hand-built models and for
/// snapshotting the reachable part of a lazily generated model.
#[derive(Debug, Clone)]
pub struct ExplicitSsp {
    num_actions: usize,
    start: StateId,
    goals: Vec<bool>,
    actions: Vec<Vec<ActionEntry>>,
}

impl ExplicitSsp {
    pub fn new(num_states: usize, num_actions: usize, start: StateId) -> Self {
        Self {
            num_actions,
            start,
            goals: vec![false; num_states],
            actions: vec![Vec::new(); num_states],
        }
    }

    /// Marks `g` as an absorbing goal. A zero-cost self-loop on action 0 is
    /// installed if the state has no actions yet.
    pub fn set_goal(&mut self, g: StateId) -> &mut Self {
        self.goals[g.index()] = true;
        if self.actions[g.index()].is_empty() {
            self.actions[g.index()].push(ActionEntry {
                action: ActionId(0),
                cost: 0.0,
                outcomes: OutcomeDistribution::deterministic(g),
            });
        }
        self
    }

    /// Adds (or replaces) an action. The distribution is stored as given;
    /// run [`super::validate_problem`] to check it.
    pub fn add_action(
        &mut self,
        s: StateId,
        a: ActionId,
        cost: f64,
        outcomes: Vec<(StateId, f64)>,
    ) -> &mut Self {
        self.insert(s, a, cost, OutcomeDistribution::unchecked(outcomes))
    }

    pub fn add_deterministic(&mut self, s: StateId, a: ActionId, cost: f64, next: StateId) -> &mut Self {
        self.insert(s, a, cost, OutcomeDistribution::deterministic(next))
    }

    fn insert(&mut self, s: StateId, a: ActionId, cost: f64, outcomes: OutcomeDistribution) -> &mut Self {
        let list = &mut self.actions[s.index()];
        list.retain(|e| e.action != a);
        list.push(ActionEntry { action: a, cost, outcomes });
        list.sort_by_key(|e| e.action);
        self
    }

    pub fn set_start(&mut self, s: StateId) -> &mut Self {
        self.start = s;
        self
    }

    /// Copies the part of `model` reachable from its start state. Refuses when
    /// more than `cap` states are reachable.
    pub fn materialize<M: SspModel + ?Sized>(model: &M, cap: usize) -> Result<Self, MdpError> {
        let reachable = reachable_states_capped(model, model.start(), cap)?;
        let mut out = Self::new(model.num_states(), model.num_actions(), model.start());
        for s in reachable {
            out.goals[s.index()] = model.is_goal(s);
            for a in model.applicable_actions(s) {
                let outcomes = model.transition(s, a).into_owned();
                out.insert(s, a, model.cost(s, a), outcomes);
            }
        }
        Ok(out)
    }

    fn entry(&self, s: StateId, a: ActionId) -> &ActionEntry {
        self.actions[s.index()]
            .iter()
            .find(|e| e.action == a)
            .unwrap_or_else(|| panic!("action {a} not applicable in state {s}"))
    }
}

impl SspModel for ExplicitSsp {
    fn num_states(&self) -> usize {
        self.goals.len()
    }

    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn start(&self) -> StateId {
        self.start
    }

    fn is_goal(&self, s: StateId) -> bool {
        self.goals[s.index()]
    }

    fn applicable_actions(&self, s: StateId) -> Vec<ActionId> {
        self.actions[s.index()].iter().map(|e| e.action).collect()
    }

    fn transition(&self, s: StateId, a: ActionId) -> Cow<'_, OutcomeDistribution> {
        Cow::Borrowed(&self.entry(s, a).outcomes)
    }

    fn cost(&self, s: StateId, a: ActionId) -> f64 {
        self.entry(s, a).cost
    }
}
