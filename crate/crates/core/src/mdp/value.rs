use std::collections::HashMap;

use super::{ActionId, MdpError, SspModel, StateId};

/// Lower bound on the optimal cost-to-go, used to seed unvisited states.
pub trait Heuristic: Send + Sync {
    fn estimate(&self, s: StateId) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroHeuristic;

impl Heuristic for ZeroHeuristic {
    fn estimate(&self, _s: StateId) -> f64 {
        0.0
    }
}

impl<H: Heuristic + ?Sized> Heuristic for std::sync::Arc<H> {
    fn estimate(&self, s: StateId) -> f64 {
        (**self).estimate(s)
    }
}

impl<H: Heuristic + ?Sized> Heuristic for &H {
    fn estimate(&self, s: StateId) -> f64 {
        (**self).estimate(s)
    }
}

/// `V(s)` over the states a solver has evaluated. Missing states fall back
/// to a heuristic at lookup time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValueTable {
    values: HashMap<StateId, f64>,
}

impl ValueTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, s: StateId) -> Option<f64> {
        self.values.get(&s).copied()
    }

    pub fn set(&mut self, s: StateId, v: f64) {
        self.values.insert(s, v);
    }

    pub fn is_set(&self, s: StateId) -> bool {
        self.values.contains_key(&s)
    }

    pub fn value_or_else(&self, s: StateId, fallback: impl FnOnce() -> f64) -> f64 {
        self.get(s).unwrap_or_else(fallback)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Entries sorted by state id.
    pub fn sorted(&self) -> Vec<(StateId, f64)> {
        let mut v: Vec<_> = self.values.iter().map(|(&s, &x)| (s, x)).collect();
        v.sort_by_key(|&(s, _)| s);
        v
    }
}

impl FromIterator<(StateId, f64)> for ValueTable {
    fn from_iter<I: IntoIterator<Item = (StateId, f64)>>(iter: I) -> Self {
        Self {
            values: iter.into_iter().collect(),
        }
    }
}

/// Unset entries estimate to zero, which is admissible for non-negative costs.
impl Heuristic for ValueTable {
    fn estimate(&self, s: StateId) -> f64 {
        self.get(s).unwrap_or(0.0)
    }
}

/// Partial policy. States outside the solved envelope have no action.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Policy {
    actions: HashMap<StateId, ActionId>,
}

impl Policy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, s: StateId) -> Option<ActionId> {
        self.actions.get(&s).copied()
    }

    pub fn insert(&mut self, s: StateId, a: ActionId) {
        self.actions.insert(s, a);
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Overwrites entries with those of `newer`; entries absent there are kept.
    pub fn merge(&mut self, newer: &Policy) {
        self.actions.extend(newer.actions.iter().map(|(&s, &a)| (s, a)));
    }

    /// Entries sorted by state id.
    pub fn sorted(&self) -> Vec<(StateId, ActionId)> {
        let mut v: Vec<_> = self.actions.iter().map(|(&s, &a)| (s, a)).collect();
        v.sort();
        v
    }

    /// One `state action` line per entry.
    pub fn dump(&self) -> String {
        self.sorted().into_iter().map(|(s, a)| format!("{s} {a}\n")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Backup {
    pub value: f64,
    pub action: ActionId,
}

/// `Q(s,a) = C(s,a) + Σ T(s,a,s')·V(s')`, with goal successors valued at zero.
pub fn q_value<M: SspModel + ?Sized>(
    model: &M,
    s: StateId,
    a: ActionId,
    mut value: impl FnMut(StateId) -> f64,
) -> f64 {
    model.cost(s, a)
        + model
            .transition(s, a)
            .expectation(|next| if model.is_goal(next) { 0.0 } else { value(next) })
}

/// `min_a Q(s,a)` and its minimizer; ties go to the lowest action id.
pub fn bellman_backup<M: SspModel + ?Sized>(
    model: &M,
    s: StateId,
    mut value: impl FnMut(StateId) -> f64,
) -> Result<Backup, MdpError> {
    let mut best: Option<Backup> = None;
    for a in model.applicable_actions(s) {
        let q = q_value(model, s, a, &mut value);
        if best.is_none_or(|b| q < b.value) {
            best = Some(Backup { value: q, action: a });
        }
    }
    best.ok_or(MdpError::DeadEnd(s))
}
