//! Outcome selection principles, model selectors and reduced models.
//!
//! A reduced model keeps the states, actions, costs, start and goals of its
//! base problem and replaces each `T(s,a,·)` by the outcomes picked by the
//! principle its selector assigns to `(s,a)`, renormalized.

use std::borrow::Cow;
use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use thiserror::Error;

use crate::mdp::{reachable_states, ActionId, OutcomeDistribution, SspModel, StateId};
use crate::risk::RiskProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SelectionKind {
    /// Keep the single most probable outcome.
    MostLikely,
    /// Keep the `k` most probable outcomes.
    GreedyK(usize),
    /// Keep every outcome.
    FullModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TieBreak {
    #[default]
    LowestStateId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OutcomeSelectionPrinciple {
    pub kind: SelectionKind,
    pub tie_break: TieBreak,
}

impl OutcomeSelectionPrinciple {
    /// Most-likely-outcome determinization.
    pub const MLOD: Self = Self::new(SelectionKind::MostLikely);
    /// Greedy two-outcome reduction.
    pub const M02: Self = Self::new(SelectionKind::GreedyK(2));
    pub const FULL: Self = Self::new(SelectionKind::FullModel);

    pub const fn new(kind: SelectionKind) -> Self {
        Self {
            kind,
            tie_break: TieBreak::LowestStateId,
        }
    }

    pub fn greedy(k: usize) -> Self {
        assert!(k >= 1, "greedy selection needs k >= 1");
        Self::new(SelectionKind::GreedyK(k))
    }

    /// Upper bound on outcomes kept, `None` for the full model.
    pub fn max_outcomes(&self) -> Option<usize> {
        match self.kind {
            SelectionKind::MostLikely => Some(1),
            SelectionKind::GreedyK(k) => Some(k),
            SelectionKind::FullModel => None,
        }
    }
}

impl fmt::Display for OutcomeSelectionPrinciple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            SelectionKind::MostLikely => write!(f, "mlod"),
            SelectionKind::GreedyK(k) => write!(f, "greedy-{k}"),
            SelectionKind::FullModel => write!(f, "full"),
        }
    }
}

/// Applies `principle` to `full`: keeps the chosen outcomes and divides each
/// kept probability by the kept mass. Probability ties go to the lower
/// successor id.
pub fn select_outcomes(principle: OutcomeSelectionPrinciple, full: &OutcomeDistribution) -> OutcomeDistribution {
    let Some(k) = principle.max_outcomes() else {
        return full.clone();
    };
    if k >= full.len() {
        return full.clone();
    }
    let mut ranked: Vec<(StateId, f64)> = full.entries().to_vec();
    match principle.tie_break {
        TieBreak::LowestStateId => ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))),
    }
    ranked.truncate(k);
    let mass: f64 = ranked.iter().map(|&(_, p)| p).sum();
    OutcomeDistribution::unchecked(ranked.into_iter().map(|(s, p)| (s, p / mass)).collect())
}

/// Maps each state-action pair to an outcome selection principle.
#[derive(Clone)]
pub enum ModelSelector {
    /// The same principle everywhere: a classical single-principle reduction.
    Uniform(OutcomeSelectionPrinciple),
    /// Explicit per-pair assignment with an optional fallback.
    Table {
        pairs: HashMap<(StateId, ActionId), OutcomeSelectionPrinciple>,
        default: Option<OutcomeSelectionPrinciple>,
    },
    /// One-or-all selection driven by reachability to risky states.
    ZeroOne(ZeroOneSelector),
}

#[derive(Clone)]
pub struct ZeroOneSelector {
    pub risk: Arc<RiskProfile>,
    pub threshold: f64,
}

impl ZeroOneSelector {
    /// Full model when `s` reaches risk with estimated probability at least
    /// `threshold` (and above zero), or when some outcome of `(s,a)` is itself
    /// risky; most-likely determinization otherwise.
    pub fn principle(&self, s: StateId, full: &OutcomeDistribution) -> OutcomeSelectionPrinciple {
        let reach = self.risk.reach(s);
        if reach > 0.0 && reach >= self.threshold {
            return OutcomeSelectionPrinciple::FULL;
        }
        if full.support().any(|t| self.risk.is_risky(t)) {
            return OutcomeSelectionPrinciple::FULL;
        }
        OutcomeSelectionPrinciple::MLOD
    }
}

impl fmt::Debug for ModelSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSelector::Uniform(p) => write!(f, "Uniform({p})"),
            ModelSelector::Table { pairs, default } => f
                .debug_struct("Table")
                .field("pairs", &pairs.len())
                .field("default", default)
                .finish(),
            ModelSelector::ZeroOne(z) => write!(f, "ZeroOne(threshold={})", z.threshold),
        }
    }
}

impl ModelSelector {
    /// Principle for `(s,a)`; `full` is the base distribution of the pair.
    pub fn principle(&self, s: StateId, a: ActionId, full: &OutcomeDistribution) -> Option<OutcomeSelectionPrinciple> {
        match self {
            ModelSelector::Uniform(p) => Some(*p),
            ModelSelector::Table { pairs, default } => pairs.get(&(s, a)).copied().or(*default),
            ModelSelector::ZeroOne(z) => Some(z.principle(s, full)),
        }
    }

    /// True when every pair keeps exactly one outcome.
    pub fn is_determinizing(&self) -> bool {
        match self {
            ModelSelector::Uniform(p) => p.max_outcomes() == Some(1),
            ModelSelector::Table { pairs, default } => {
                default.is_none_or(|p| p.max_outcomes() == Some(1))
                    && pairs.values().all(|p| p.max_outcomes() == Some(1))
            }
            ModelSelector::ZeroOne(_) => false,
        }
    }
}

/// Selector for a 0/1 reduced model: the full model in states whose
/// estimated reachability to risk meets `threshold` and in pairs with a
/// risky outcome, most-likely determinization everywhere else.
pub fn make_01rm_selector(risk_profile: Arc<RiskProfile>, threshold: f64) -> ModelSelector {
    assert!((0.0..=1.0).contains(&threshold), "threshold must lie in [0, 1]");
    ModelSelector::ZeroOne(ZeroOneSelector {
        risk: risk_profile,
        threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReductionError {
    #[error("model selector assigns no principle to ({state}, {action})")]
    MissingAssignment { state: StateId, action: ActionId },
}

struct ReducedState {
    actions: Box<[(ActionId, OutcomeSelectionPrinciple, OutcomeDistribution)]>,
}

/// `M' = <S, A, T', C, s0, S_G>` with `T'(s,a,·)` selected per pair and
/// memoized on first use.
pub struct ReducedModel {
    base: Arc<dyn SspModel>,
    selector: ModelSelector,
    memo: Vec<OnceLock<ReducedState>>,
}

impl ReducedModel {
    pub fn base(&self) -> &Arc<dyn SspModel> {
        &self.base
    }

    pub fn selector(&self) -> &ModelSelector {
        &self.selector
    }

    /// Principle chosen for `(s,a)`.
    pub fn principle(&self, s: StateId, a: ActionId) -> OutcomeSelectionPrinciple {
        self.entry(s, a).1
    }

    pub fn is_determinizing(&self) -> bool {
        self.selector.is_determinizing()
    }

    fn state(&self, s: StateId) -> &ReducedState {
        self.memo[s.index()].get_or_init(|| {
            let actions = self
                .base
                .applicable_actions(s)
                .into_iter()
                .map(|a| {
                    let full = self.base.transition(s, a);
                    let principle = self
                        .selector
                        .principle(s, a, &full)
                        .expect("selector totality checked at build time");
                    let reduced = select_outcomes(principle, &full);
                    (a, principle, reduced)
                })
                .collect();
            ReducedState { actions }
        })
    }

    fn entry(&self, s: StateId, a: ActionId) -> &(ActionId, OutcomeSelectionPrinciple, OutcomeDistribution) {
        let st = self.state(s);
        let i = st
            .actions
            .binary_search_by_key(&a, |e| e.0)
            .unwrap_or_else(|_| panic!("action {a} not applicable in state {s}"));
        &st.actions[i]
    }
}

impl SspModel for ReducedModel {
    fn num_states(&self) -> usize {
        self.base.num_states()
    }

    fn num_actions(&self) -> usize {
        self.base.num_actions()
    }

    fn start(&self) -> StateId {
        self.base.start()
    }

    fn is_goal(&self, s: StateId) -> bool {
        self.base.is_goal(s)
    }

    fn applicable_actions(&self, s: StateId) -> Vec<ActionId> {
        self.base.applicable_actions(s)
    }

    fn transition(&self, s: StateId, a: ActionId) -> Cow<'_, OutcomeDistribution> {
        if self.base.is_goal(s) {
            return self.base.transition(s, a);
        }
        Cow::Borrowed(&self.entry(s, a).2)
    }

    fn cost(&self, s: StateId, a: ActionId) -> f64 {
        self.base.cost(s, a)
    }

    fn describe_state(&self, s: StateId) -> String {
        self.base.describe_state(s)
    }
}

/// Wraps `base` with `selector`. Explicit tables without a fallback must
/// cover every pair reachable from the start.
pub fn build_reduced_model(base: Arc<dyn SspModel>, selector: ModelSelector) -> Result<ReducedModel, ReductionError> {
    if let ModelSelector::Table { pairs, default: None } = &selector {
        for s in reachable_states(&*base, base.start()) {
            if base.is_goal(s) {
                continue;
            }
            for a in base.applicable_actions(s) {
                if !pairs.contains_key(&(s, a)) {
                    return Err(ReductionError::MissingAssignment { state: s, action: a });
                }
            }
        }
    }
    let memo = (0..base.num_states()).map(|_| OnceLock::new()).collect();
    Ok(ReducedModel { base, selector, memo })
}

/// Counts of principles assigned over the pairs reachable from the start.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SelectorSummary {
    pub full_model: usize,
    pub most_likely: usize,
    pub greedy: usize,
}

impl SelectorSummary {
    pub fn total(&self) -> usize {
        self.full_model + self.most_likely + self.greedy
    }
}

impl fmt::Display for SelectorSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "full={} mlod={} greedy={} (pairs={})",
            self.full_model,
            self.most_likely,
            self.greedy,
            self.total()
        )
    }
}

pub fn summarize_selector(model: &ReducedModel) -> SelectorSummary {
    let base = model.base();
    let mut out = SelectorSummary::default();
    for s in reachable_states(&**base, base.start()) {
        if base.is_goal(s) {
            continue;
        }
        for a in base.applicable_actions(s) {
            match model.principle(s, a).kind {
                SelectionKind::FullModel => out.full_model += 1,
                SelectionKind::MostLikely => out.most_likely += 1,
                SelectionKind::GreedyK(_) => out.greedy += 1,
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(entries: &[(u32, f64)]) -> OutcomeDistribution {
        OutcomeDistribution::new(entries.iter().map(|&(s, p)| (StateId(s), p)).collect()).unwrap()
    }

    #[test]
    fn mlod_keeps_argmax() {
        let d = select_outcomes(OutcomeSelectionPrinciple::MLOD, &dist(&[(1, 0.6), (2, 0.4)]));
        assert_eq!(d.entries(), &[(StateId(1), 1.0)]);
    }

    #[test]
    fn greedy_two_renormalizes() {
        let d = select_outcomes(OutcomeSelectionPrinciple::M02, &dist(&[(1, 0.5), (2, 0.3), (3, 0.2)]));
        assert_eq!(d.len(), 2);
        assert!((d.probability(StateId(1)) - 0.625).abs() < 1e-12);
        assert!((d.probability(StateId(2)) - 0.375).abs() < 1e-12);
    }

    #[test]
    fn mlod_tie_goes_to_lowest_id() {
        let d = select_outcomes(OutcomeSelectionPrinciple::MLOD, &dist(&[(2, 0.5), (1, 0.5)]));
        assert_eq!(d.entries(), &[(StateId(1), 1.0)]);
    }

    #[test]
    fn full_model_is_identity() {
        let full = dist(&[(4, 0.1), (2, 0.2), (9, 0.7)]);
        assert_eq!(select_outcomes(OutcomeSelectionPrinciple::FULL, &full), full);
    }

    #[test]
    fn greedy_with_fewer_outcomes_keeps_all() {
        let full = dist(&[(0, 0.25), (1, 0.75)]);
        assert_eq!(select_outcomes(OutcomeSelectionPrinciple::greedy(3), &full), full);
    }
}
