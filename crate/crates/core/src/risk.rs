//! Risk predicates, the set of states where a reduced model forces unsafe
//! replanning, and sampled reachability to risky states.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::{Arc, OnceLock};

use rand::Rng as _;
use rayon::prelude::*;

use crate::mdp::{reachable_states, SspModel, StateId};
use crate::rng::{derive_seed, rng, Rng};

pub const DEFAULT_SAMPLES: usize = 30;
pub const DEFAULT_DEPTH: usize = 4;

/// `D(s)`: true iff deliberating (replanning) in `s` is unsafe.
#[derive(Clone)]
pub struct RiskPredicate {
    eval: Arc<dyn Fn(StateId) -> bool + Send + Sync>,
    feature_names: Vec<String>,
}

impl RiskPredicate {
    pub fn new<F>(feature_names: &[&str], eval: F) -> Self
    where
        F: Fn(StateId) -> bool + Send + Sync + 'static,
    {
        Self {
            eval: Arc::new(eval),
            feature_names: feature_names.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Risky exactly on `states`.
    pub fn from_states<I: IntoIterator<Item = StateId>>(states: I) -> Self {
        let set: BTreeSet<StateId> = states.into_iter().collect();
        Self::new(&["listed"], move |s| set.contains(&s))
    }

    pub fn never() -> Self {
        Self::new(&[], |_| false)
    }

    pub fn evaluate(&self, s: StateId) -> bool {
        (self.eval)(s)
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }
}

impl fmt::Debug for RiskPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RiskPredicate")
            .field("feature_names", &self.feature_names)
            .finish_non_exhaustive()
    }
}

/// `NSE(M') = { s' | T(s,a,s') > 0 ∧ D(s') ∧ s' ∉ θ'(s,a) }` over the pairs
/// `(s,a)` with `s` reachable from the start in the base model.
pub fn nse_set<B, R>(base: &B, reduced: &R, d: &RiskPredicate) -> BTreeSet<StateId>
where
    B: SspModel + ?Sized,
    R: SspModel + ?Sized,
{
    let mut out = BTreeSet::new();
    for s in reachable_states(base, base.start()) {
        if base.is_goal(s) {
            continue;
        }
        for a in base.applicable_actions(s) {
            let full = base.transition(s, a);
            let kept = reduced.transition(s, a);
            for t in full.support() {
                if d.evaluate(t) && !kept.contains(t) {
                    out.insert(t);
                }
            }
        }
    }
    out
}

/// Advances one uniformly random action from `s`; `None` at goals.
fn random_step<M: SspModel + ?Sized>(model: &M, s: StateId, rng: &mut Rng) -> Option<StateId> {
    if model.is_goal(s) {
        return None;
    }
    let actions = model.applicable_actions(s);
    if actions.is_empty() {
        return None;
    }
    let a = actions[rng.random_range(0..actions.len())];
    Some(model.transition(s, a).sample(rng.random::<f64>()))
}

/// `n` depth-limited random walks from `from`. Each trajectory starts with
/// `from` and holds at most `depth` transitions; walks stop early at goals.
pub fn sample_walks<M: SspModel + ?Sized>(
    base: &M,
    from: StateId,
    n: usize,
    depth: usize,
    seed: u64,
) -> Vec<Vec<StateId>> {
    assert!(n >= 1 && depth >= 1, "need at least one walk of depth >= 1");
    let mut rng = rng(seed);
    (0..n)
        .map(|_| {
            let mut walk = vec![from];
            let mut s = from;
            for _ in 0..depth {
                match random_step(base, s, &mut rng) {
                    Some(next) => {
                        walk.push(next);
                        s = next;
                    }
                    None => break,
                }
            }
            walk
        })
        .collect()
}

fn walk_hit_fraction<M: SspModel + ?Sized>(
    base: &M,
    d: &RiskPredicate,
    from: StateId,
    n: usize,
    depth: usize,
    seed: u64,
) -> f64 {
    let mut rng = rng(seed);
    let mut hits = 0usize;
    for _ in 0..n {
        let mut s = from;
        for _ in 0..depth {
            match random_step(base, s, &mut rng) {
                Some(next) if d.evaluate(next) => {
                    hits += 1;
                    break;
                }
                Some(next) => s = next,
                None => break,
            }
        }
    }
    hits as f64 / n as f64
}

/// Per-state estimate of the probability that a depth-limited random walk
/// visits a risky state. Values are filled lazily on first query, each from
/// its own seed stream, so the profile does not depend on query order.
pub struct RiskProfile {
    base: Arc<dyn SspModel>,
    predicate: RiskPredicate,
    samples: usize,
    depth: usize,
    seed: u64,
    reach: Vec<OnceLock<f64>>,
}

impl RiskProfile {
    pub fn reach(&self, s: StateId) -> f64 {
        *self.reach[s.index()].get_or_init(|| {
            if self.predicate.evaluate(s) {
                1.0
            } else {
                walk_hit_fraction(
                    &*self.base,
                    &self.predicate,
                    s,
                    self.samples,
                    self.depth,
                    derive_seed(self.seed, s.0 as u64),
                )
            }
        })
    }

    pub fn is_risky(&self, s: StateId) -> bool {
        self.predicate.evaluate(s)
    }

    pub fn predicate(&self) -> &RiskPredicate {
        &self.predicate
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Fills every state reachable from the base start, in parallel.
    pub fn precompute_reachable(&self) {
        let states = reachable_states(&*self.base, self.base.start());
        states.par_iter().for_each(|&s| {
            self.reach(s);
        });
    }

    /// States evaluated so far, in id order.
    pub fn computed(&self) -> Vec<(StateId, f64)> {
        self.reach
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.get().map(|&v| (StateId::from_index(i), v)))
            .collect()
    }

    /// One `state_id reach` line per evaluated state.
    pub fn dump(&self) -> String {
        self.computed().into_iter().map(|(s, r)| format!("{s} {r}\n")).collect()
    }
}

/// Parses the output of [`RiskProfile::dump`].
pub fn parse_risk_dump(text: &str) -> Result<Vec<(StateId, f64)>, String> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(n, line)| {
            let mut it = line.split_whitespace();
            let (Some(s), Some(r), None) = (it.next(), it.next(), it.next()) else {
                return Err(format!("line {}: expected `state_id reach`", n + 1));
            };
            let s = s.parse::<u32>().map_err(|e| format!("line {}: {e}", n + 1))?;
            let r = r.parse::<f64>().map_err(|e| format!("line {}: {e}", n + 1))?;
            Ok((StateId(s), r))
        })
        .collect()
}

/// Lazy reachability profile with `n` walks of length `depth` per state.
pub fn estimate_risk_profile(
    base: Arc<dyn SspModel>,
    d: RiskPredicate,
    n: usize,
    depth: usize,
    seed: u64,
) -> RiskProfile {
    assert!(n >= 1 && depth >= 1, "need at least one walk of depth >= 1");
    let reach = (0..base.num_states()).map(|_| OnceLock::new()).collect();
    RiskProfile {
        base,
        predicate: d,
        samples: n,
        depth,
        seed,
        reach,
    }
}

/// Exact probability that a depth-limited uniform-random-action walk from
/// each of `states` visits a risky state, by enumeration over outcomes.
pub fn exact_reach<M: SspModel + ?Sized>(base: &M, d: &RiskPredicate, states: &[StateId], depth: usize) -> Vec<f64> {
    let mut memo: HashMap<(StateId, usize), f64> = HashMap::new();
    states
        .iter()
        .map(|&s| {
            if d.evaluate(s) {
                1.0
            } else {
                exact_from(base, d, s, depth, &mut memo)
            }
        })
        .collect()
}

/// Probability of hitting risk within `steps` transitions from non-risky `s`.
fn exact_from<M: SspModel + ?Sized>(
    base: &M,
    d: &RiskPredicate,
    s: StateId,
    steps: usize,
    memo: &mut HashMap<(StateId, usize), f64>,
) -> f64 {
    if steps == 0 || base.is_goal(s) {
        return 0.0;
    }
    if let Some(&v) = memo.get(&(s, steps)) {
        return v;
    }
    let actions = base.applicable_actions(s);
    if actions.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for &a in &actions {
        let dist = base.transition(s, a).into_owned();
        for &(t, p) in dist.entries() {
            let hit = if d.evaluate(t) {
                1.0
            } else {
                exact_from(base, d, t, steps - 1, memo)
            };
            total += p * hit;
        }
    }
    let v = total / actions.len() as f64;
    memo.insert((s, steps), v);
    v
}
