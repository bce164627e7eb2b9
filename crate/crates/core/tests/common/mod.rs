#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use proptest::prelude::*;

use prm_core::domains::ev::{build_ev, generate_ev_scenarios, EvProblem};
use prm_core::domains::racetrack::{build_racetrack, Racetrack, RacetrackConfig};
use prm_core::domains::sailing::{build_sailing, GoalPosition, Sailing};
use prm_core::mdp::{ActionId, ExplicitSsp, SspModel, StateId};
use prm_core::risk::RiskPredicate;

/// Cost and weighted successors of one action.
pub type RandomAction = (f64, Vec<(usize, u32)>);

/// Raw description of a random SSP: per state, per action, a cost and
/// weighted successors. State `n - 1` is the goal.
#[derive(Debug, Clone)]
pub struct RandomSsp {
    pub n: usize,
    pub actions: Vec<Vec<RandomAction>>,
}

impl RandomSsp {
    /// Action 0 of state `i` always includes `i + 1`, so advancing is
    /// possible from everywhere and the problem is proper.
    pub fn build(&self) -> ExplicitSsp {
        let goal = self.n - 1;
        let max_actions = self.actions.iter().map(Vec::len).max().unwrap_or(1);
        let mut m = ExplicitSsp::new(self.n, max_actions, StateId(0));
        for (i, acts) in self.actions.iter().enumerate() {
            for (k, (cost, succ)) in acts.iter().enumerate() {
                let mut weights: BTreeMap<usize, u32> = BTreeMap::new();
                for &(t, w) in succ {
                    *weights.entry(t % self.n).or_default() += w;
                }
                if k == 0 {
                    *weights.entry(i + 1).or_default() += 1;
                }
                let total: u32 = weights.values().sum();
                let outcomes = weights
                    .into_iter()
                    .map(|(t, w)| (StateId(t as u32), w as f64 / total as f64))
                    .collect();
                m.add_action(StateId(i as u32), ActionId(k as u32), *cost, outcomes);
            }
        }
        m.set_goal(StateId(goal as u32));
        m
    }

    pub fn risky(&self, mask: u32) -> RiskPredicate {
        let goal = self.n - 1;
        RiskPredicate::from_states((0..goal).filter(|i| mask & (1 << i) != 0).map(|i| StateId(i as u32)))
    }
}

pub fn random_ssp(max_states: usize) -> impl Strategy<Value = RandomSsp> {
    (2..=max_states).prop_flat_map(|n| {
        let action = (0.5f64..5.0, prop::collection::vec((0..n, 1u32..6), 1..4));
        prop::collection::vec(prop::collection::vec(action, 1..4), n - 1).prop_map(move |actions| RandomSsp { n, actions })
    })
}

pub const SMALL_TRACK: &str = "\
XXXXXXXX
XS..P.GX
X..P..GX
XXXXXXXX
";

pub fn small_racetrack() -> (Arc<Racetrack>, RiskPredicate) {
    build_racetrack(SMALL_TRACK, RacetrackConfig { max_speed: 2, ..RacetrackConfig::default() }).unwrap()
}

pub fn small_sailing() -> (Arc<Sailing>, RiskPredicate) {
    build_sailing(5, GoalPosition::Corner).unwrap()
}

/// A short-horizon EV scenario with a few hundred states.
pub fn small_ev() -> (Arc<EvProblem>, RiskPredicate) {
    let mut sc = generate_ev_scenarios(1, 21).remove(0);
    sc.horizon = 4;
    sc.charge_levels = 4;
    sc.max_rate = 2;
    sc.start_charge = 0;
    sc.goal_charge = 3;
    sc.buy_prices.truncate(4);
    sc.sell_prices.truncate(4);
    sc.peak_hours.truncate(4);
    sc.announce_window = (1, 3);
    build_ev(sc).unwrap()
}

pub fn small_instances() -> Vec<(&'static str, Arc<dyn SspModel>, RiskPredicate)> {
    let (r, rd) = small_racetrack();
    let (s, sd) = small_sailing();
    let (e, ed) = small_ev();
    vec![("racetrack", r, rd), ("sailing", s, sd), ("ev", e, ed)]
}
