//! EV charging with vehicle-to-grid. A parked car charges, discharges or
//! idles each 30-minute step; demand level, price regime and the owner's
//! departure announcement evolve stochastically. The finite horizon is
//! unrolled into an SSP over `<l, t, d, p, e>` plus an absorbing sink.

use std::borrow::Cow;
use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::mdp::{ActionId, OutcomeDistribution, SspModel, StateId};
use crate::risk::RiskPredicate;
use crate::rng::{derive_seed, rng};

use super::{DomainError, Instance};

pub const DEMAND_LEVELS: usize = 4;
pub const PRICE_REGIMES: usize = 2;
/// `e` value meaning the departure is not announced yet.
pub const NOT_ANNOUNCED: u8 = 3;

pub const FEATURE_NAMES: [&str; 3] = ["time-remaining", "is-peak-hour", "sufficient-charge-for-discharge"];

/// Price table indexed `[t][d][p]`.
pub type PriceTable = Vec<[[f64; PRICE_REGIMES]; DEMAND_LEVELS]>;

/// One charging scenario. Serialized as JSON; see the README for the schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvScenario {
    pub name: String,
    pub horizon: usize,
    pub charge_levels: usize,
    pub max_rate: usize,
    pub start_charge: usize,
    pub goal_charge: usize,
    pub start_demand: usize,
    pub start_price: usize,
    pub buy_prices: PriceTable,
    pub sell_prices: PriceTable,
    pub peak_hours: Vec<bool>,
    pub demand_transition: [[f64; DEMAND_LEVELS]; DEMAND_LEVELS],
    pub price_switch: [f64; PRICE_REGIMES],
    /// Steps `[start, end)` with the higher announcement probability.
    pub announce_window: (usize, usize),
    pub announce_prob_window: f64,
    pub announce_prob_outside: f64,
    pub inefficiency: f64,
    /// Preference-violation penalty as a multiple of `R_max`.
    pub penalty_factor: f64,
}

impl EvScenario {
    pub fn validate(&self) -> Result<(), DomainError> {
        let fail = |m: String| Err(DomainError::Config(format!("scenario `{}`: {m}", self.name)));
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if self.horizon == 0 || self.charge_levels == 0 || self.max_rate == 0 {
            return fail("horizon, charge levels and max rate must be positive".into());
        }
        if self.goal_charge > self.charge_levels {
            return fail(format!("goal charge {} exceeds {} levels", self.goal_charge, self.charge_levels));
        }
        if self.start_charge > self.charge_levels {
            return fail(format!("start charge {} exceeds {} levels", self.start_charge, self.charge_levels));
        }
        if self.start_demand >= DEMAND_LEVELS || self.start_price >= PRICE_REGIMES {
            return fail("start demand or price regime out of range".into());
        }
        for (what, table) in [("buy", &self.buy_prices), ("sell", &self.sell_prices)] {
            if table.len() != self.horizon {
                return fail(format!("{what} prices cover {} steps, expected {}", table.len(), self.horizon));
            }
            if table.iter().flatten().flatten().any(|&p| !(p >= 0.0 && p.is_finite())) {
                return fail(format!("{what} prices must be finite and non-negative"));
            }
        }
        if self.peak_hours.len() != self.horizon {
            return fail(format!("peak mask covers {} steps, expected {}", self.peak_hours.len(), self.horizon));
        }
        for (d, row) in self.demand_transition.iter().enumerate() {
            if row.iter().any(|&p| !prob(p)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return fail(format!("demand transition row {d} is not a distribution"));
            }
        }
        let probs = [
            self.price_switch[0],
            self.price_switch[1],
            self.announce_prob_window,
            self.announce_prob_outside,
            self.inefficiency,
        ];
        if probs.iter().any(|&p| !prob(p)) {
            return fail("switch, announcement and inefficiency values must lie in [0,1]".into());
        }
        if !(self.penalty_factor > 0.0 && self.penalty_factor.is_finite()) {
            return fail("penalty factor must be positive".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DomainError> {
        let scenario: Self = serde_json::from_str(text).map_err(|e| DomainError::Config(format!("scenario JSON: {e}")))?;
        scenario.validate()?;
        Ok(scenario)
    }

    fn announce_prob(&self, t: usize) -> f64 {
        let (lo, hi) = self.announce_window;
        if (lo..hi).contains(&t) {
            self.announce_prob_window
        } else {
            self.announce_prob_outside
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvState {
    pub l: usize,
    pub t: usize,
    pub d: usize,
    pub p: usize,
    pub e: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvFeatures {
    pub time_remaining: usize,
    pub is_peak_hour: bool,
    pub sufficient_charge_for_discharge: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvAction {
    Idle,
    Charge(usize),
    Discharge(usize),
}

#[derive(Debug, Clone)]
pub struct EvProblem {
    scenario: EvScenario,
    r_max: f64,
    penalty: f64,
    sink: StateId,
}

impl EvProblem {
    pub fn new(scenario: EvScenario) -> Result<Self, DomainError> {
        scenario.validate()?;
        let best_sale = scenario
            .sell_prices
            .iter()
            .flatten()
            .flatten()
            .fold(0.0f64, |m, &p| m.max(p * scenario.max_rate as f64 * (1.0 - scenario.inefficiency)));
        let r_max = 1.0 + best_sale;
        let penalty = scenario.penalty_factor * r_max;
        let sink = StateId(
            ((scenario.charge_levels + 1) * (scenario.horizon + 1) * DEMAND_LEVELS * PRICE_REGIMES * 4) as u32,
        );
        Ok(Self {
            scenario,
            r_max,
            penalty,
            sink,
        })
    }

    pub fn scenario(&self) -> &EvScenario {
        &self.scenario
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    pub fn sink(&self) -> StateId {
        self.sink
    }

    pub fn encode(&self, st: EvState) -> StateId {
        let h = self.scenario.horizon + 1;
        let idx = (((st.l * h + st.t) * DEMAND_LEVELS + st.d) * PRICE_REGIMES + st.p) * 4 + st.e as usize;
        StateId(idx as u32)
    }

    /// `None` for the sink.
    pub fn decode(&self, s: StateId) -> Option<EvState> {
        if s == self.sink {
            return None;
        }
        let mut i = s.index();
        let e = (i % 4) as u8;
        i /= 4;
        let p = i % PRICE_REGIMES;
        i /= PRICE_REGIMES;
        let d = i % DEMAND_LEVELS;
        i /= DEMAND_LEVELS;
        let h = self.scenario.horizon + 1;
        Some(EvState { l: i / h, t: i % h, d, p, e })
    }

    pub fn action(&self, a: ActionId) -> EvAction {
        let r = self.scenario.max_rate;
        match a.index() {
            0 => EvAction::Idle,
            i if i <= r => EvAction::Charge(i),
            i => EvAction::Discharge(i - r),
        }
    }

    pub fn action_id(&self, action: EvAction) -> ActionId {
        ActionId(match action {
            EvAction::Idle => 0,
            EvAction::Charge(i) => i as u32,
            EvAction::Discharge(i) => (self.scenario.max_rate + i) as u32,
        })
    }

    fn is_departure(&self, st: &EvState) -> bool {
        st.t >= self.scenario.horizon || st.e == 0
    }

    /// Actions left before departure, ignoring future announcements.
    pub fn remaining_steps(&self, st: &EvState) -> usize {
        if self.is_departure(st) {
            0
        } else if st.e == NOT_ANNOUNCED {
            self.scenario.horizon - st.t
        } else {
            st.e as usize
        }
    }

    /// `D(s)`: the goal charge can no longer be reached before departure.
    pub fn is_risky(&self, s: StateId) -> bool {
        match self.decode(s) {
            None => false,
            Some(st) => {
                let deficit = self.scenario.goal_charge.saturating_sub(st.l);
                deficit > self.scenario.max_rate * self.remaining_steps(&st)
            }
        }
    }

    pub fn features(&self, s: StateId) -> Option<EvFeatures> {
        let st = self.decode(s)?;
        Some(EvFeatures {
            time_remaining: self.remaining_steps(&st),
            is_peak_hour: st.t < self.scenario.horizon && self.scenario.peak_hours[st.t],
            sufficient_charge_for_discharge: st.l > self.scenario.goal_charge,
        })
    }

    /// Reward of a non-terminal step, before the shift to costs.
    pub fn reward(&self, st: &EvState, action: EvAction) -> f64 {
        let sc = &self.scenario;
        match action {
            EvAction::Idle => 0.0,
            EvAction::Charge(i) => -sc.buy_prices[st.t][st.d][st.p] * i as f64,
            EvAction::Discharge(i) => sc.sell_prices[st.t][st.d][st.p] * i as f64 * (1.0 - sc.inefficiency),
        }
    }

    pub fn risk_predicate(self: &Arc<Self>) -> RiskPredicate {
        let model = Arc::clone(self);
        RiskPredicate::new(&FEATURE_NAMES, move |s| model.is_risky(s))
    }
}

impl SspModel for EvProblem {
    fn num_states(&self) -> usize {
        self.sink.index() + 1
    }

    fn num_actions(&self) -> usize {
        1 + 2 * self.scenario.max_rate
    }

    fn start(&self) -> StateId {
        let sc = &self.scenario;
        self.encode(EvState {
            l: sc.start_charge,
            t: 0,
            d: sc.start_demand,
            p: sc.start_price,
            e: NOT_ANNOUNCED,
        })
    }

    fn is_goal(&self, s: StateId) -> bool {
        match self.decode(s) {
            None => true,
            Some(st) => self.is_departure(&st) && st.l >= self.scenario.goal_charge,
        }
    }

    fn applicable_actions(&self, s: StateId) -> Vec<ActionId> {
        let Some(st) = self.decode(s) else {
            return vec![ActionId(0)];
        };
        if self.is_departure(&st) {
            return vec![ActionId(0)];
        }
        let r = self.scenario.max_rate;
        let mut out = vec![ActionId(0)];
        out.extend((1..=r).filter(|&i| st.l + i <= self.scenario.charge_levels).map(|i| self.action_id(EvAction::Charge(i))));
        out.extend((1..=r).filter(|&i| st.l >= i).map(|i| self.action_id(EvAction::Discharge(i))));
        out
    }

    fn transition(&self, s: StateId, a: ActionId) -> Cow<'_, OutcomeDistribution> {
        let st = match self.decode(s) {
            Some(st) if !self.is_goal(s) => st,
            _ => return Cow::Owned(OutcomeDistribution::deterministic(s)),
        };
        if self.is_departure(&st) {
            return Cow::Owned(OutcomeDistribution::deterministic(self.sink));
        }
        let sc = &self.scenario;
        let t = st.t + 1;
        let countdown = |e: u8| if e == NOT_ANNOUNCED { e } else { e - 1 };
        let (l, stochastic) = match self.action(a) {
            EvAction::Idle => (st.l, false),
            EvAction::Charge(i) => (st.l + i, true),
            EvAction::Discharge(i) => (st.l - i, true),
        };
        if !stochastic {
            let next = EvState { l, t, e: countdown(st.e), ..st };
            return Cow::Owned(OutcomeDistribution::deterministic(self.encode(next)));
        }
        let departures: Vec<(u8, f64)> = if st.e == NOT_ANNOUNCED {
            let q = sc.announce_prob(st.t);
            vec![(NOT_ANNOUNCED, 1.0 - q), (1, q / 2.0), (2, q / 2.0)]
        } else {
            vec![(st.e - 1, 1.0)]
        };
        let flip = sc.price_switch[st.p];
        let mut outcomes = Vec::with_capacity(DEMAND_LEVELS * PRICE_REGIMES * 3);
        for (d, &pd) in sc.demand_transition[st.d].iter().enumerate() {
            for (p, pp) in [(st.p, 1.0 - flip), (1 - st.p, flip)] {
                for &(e, pe) in &departures {
                    let w = pd * pp * pe;
                    if w > 0.0 {
                        outcomes.push((self.encode(EvState { l, t, d, p, e }), w));
                    }
                }
            }
        }
        Cow::Owned(OutcomeDistribution::merged(outcomes).expect("EV dynamics form a distribution"))
    }

    fn cost(&self, s: StateId, a: ActionId) -> f64 {
        if self.is_goal(s) {
            return 0.0;
        }
        let st = self.decode(s).expect("sink is a goal");
        if self.is_departure(&st) {
            return self.penalty;
        }
        self.r_max - self.reward(&st, self.action(a))
    }

    fn describe_state(&self, s: StateId) -> String {
        match self.decode(s) {
            None => "sink".into(),
            Some(st) => format!("<l={},t={},d={},p={},e={}>", st.l, st.t, st.d, st.p, st.e),
        }
    }
}

pub fn build_ev(scenario: EvScenario) -> Result<(Arc<EvProblem>, RiskPredicate), DomainError> {
    let model = Arc::new(EvProblem::new(scenario)?);
    let risk = model.risk_predicate();
    Ok((model, risk))
}

pub fn ev_instance(scenario: EvScenario) -> Result<Instance, DomainError> {
    let name = scenario.name.clone();
    let (model, risk) = build_ev(scenario)?;
    Ok(Instance {
        name,
        problem: model,
        risk,
    })
}

pub const DEFAULT_HORIZON: usize = 16;
pub const DEFAULT_CHARGE_LEVELS: usize = 10;

fn demand_chain() -> [[f64; DEMAND_LEVELS]; DEMAND_LEVELS] {
    let mut m = [[0.0; DEMAND_LEVELS]; DEMAND_LEVELS];
    for (d, row) in m.iter_mut().enumerate() {
        if d > 0 {
            row[d - 1] = 0.15;
        }
        if d + 1 < DEMAND_LEVELS {
            row[d + 1] = 0.15;
        }
        row[d] = 1.0 - row.iter().sum::<f64>();
    }
    m
}

/// `n` scenarios drawn from four price-shape families (evening peak,
/// morning peak, two peaks, flat with generous resale), cycling by index.
///
/// Ranges: start charge 0..=3, goal charge 6..=L, base buy price
/// 0.10..0.16 (regime 0) and 0.18..0.26 (regime 1) per level, peak
/// multiplier 1.5..2.5 over a 4..8 step block, demand multipliers
/// 0.8/1.0/1.2/1.5, resale at 70..95% of the buy price.
pub fn generate_ev_scenarios(n: usize, seed: u64) -> Vec<EvScenario> {
    (0..n).map(|i| generate_one(i, derive_seed(seed, i as u64))).collect()
}

fn generate_one(index: usize, seed: u64) -> EvScenario {
    const DEMAND_SCALE: [f64; DEMAND_LEVELS] = [0.8, 1.0, 1.2, 1.5];
    let mut r = rng(seed);
    let h = DEFAULT_HORIZON;
    let family = index % 4;
    let mut peak_hours = vec![false; h];
    let len = r.random_range(4..=8);
    let mut mark = |start: usize, len: usize| {
        for slot in peak_hours.iter_mut().skip(start).take(len) {
            *slot = true;
        }
    };
    match family {
        0 => mark(h - len, len),
        1 => mark(0, len),
        2 => {
            mark(0, len / 2);
            mark(h - len / 2, len / 2);
        }
        _ => mark(r.random_range(0..=h - len), len),
    }
    let base = [r.random_range(0.10..0.16), r.random_range(0.18..0.26)];
    let peak = r.random_range(1.5..2.5);
    let resale = if family == 3 { r.random_range(0.85..0.95) } else { r.random_range(0.70..0.85) };
    let mut buy_prices = Vec::with_capacity(h);
    let mut sell_prices = Vec::with_capacity(h);
    for &is_peak in &peak_hours {
        let mut buy = [[0.0; PRICE_REGIMES]; DEMAND_LEVELS];
        let mut sell = [[0.0; PRICE_REGIMES]; DEMAND_LEVELS];
        for d in 0..DEMAND_LEVELS {
            for p in 0..PRICE_REGIMES {
                let price = base[p] * DEMAND_SCALE[d] * if is_peak { peak } else { 1.0 };
                buy[d][p] = price;
                sell[d][p] = price * resale;
            }
        }
        buy_prices.push(buy);
        sell_prices.push(sell);
    }
    EvScenario {
        name: format!("EV-{index:02}"),
        horizon: h,
        charge_levels: DEFAULT_CHARGE_LEVELS,
        max_rate: 3,
        start_charge: r.random_range(0..=3),
        goal_charge: r.random_range(6..=DEFAULT_CHARGE_LEVELS),
        start_demand: r.random_range(0..DEMAND_LEVELS),
        start_price: r.random_range(0..PRICE_REGIMES),
        buy_prices,
        sell_prices,
        peak_hours,
        demand_transition: demand_chain(),
        price_switch: [r.random_range(0.05..0.15), r.random_range(0.05..0.15)],
        announce_window: (8, 12),
        announce_prob_window: 0.2,
        announce_prob_outside: 0.05,
        inefficiency: 0.15,
        penalty_factor: 100.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem() -> EvProblem {
        EvProblem::new(generate_ev_scenarios(1, 3).remove(0)).unwrap()
    }

    #[test]
    fn encode_decode_round_trip() {
        let m = problem();
        for i in 0..m.num_states() - 1 {
            let s = StateId(i as u32);
            assert_eq!(m.encode(m.decode(s).unwrap()), s);
        }
        assert!(m.decode(m.sink()).is_none());
    }

    #[test]
    fn deficit_beyond_rate_is_risky() {
        let mut sc = generate_ev_scenarios(1, 3).remove(0);
        sc.goal_charge = 8;
        let m = EvProblem::new(sc).unwrap();
        let st = EvState { l: 0, t: 4, d: 0, p: 0, e: 2 };
        assert!(m.is_risky(m.encode(st)));
        assert!(!m.is_risky(m.encode(EvState { l: 2, ..st })));
        assert!(!m.is_risky(m.encode(EvState { l: 10, t: 16, e: 3, ..st })));
    }

    #[test]
    fn horizon_is_terminal() {
        let m = problem();
        let goal = m.scenario().goal_charge;
        let done = m.encode(EvState { l: goal, t: 16, d: 1, p: 0, e: 3 });
        assert!(m.is_goal(done));
        let short = m.encode(EvState { l: goal - 1, t: 16, d: 1, p: 0, e: 3 });
        assert!(!m.is_goal(short));
        assert_eq!(m.applicable_actions(short), vec![ActionId(0)]);
        assert_eq!(m.cost(short, ActionId(0)), m.penalty());
        assert!(m.transition(short, ActionId(0)).contains(m.sink()));
    }

    #[test]
    fn idle_is_deterministic_and_charge_is_not() {
        let m = problem();
        let s = m.start();
        assert!(m.transition(s, ActionId(0)).is_deterministic());
        assert!(m.transition(s, m.action_id(EvAction::Charge(2))).len() > 1);
    }

    #[test]
    fn costs_positive_off_goal() {
        let m = problem();
        for i in 0..m.num_states() {
            let s = StateId(i as u32);
            if m.is_goal(s) {
                continue;
            }
            for a in m.applicable_actions(s) {
                assert!(m.cost(s, a) > 0.0);
            }
        }
    }

    #[test]
    fn generator_is_deterministic_and_valid() {
        let a = generate_ev_scenarios(25, 11);
        assert_eq!(a, generate_ev_scenarios(25, 11));
        for (i, sc) in a.iter().enumerate() {
            sc.validate().unwrap();
            assert!(sc.goal_charge <= sc.charge_levels);
            assert!(a[..i].iter().all(|o| o != sc));
        }
    }

    #[test]
    fn json_round_trip_and_goal_check() {
        let sc = generate_ev_scenarios(1, 5).remove(0);
        assert_eq!(EvScenario::from_json(&sc.to_json()).unwrap(), sc);
        let mut bad = sc;
        bad.goal_charge = bad.charge_levels + 1;
        assert!(matches!(build_ev(bad), Err(DomainError::Config(_))));
    }
}
