//! Sailing: a boat on an `n x n` grid moves to one of its eight neighbours
//! while the wind turns stochastically. Moving into the wind is not allowed.

use std::borrow::Cow;
use std::sync::Arc;

use crate::mdp::{ActionId, Heuristic, OutcomeDistribution, SspModel, StateId};
use crate::risk::RiskPredicate;

use super::{DomainError, Instance};

/// Unit vectors for directions `0..8`, clockwise from north in 45° steps.
pub const DIRECTIONS: [(i32, i32); 8] = [(0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1)];

pub const FEATURE_NAMES: [&str; 2] = ["wind-vs-direction", "successor-moves-away-from-goal"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoalPosition {
    Corner,
    Middle,
}

impl std::str::FromStr for GoalPosition {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "c" | "corner" => Ok(GoalPosition::Corner),
            "m" | "middle" => Ok(GoalPosition::Middle),
            _ => Err(DomainError::Config(format!("goal position `{s}` is not corner or middle"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SailingConfig {
    pub size: usize,
    pub goal: GoalPosition,
    pub wind_stay: f64,
    pub wind_turn: f64,
    /// Cost by angular difference 0°, 45°, 90°, 135°.
    pub tack_costs: [f64; 4],
}

impl SailingConfig {
    pub fn new(size: usize, goal: GoalPosition) -> Self {
        Self {
            size,
            goal,
            wind_stay: 0.4,
            wind_turn: 0.3,
            tack_costs: [1.0, 2.0, 3.0, 4.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SailingState {
    pub x: i32,
    pub y: i32,
    pub wind: u8,
}

#[derive(Debug, Clone)]
pub struct Sailing {
    config: SailingConfig,
    goal: (i32, i32),
}

/// Steps between two directions, 0..=4.
pub fn angle_steps(a: u8, b: u8) -> u8 {
    let d = (a as i32 - b as i32).rem_euclid(8) as u8;
    d.min(8 - d)
}

impl Sailing {
    pub fn new(config: SailingConfig) -> Result<Self, DomainError> {
        if config.size < 4 {
            return Err(DomainError::Config(format!("sailing grid size {} is below 4", config.size)));
        }
        let mass = config.wind_stay + 2.0 * config.wind_turn;
        if config.wind_stay < 0.0 || config.wind_turn < 0.0 || (mass - 1.0).abs() > 1e-9 {
            return Err(DomainError::Config("wind probabilities must be non-negative and sum to 1".into()));
        }
        if config.tack_costs.iter().any(|&c| c <= 0.0 || !c.is_finite()) {
            return Err(DomainError::Config("tack costs must be positive".into()));
        }
        let n = config.size as i32;
        let goal = match config.goal {
            GoalPosition::Corner => (n - 1, n - 1),
            GoalPosition::Middle => (n / 2, n / 2),
        };
        Ok(Self { config, goal })
    }

    pub fn config(&self) -> &SailingConfig {
        &self.config
    }

    pub fn goal_cell(&self) -> (i32, i32) {
        self.goal
    }

    pub fn encode(&self, st: SailingState) -> StateId {
        let n = self.config.size as u32;
        StateId((st.y as u32 * n + st.x as u32) * 8 + st.wind as u32)
    }

    pub fn decode(&self, s: StateId) -> SailingState {
        let n = self.config.size as u32;
        let cell = s.0 / 8;
        SailingState {
            x: (cell % n) as i32,
            y: (cell / n) as i32,
            wind: (s.0 % 8) as u8,
        }
    }

    fn on_grid(&self, x: i32, y: i32) -> bool {
        let n = self.config.size as i32;
        (0..n).contains(&x) && (0..n).contains(&y)
    }

    /// `D(s)`: on the boundary with the wind pushing off the grid.
    pub fn is_risky(&self, s: StateId) -> bool {
        if self.is_goal(s) {
            return false;
        }
        let st = self.decode(s);
        let (dx, dy) = DIRECTIONS[st.wind as usize];
        !self.on_grid(st.x + dx, st.y + dy)
    }

    /// Per outcome: angular steps between the action and the wind, and
    /// whether the successor moves away from the goal under `heuristic`.
    pub fn transition_features(&self, s: StateId, a: ActionId, heuristic: &dyn Heuristic) -> Vec<(StateId, u8, bool)> {
        let here = heuristic.estimate(s);
        let wind = self.decode(s).wind;
        self.transition(s, a)
            .support()
            .map(|t| {
                let h = if self.is_goal(t) { 0.0 } else { heuristic.estimate(t) };
                (t, angle_steps(a.0 as u8, wind), h > here)
            })
            .collect()
    }

    pub fn risk_predicate(self: &Arc<Self>) -> RiskPredicate {
        let model = Arc::clone(self);
        RiskPredicate::new(&FEATURE_NAMES, move |s| model.is_risky(s))
    }
}

impl SspModel for Sailing {
    fn num_states(&self) -> usize {
        self.config.size * self.config.size * 8
    }

    fn num_actions(&self) -> usize {
        8
    }

    fn start(&self) -> StateId {
        self.encode(SailingState { x: 0, y: 0, wind: 0 })
    }

    fn is_goal(&self, s: StateId) -> bool {
        let st = self.decode(s);
        (st.x, st.y) == self.goal
    }

    fn applicable_actions(&self, s: StateId) -> Vec<ActionId> {
        if self.is_goal(s) {
            return vec![ActionId(0)];
        }
        let st = self.decode(s);
        (0..8u8)
            .filter(|&d| {
                let (dx, dy) = DIRECTIONS[d as usize];
                angle_steps(d, st.wind) < 4 && self.on_grid(st.x + dx, st.y + dy)
            })
            .map(|d| ActionId(d as u32))
            .collect()
    }

    fn transition(&self, s: StateId, a: ActionId) -> Cow<'_, OutcomeDistribution> {
        if self.is_goal(s) {
            return Cow::Owned(OutcomeDistribution::deterministic(s));
        }
        let st = self.decode(s);
        let (dx, dy) = DIRECTIONS[a.index()];
        let (x, y) = (st.x + dx, st.y + dy);
        let at = |wind: u8| self.encode(SailingState { x, y, wind });
        let c = &self.config;
        let outcomes = [
            (at((st.wind + 7) % 8), c.wind_turn),
            (at(st.wind), c.wind_stay),
            (at((st.wind + 1) % 8), c.wind_turn),
        ];
        Cow::Owned(OutcomeDistribution::merged(outcomes).expect("wind model is a distribution"))
    }

    fn cost(&self, s: StateId, a: ActionId) -> f64 {
        if self.is_goal(s) {
            return 0.0;
        }
        let wind = self.decode(s).wind;
        self.config.tack_costs[angle_steps(a.0 as u8, wind) as usize]
    }

    fn describe_state(&self, s: StateId) -> String {
        let st = self.decode(s);
        format!("({},{} wind={})", st.x, st.y, st.wind)
    }
}

pub fn build_sailing(size: usize, goal: GoalPosition) -> Result<(Arc<Sailing>, RiskPredicate), DomainError> {
    build_sailing_with(SailingConfig::new(size, goal))
}

pub fn build_sailing_with(config: SailingConfig) -> Result<(Arc<Sailing>, RiskPredicate), DomainError> {
    let model = Arc::new(Sailing::new(config)?);
    let risk = model.risk_predicate();
    Ok((model, risk))
}

pub fn sailing_instance(config: SailingConfig) -> Result<Instance, DomainError> {
    let (model, risk) = build_sailing_with(config)?;
    let tag = match config.goal {
        GoalPosition::Corner => "C",
        GoalPosition::Middle => "M",
    };
    Ok(Instance {
        name: format!("Sailing-{}({tag})", config.size),
        problem: model,
        risk,
    })
}
