//! Racetrack: a car on an ASCII grid picks accelerations in `{-1,0,1}²`.
//!
//! Each action slips (no acceleration) with `slip_prob`, has one component of
//! its acceleration changed by one unit with `perturb_prob` (uniform over the
//! variants that stay within `{-1,0,1}`), and applies as intended otherwise.
//! Velocity updates first, then position; a move that crosses a wall stops at
//! the last free cell with zero velocity. Landing on a pothole is risky.

use std::borrow::Cow;
use std::str::FromStr;
use std::sync::Arc;

use crate::mdp::{ActionId, Heuristic, OutcomeDistribution, SspModel, StateId};
use crate::risk::RiskPredicate;

use super::{DomainError, Instance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Wall,
    Free,
    Start,
    Goal,
    Pothole,
}

impl Cell {
    fn from_char(c: char) -> Option<Self> {
        Some(match c {
            'X' => Cell::Wall,
            '.' => Cell::Free,
            'S' => Cell::Start,
            'G' => Cell::Goal,
            'P' => Cell::Pothole,
            _ => return None,
        })
    }

    fn to_char(self) -> char {
        match self {
            Cell::Wall => 'X',
            Cell::Free => '.',
            Cell::Start => 'S',
            Cell::Goal => 'G',
            Cell::Pothole => 'P',
        }
    }
}

/// Rectangular track. Row 0 is the first line of the map text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrackMap {
    width: usize,
    height: usize,
    cells: Vec<Cell>,
}

impl TrackMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell(&self, x: i32, y: i32) -> Cell {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            Cell::Wall
        } else {
            self.cells[y as usize * self.width + x as usize]
        }
    }

    fn cells_of(&self, kind: Cell) -> impl Iterator<Item = (i32, i32)> + '_ {
        (0..self.height).flat_map(move |y| {
            (0..self.width)
                .filter(move |&x| self.cells[y * self.width + x] == kind)
                .map(move |x| (x as i32, y as i32))
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for row in self.cells.chunks(self.width) {
            out.extend(row.iter().map(|c| c.to_char()));
            out.push('\n');
        }
        out
    }
}

impl FromStr for TrackMap {
    type Err = DomainError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let err = |line: usize, column: usize, message: &str| DomainError::Parse {
            line,
            column,
            message: message.to_string(),
        };
        let rows: Vec<&str> = text.lines().map(|l| l.trim_end_matches('\r')).collect();
        let rows: Vec<&str> = {
            let end = rows.iter().rposition(|r| !r.is_empty()).map_or(0, |i| i + 1);
            rows[..end].to_vec()
        };
        if rows.is_empty() {
            return Err(err(1, 1, "empty map"));
        }
        let width = rows[0].chars().count();
        let mut cells = Vec::with_capacity(width * rows.len());
        for (y, row) in rows.iter().enumerate() {
            let n = row.chars().count();
            if n != width {
                return Err(err(y + 1, n.min(width) + 1, &format!("row has {n} cells, expected {width}")));
            }
            for (x, c) in row.chars().enumerate() {
                cells.push(Cell::from_char(c).ok_or_else(|| err(y + 1, x + 1, &format!("unknown cell `{c}`")))?);
            }
        }
        let map = TrackMap {
            width,
            height: rows.len(),
            cells,
        };
        let starts: Vec<(i32, i32)> = map.cells_of(Cell::Start).collect();
        if starts.is_empty() {
            return Err(err(1, 1, "no start cell `S`"));
        }
        if !start_cells_connected(&map, &starts) {
            let (x, y) = starts[starts.len() - 1];
            return Err(err(y as usize + 1, x as usize + 1, "start cells must form one connected region"));
        }
        if map.cells_of(Cell::Goal).next().is_none() {
            return Err(err(1, 1, "no goal cell `G`"));
        }
        Ok(map)
    }
}

fn start_cells_connected(map: &TrackMap, starts: &[(i32, i32)]) -> bool {
    let mut seen = vec![starts[0]];
    let mut stack = vec![starts[0]];
    while let Some((x, y)) = stack.pop() {
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let n = (x + dx, y + dy);
            if map.cell(n.0, n.1) == Cell::Start && !seen.contains(&n) {
                seen.push(n);
                stack.push(n);
            }
        }
    }
    seen.len() == starts.len()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RacetrackConfig {
    pub slip_prob: f64,
    pub perturb_prob: f64,
    pub max_speed: i32,
}

impl Default for RacetrackConfig {
    fn default() -> Self {
        Self {
            slip_prob: 0.10,
            perturb_prob: 0.20,
            max_speed: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RacetrackState {
    pub x: i32,
    pub y: i32,
    pub vx: i32,
    pub vy: i32,
}

/// What happened on the way to a successor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Landing {
    pub state: StateId,
    pub hit_wall: bool,
}

/// One-step lookahead features of an outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RacetrackFeatures {
    pub successor_is_wall: bool,
    pub successor_is_pothole: bool,
    pub successor_is_goal: bool,
    pub moves_away_from_goal: bool,
}

pub const FEATURE_NAMES: [&str; 4] = [
    "successor-is-wall",
    "successor-is-pothole",
    "successor-is-goal",
    "successor-moves-away-from-goal",
];

#[derive(Debug, Clone)]
pub struct Racetrack {
    map: TrackMap,
    config: RacetrackConfig,
    free_index: Vec<Option<u32>>,
    free_cells: Vec<(i32, i32)>,
    speeds: i32,
    start: StateId,
}

impl Racetrack {
    pub fn new(map: TrackMap, config: RacetrackConfig) -> Result<Self, DomainError> {
        let probs_ok = |p: f64| (0.0..=1.0).contains(&p);
        if !probs_ok(config.slip_prob)
            || !probs_ok(config.perturb_prob)
            || config.slip_prob + config.perturb_prob > 1.0
        {
            return Err(DomainError::Config(format!(
                "slip {} and perturbation {} probabilities must be in [0,1] and sum to at most 1",
                config.slip_prob, config.perturb_prob
            )));
        }
        if config.max_speed < 1 {
            return Err(DomainError::Config("max speed must be at least 1".into()));
        }
        let mut free_index = vec![None; map.width * map.height];
        let mut free_cells = Vec::new();
        for y in 0..map.height as i32 {
            for x in 0..map.width as i32 {
                if map.cell(x, y) != Cell::Wall {
                    free_index[y as usize * map.width + x as usize] = Some(free_cells.len() as u32);
                    free_cells.push((x, y));
                }
            }
        }
        let (sx, sy) = map.cells_of(Cell::Start).next().expect("parsed map has a start");
        let speeds = 2 * config.max_speed + 1;
        let mut track = Self {
            map,
            config,
            free_index,
            free_cells,
            speeds,
            start: StateId(0),
        };
        track.start = track.encode(RacetrackState { x: sx, y: sy, vx: 0, vy: 0 });
        Ok(track)
    }

    pub fn map(&self) -> &TrackMap {
        &self.map
    }

    pub fn config(&self) -> &RacetrackConfig {
        &self.config
    }

    pub fn encode(&self, st: RacetrackState) -> StateId {
        let cell = self.free_index[st.y as usize * self.map.width + st.x as usize].expect("state on a free cell");
        let m = self.config.max_speed;
        let v = (st.vx + m) * self.speeds + (st.vy + m);
        StateId(cell * (self.speeds * self.speeds) as u32 + v as u32)
    }

    pub fn decode(&self, s: StateId) -> RacetrackState {
        let per_cell = (self.speeds * self.speeds) as u32;
        let (x, y) = self.free_cells[(s.0 / per_cell) as usize];
        let v = (s.0 % per_cell) as i32;
        let m = self.config.max_speed;
        RacetrackState {
            x,
            y,
            vx: v / self.speeds - m,
            vy: v % self.speeds - m,
        }
    }

    pub fn cell_of(&self, s: StateId) -> Cell {
        let st = self.decode(s);
        self.map.cell(st.x, st.y)
    }

    pub fn action_id(ax: i32, ay: i32) -> ActionId {
        ActionId(((ax + 1) * 3 + (ay + 1)) as u32)
    }

    pub fn acceleration(a: ActionId) -> (i32, i32) {
        (a.0 as i32 / 3 - 1, a.0 as i32 % 3 - 1)
    }

    /// Realized accelerations for an intended one, with probabilities.
    /// Entries may repeat an acceleration; callers merge by successor.
    pub fn acceleration_outcomes(&self, intended: (i32, i32)) -> Vec<((i32, i32), f64)> {
        let (ax, ay) = intended;
        let variants: Vec<(i32, i32)> = [(ax - 1, ay), (ax + 1, ay), (ax, ay - 1), (ax, ay + 1)]
            .into_iter()
            .filter(|&(x, y)| (-1..=1).contains(&x) && (-1..=1).contains(&y))
            .collect();
        let c = &self.config;
        let mut out = vec![
            (intended, 1.0 - c.slip_prob - c.perturb_prob),
            ((0, 0), c.slip_prob),
        ];
        let share = c.perturb_prob / variants.len() as f64;
        out.extend(variants.into_iter().map(|v| (v, share)));
        out
    }

    /// Applies a realized acceleration from `from`.
    pub fn apply(&self, from: RacetrackState, acc: (i32, i32)) -> Landing {
        let m = self.config.max_speed;
        let vx = (from.vx + acc.0).clamp(-m, m);
        let vy = (from.vy + acc.1).clamp(-m, m);
        let steps = vx.abs().max(vy.abs());
        let (mut x, mut y) = (from.x, from.y);
        for i in 1..=steps {
            let px = from.x + (vx as f64 * i as f64 / steps as f64).round() as i32;
            let py = from.y + (vy as f64 * i as f64 / steps as f64).round() as i32;
            match self.map.cell(px, py) {
                Cell::Wall => {
                    return Landing {
                        state: self.encode(RacetrackState { x, y, vx: 0, vy: 0 }),
                        hit_wall: true,
                    };
                }
                Cell::Goal => {
                    return Landing {
                        state: self.encode(RacetrackState { x: px, y: py, vx: 0, vy: 0 }),
                        hit_wall: false,
                    };
                }
                _ => {
                    x = px;
                    y = py;
                }
            }
        }
        Landing {
            state: self.encode(RacetrackState { x, y, vx, vy }),
            hit_wall: false,
        }
    }

    /// `D(s)`: the car sits on a pothole.
    pub fn is_risky(&self, s: StateId) -> bool {
        self.cell_of(s) == Cell::Pothole
    }

    /// One-step lookahead features of every outcome of `(s,a)`.
    pub fn transition_features(
        &self,
        s: StateId,
        a: ActionId,
        heuristic: &dyn Heuristic,
    ) -> Vec<(StateId, RacetrackFeatures)> {
        let from = self.decode(s);
        let here = heuristic.estimate(s);
        let mut out: Vec<(StateId, RacetrackFeatures)> = Vec::new();
        for (acc, _) in self.acceleration_outcomes(Self::acceleration(a)) {
            let landing = self.apply(from, acc);
            if out.iter().any(|(t, _)| *t == landing.state) {
                continue;
            }
            let cell = self.cell_of(landing.state);
            let next_h = if cell == Cell::Goal { 0.0 } else { heuristic.estimate(landing.state) };
            out.push((
                landing.state,
                RacetrackFeatures {
                    successor_is_wall: landing.hit_wall,
                    successor_is_pothole: cell == Cell::Pothole,
                    successor_is_goal: cell == Cell::Goal,
                    moves_away_from_goal: next_h > here,
                },
            ));
        }
        out
    }

    pub fn risk_predicate(self: &Arc<Self>) -> RiskPredicate {
        let track = Arc::clone(self);
        RiskPredicate::new(&FEATURE_NAMES, move |s| track.is_risky(s))
    }
}

impl SspModel for Racetrack {
    fn num_states(&self) -> usize {
        self.free_cells.len() * (self.speeds * self.speeds) as usize
    }

    fn num_actions(&self) -> usize {
        9
    }

    fn start(&self) -> StateId {
        self.start
    }

    fn is_goal(&self, s: StateId) -> bool {
        self.cell_of(s) == Cell::Goal
    }

    fn applicable_actions(&self, s: StateId) -> Vec<ActionId> {
        if self.is_goal(s) {
            vec![ActionId(0)]
        } else {
            (0..9).map(ActionId).collect()
        }
    }

    fn transition(&self, s: StateId, a: ActionId) -> Cow<'_, OutcomeDistribution> {
        if self.is_goal(s) {
            return Cow::Owned(OutcomeDistribution::deterministic(s));
        }
        let from = self.decode(s);
        let outcomes = self
            .acceleration_outcomes(Self::acceleration(a))
            .into_iter()
            .map(|(acc, p)| (self.apply(from, acc).state, p));
        Cow::Owned(OutcomeDistribution::merged(outcomes).expect("racetrack outcomes form a distribution"))
    }

    fn cost(&self, s: StateId, _a: ActionId) -> f64 {
        if self.is_goal(s) {
            0.0
        } else {
            1.0
        }
    }

    fn describe_state(&self, s: StateId) -> String {
        let st = self.decode(s);
        format!("({},{} v={},{})", st.x, st.y, st.vx, st.vy)
    }
}

/// Parses `map_text` and builds the racetrack with its pothole predicate.
pub fn build_racetrack(map_text: &str, config: RacetrackConfig) -> Result<(Arc<Racetrack>, RiskPredicate), DomainError> {
    let map: TrackMap = map_text.parse()?;
    let track = Arc::new(Racetrack::new(map, config)?);
    let risk = track.risk_predicate();
    Ok((track, risk))
}

pub fn racetrack_instance(name: &str, map_text: &str, config: RacetrackConfig) -> Result<Instance, DomainError> {
    let (track, risk) = build_racetrack(map_text, config)?;
    Ok(Instance {
        name: name.to_string(),
        problem: track,
        risk,
    })
}
