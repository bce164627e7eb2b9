mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use approx::assert_relative_eq;
use num_rational::Ratio;

use common::{small_ev, small_instances, small_racetrack, small_sailing};
use prm_core::domains::ev::{build_ev, generate_ev_scenarios, EvState, NOT_ANNOUNCED};
use prm_core::domains::racetrack::{build_racetrack, Racetrack, RacetrackConfig, RacetrackState};
use prm_core::domains::sailing::{angle_steps, build_sailing, GoalPosition, SailingState, DIRECTIONS};
use prm_core::domains::{builtin_track, BUILTIN_TRACKS};
use prm_core::mdp::{reachable_states, validate_problem, ActionId, SspModel, ZeroHeuristic};
use prm_core::solvers::{solve_deterministic, solve_value_iteration, SolverConfig};

type Q = Ratio<i64>;

/// Slip, perturbation and intended mass as exact fractions, keyed by the
/// realized acceleration.
fn exact_acceleration_mass(intended: (i32, i32)) -> BTreeMap<(i32, i32), Q> {
    let (ax, ay) = intended;
    let mut out = BTreeMap::new();
    *out.entry(intended).or_insert(Q::from_integer(0)) += Q::new(7, 10);
    *out.entry((0, 0)).or_insert(Q::from_integer(0)) += Q::new(1, 10);
    let variants: Vec<(i32, i32)> = [(ax - 1, ay), (ax + 1, ay), (ax, ay - 1), (ax, ay + 1)]
        .into_iter()
        .filter(|&(x, y)| x.abs() <= 1 && y.abs() <= 1)
        .collect();
    let share = Q::new(2, 10) / Q::from_integer(variants.len() as i64);
    for v in variants {
        *out.entry(v).or_insert(Q::from_integer(0)) += share;
    }
    out
}

#[test]
fn racetrack_composition_matches_exact_fractions() {
    let (track, _) = small_racetrack();
    for a in 0..9 {
        let intended = Racetrack::acceleration(ActionId(a));
        let exact = exact_acceleration_mass(intended);
        assert_eq!(exact.values().sum::<Q>(), Q::from_integer(1));

        let mut got: BTreeMap<(i32, i32), f64> = BTreeMap::new();
        for (acc, p) in track.acceleration_outcomes(intended) {
            *got.entry(acc).or_default() += p;
        }
        assert_eq!(got.keys().collect::<Vec<_>>(), exact.keys().collect::<Vec<_>>());
        for (acc, q) in &exact {
            assert_relative_eq!(got[acc], *q.numer() as f64 / *q.denom() as f64, epsilon = 1e-12);
        }
    }
}

#[test]
fn racetrack_transitions_sum_to_one() {
    let (track, _) = small_racetrack();
    for s in reachable_states(&*track, track.start()) {
        for a in track.applicable_actions(s) {
            assert_relative_eq!(track.transition(s, a).total_mass(), 1.0, epsilon = 1e-12);
        }
    }
}

#[test]
fn racetrack_move_from_rest_in_open_field() {
    let text = "XXXXXXX\nX.....X\nX.S...X\nX.....X\nX....GX\nXXXXXXX\n";
    let (track, _) = build_racetrack(text, RacetrackConfig::default()).unwrap();
    let at = |x, y, vx, vy| track.encode(RacetrackState { x, y, vx, vy });
    let s = at(2, 2, 0, 0);
    let dist = track.transition(s, Racetrack::action_id(1, 0));
    let third = 0.2 / 3.0;
    assert_relative_eq!(dist.probability(at(3, 2, 1, 0)), 0.7, epsilon = 1e-12);
    assert_relative_eq!(dist.probability(s), 0.1 + third, epsilon = 1e-12);
    assert_relative_eq!(dist.probability(at(3, 1, 1, -1)), third, epsilon = 1e-12);
    assert_relative_eq!(dist.probability(at(3, 3, 1, 1)), third, epsilon = 1e-12);
    assert_eq!(dist.len(), 4);
}

fn corridor(len: usize) -> String {
    let wall = "X".repeat(len + 4);
    format!("{wall}\nXS{}GX\n{wall}\n", ".".repeat(len))
}

#[test]
fn deterministic_corridor_astar_matches_value_iteration() {
    let config = RacetrackConfig { slip_prob: 0.0, perturb_prob: 0.0, max_speed: 5 };
    let mut previous = 0.0;
    for len in [1, 2, 4, 7, 12, 20] {
        let (track, _) = build_racetrack(&corridor(len), config).unwrap();
        let astar = solve_deterministic(&*track, track.start(), &ZeroHeuristic).unwrap();
        let vi = solve_value_iteration(&*track, &SolverConfig::default().with_epsilon(1e-9)).unwrap();
        assert_relative_eq!(astar.start_value(), vi.start_value(), epsilon = 1e-9);
        assert!(astar.start_value() >= previous, "corridor {len}");
        previous = astar.start_value();
    }
    assert!(previous > 1.0);
}

#[test]
fn pothole_states_are_risky() {
    let (track, d) = small_racetrack();
    let pothole = track.encode(RacetrackState { x: 4, y: 1, vx: 0, vy: 0 });
    assert!(d.evaluate(pothole));
    assert!(!d.evaluate(track.start()));
}

#[test]
fn sailing_never_offers_into_wind_moves() {
    let (sail, _) = small_sailing();
    for s in 0..sail.num_states() as u32 {
        let s = prm_core::mdp::StateId(s);
        if sail.is_goal(s) {
            continue;
        }
        let wind = sail.decode(s).wind;
        let actions = sail.applicable_actions(s);
        assert!(!actions.is_empty());
        assert!(actions.iter().all(|a| angle_steps(a.0 as u8, wind) < 4), "state {s}");
    }
}

#[test]
fn sailing_costs_and_wind_shift() {
    let (sail, _) = build_sailing(8, GoalPosition::Corner).unwrap();
    let s = sail.encode(SailingState { x: 3, y: 3, wind: 0 });
    assert_eq!(sail.cost(s, ActionId(0)), 1.0);
    assert_eq!(sail.cost(s, ActionId(1)), 2.0);
    assert_eq!(sail.cost(s, ActionId(2)), 3.0);
    assert_eq!(sail.cost(s, ActionId(3)), 4.0);
    assert!(!sail.applicable_actions(s).contains(&ActionId(4)));

    let dist = sail.transition(s, ActionId(0));
    let (dx, dy) = DIRECTIONS[0];
    let at = |wind| sail.encode(SailingState { x: 3 + dx, y: 3 + dy, wind });
    assert_relative_eq!(dist.probability(at(7)), 0.3);
    assert_relative_eq!(dist.probability(at(0)), 0.4);
    assert_relative_eq!(dist.probability(at(1)), 0.3);
}

#[test]
fn ev_costs_are_positive_off_goal() {
    for sc in generate_ev_scenarios(3, 5) {
        let (ev, _) = build_ev(sc).unwrap();
        for s in reachable_states(&*ev, ev.start()) {
            if ev.is_goal(s) {
                continue;
            }
            for a in ev.applicable_actions(s) {
                assert!(ev.cost(s, a) > 0.0, "{}", ev.describe_state(s));
            }
        }
    }
}

#[test]
fn ev_risk_follows_the_deficit_inequality() {
    let mut sc = generate_ev_scenarios(1, 3).remove(0);
    sc.goal_charge = 8;
    sc.max_rate = 3;
    let (ev, d) = build_ev(sc.clone()).unwrap();
    let st = |l, t| EvState { l, t, d: 0, p: 0, e: NOT_ANNOUNCED };
    assert!(d.evaluate(ev.encode(st(0, sc.horizon - 2))));
    assert!(!d.evaluate(ev.encode(st(2, sc.horizon - 2))));
    assert!(!d.evaluate(ev.encode(st(sc.charge_levels, 0))));
    assert!(!d.evaluate(ev.encode(st(sc.charge_levels, sc.horizon - 1))));
    // Announced departure in two steps counts as two steps remaining.
    assert!(d.evaluate(ev.encode(EvState { e: 2, ..st(1, 3) })));
    assert!(ev.is_goal(ev.encode(st(sc.charge_levels, sc.horizon))));
}

#[test]
fn every_small_instance_validates_and_goals_are_safe() {
    for (name, model, d) in small_instances() {
        let violations = validate_problem(&*model);
        assert!(violations.is_empty(), "{name}: {}", violations[0]);
        for s in reachable_states(&*model, model.start()) {
            if model.is_goal(s) {
                assert!(!d.evaluate(s), "{name}: risky goal {s}");
            }
        }
    }
}

#[test]
fn shipped_instances_validate() {
    let mut models: Vec<(String, Arc<dyn SspModel>)> = Vec::new();
    for name in ["Square-3", "Ring-3"] {
        let (track, _) = build_racetrack(&builtin_track(name).unwrap(), RacetrackConfig::default()).unwrap();
        models.push((name.into(), track));
    }
    for goal in [GoalPosition::Corner, GoalPosition::Middle] {
        let (sail, _) = build_sailing(20, goal).unwrap();
        models.push((format!("sailing {goal:?}"), sail));
    }
    for sc in generate_ev_scenarios(4, 0) {
        let name = sc.name.clone();
        let (ev, _) = build_ev(sc).unwrap();
        models.push((name, ev));
    }
    for (name, model) in models {
        let violations = validate_problem(&*model);
        assert!(violations.is_empty(), "{name}: {}", violations[0]);
    }
    assert_eq!(BUILTIN_TRACKS.len(), 7);
}

#[test]
fn small_ev_is_small() {
    let (ev, _) = small_ev();
    let n = reachable_states(&*ev, ev.start()).len();
    assert!((50..=1000).contains(&n), "{n}");
}
