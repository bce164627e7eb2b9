mod common;

use std::sync::Arc;

use common::{small_instances, small_sailing};
use prm_core::domains::sailing::{build_sailing, GoalPosition};
use prm_core::mdp::{reachable_states, SspModel};
use prm_core::reduction::{build_reduced_model, ModelSelector, OutcomeSelectionPrinciple};
use prm_core::solvers::{solve_deterministic, solve_lao_star, solve_value_iteration, Hmin, Solution, SolverConfig};

fn hmin_config(model: &Arc<dyn SspModel>) -> SolverConfig {
    let config = SolverConfig::default();
    let h = Hmin::new(Arc::clone(model), &config);
    h.warm(reachable_states(&**model, model.start()));
    config.with_heuristic(Arc::new(h.snapshot()))
}

/// Every state the policy reaches has an action, and goals are reachable.
fn assert_closed(model: &dyn SspModel, sol: &Solution) {
    let mut stack = vec![sol.start];
    let mut seen = std::collections::HashSet::new();
    while let Some(s) = stack.pop() {
        if model.is_goal(s) || !seen.insert(s) {
            continue;
        }
        let a = sol.policy.get(s).unwrap_or_else(|| panic!("no action at {s}"));
        stack.extend(model.transition(s, a).support());
    }
}

#[test]
fn lao_matches_value_iteration_on_small_instances() {
    for (name, model, _) in small_instances() {
        let vi = solve_value_iteration(&*model, &SolverConfig::default().with_epsilon(1e-9)).unwrap();
        for config in [SolverConfig::default(), hmin_config(&model)] {
            let lao = solve_lao_star(&*model, model.start(), &config).unwrap();
            assert!(
                (lao.start_value() - vi.start_value()).abs() <= 2e-3,
                "{name}: lao {} vi {}",
                lao.start_value(),
                vi.start_value()
            );
            assert_closed(&*model, &lao);
        }
    }
}

#[test]
fn hmin_is_below_optimal_on_small_instances() {
    for (name, model, _) in small_instances() {
        let vi = solve_value_iteration(&*model, &SolverConfig::default().with_epsilon(1e-9)).unwrap();
        let h = Hmin::new(&*model, &SolverConfig::default());
        for s in reachable_states(&*model, model.start()) {
            let v = vi.values.get(s).unwrap_or(0.0);
            assert!(h.value(s) <= v + 1e-3, "{name}: h({s}) = {} > {v}", h.value(s));
        }
    }
}

#[test]
fn astar_and_lao_agree_on_determinized_sailing() {
    let (sail, _) = build_sailing(10, GoalPosition::Middle).unwrap();
    let base: Arc<dyn SspModel> = sail;
    let mlod = build_reduced_model(Arc::clone(&base), ModelSelector::Uniform(OutcomeSelectionPrinciple::MLOD)).unwrap();
    let config = SolverConfig::default();
    let h = Hmin::new(&mlod, &config);
    let states = reachable_states(&*base, base.start());
    for &s in states.iter().step_by(7) {
        let astar = solve_deterministic(&mlod, s, &h).unwrap();
        let lao = solve_lao_star(&mlod, s, &config).unwrap();
        assert!(
            (astar.start_value() - lao.start_value()).abs() <= 2e-3,
            "state {s}: A* {} LAO* {}",
            astar.start_value(),
            lao.start_value()
        );
    }
}

#[test]
fn astar_rejects_stochastic_models() {
    let (sail, _) = small_sailing();
    assert!(solve_deterministic(&*sail, sail.start(), &prm_core::mdp::ZeroHeuristic).is_err());
}
