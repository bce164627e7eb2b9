//! Property tests over randomly generated SSPs and outcome distributions.

mod common;

use std::sync::Arc;

use proptest::prelude::*;

use common::random_ssp;
use prm_core::mdp::{bellman_backup, reachable_states, OutcomeDistribution, SspModel, StateId};
use prm_core::reduction::{
    build_reduced_model, make_01rm_selector, select_outcomes, ModelSelector, OutcomeSelectionPrinciple,
};
use prm_core::risk::{estimate_risk_profile, nse_set};
use prm_core::solvers::{compute_hmin, Hmin, solve_lao_star, solve_value_iteration, SolverConfig};

fn distribution() -> impl Strategy<Value = OutcomeDistribution> {
    prop::collection::btree_map(0u32..40, 1u32..20, 1..8).prop_map(|w| {
        let total: u32 = w.values().sum();
        OutcomeDistribution::new(w.into_iter().map(|(s, x)| (StateId(s), x as f64 / total as f64)).collect()).unwrap()
    })
}

fn principle() -> impl Strategy<Value = OutcomeSelectionPrinciple> {
    prop_oneof![
        Just(OutcomeSelectionPrinciple::MLOD),
        Just(OutcomeSelectionPrinciple::M02),
        Just(OutcomeSelectionPrinciple::FULL),
        (1usize..6).prop_map(OutcomeSelectionPrinciple::greedy),
    ]
}

proptest! {
    #[test]
    fn backup_is_monotone(spec in random_ssp(7), low in prop::collection::vec(0.0f64..20.0, 7), bump in prop::collection::vec(0.0f64..5.0, 7)) {
        let m = spec.build();
        for i in 0..spec.n - 1 {
            let s = StateId(i as u32);
            let lo = bellman_backup(&m, s, |t| low[t.index()]).unwrap().value;
            let hi = bellman_backup(&m, s, |t| low[t.index()] + bump[t.index()]).unwrap().value;
            prop_assert!(hi >= lo - 1e-12);
        }
    }

    #[test]
    fn selection_keeps_a_proportional_subset(d in distribution(), p in principle()) {
        let kept = select_outcomes(p, &d);
        prop_assert!((kept.total_mass() - 1.0).abs() < 1e-9);
        if let Some(k) = p.max_outcomes() {
            prop_assert_eq!(kept.len(), k.min(d.len()));
        } else {
            prop_assert_eq!(&kept, &d);
        }
        let (a, pa) = kept.entries()[0];
        for &(t, pt) in kept.entries() {
            prop_assert!(d.contains(t));
            let ratio = (pt / pa) / (d.probability(t) / d.probability(a));
            prop_assert!((ratio - 1.0).abs() < 1e-9);
        }
        // Nothing dropped is more likely than anything kept.
        let least_kept = kept.support().map(|t| d.probability(t)).fold(f64::INFINITY, f64::min);
        for &(t, pt) in d.entries() {
            if !kept.contains(t) {
                prop_assert!(pt <= least_kept);
            }
        }
    }

    #[test]
    fn mlod_and_full_are_idempotent(d in distribution()) {
        for p in [OutcomeSelectionPrinciple::MLOD, OutcomeSelectionPrinciple::FULL] {
            let once = select_outcomes(p, &d);
            prop_assert_eq!(select_outcomes(p, &once), once);
        }
    }

    #[test]
    fn zero_one_model_keeps_one_or_all(spec in random_ssp(7), mask in 0u32..128, threshold in 0.0f64..1.0, seed in any::<u64>()) {
        let base: Arc<dyn SspModel> = Arc::new(spec.build());
        let d = spec.risky(mask);
        let profile = Arc::new(estimate_risk_profile(Arc::clone(&base), d.clone(), 20, 3, seed));
        let reduced = build_reduced_model(Arc::clone(&base), make_01rm_selector(profile, threshold)).unwrap();
        for s in reachable_states(&*base, base.start()) {
            if base.is_goal(s) {
                continue;
            }
            for a in base.applicable_actions(s) {
                let full = base.transition(s, a);
                let kept = reduced.transition(s, a);
                prop_assert!(kept.len() == 1 || kept.len() == full.len());
                prop_assert!(kept.support().all(|t| full.contains(t)));
                // One-step guard: a risky outcome is never dropped.
                prop_assert!(full.support().filter(|&t| d.evaluate(t)).all(|t| kept.contains(t)));
            }
        }
        prop_assert!(nse_set(&*base, &reduced, &d).is_empty());
    }

    #[test]
    fn full_model_reduction_has_no_nse(spec in random_ssp(7), mask in 0u32..128) {
        let base: Arc<dyn SspModel> = Arc::new(spec.build());
        let reduced = build_reduced_model(Arc::clone(&base), ModelSelector::Uniform(OutcomeSelectionPrinciple::FULL)).unwrap();
        prop_assert!(nse_set(&*base, &reduced, &spec.risky(mask)).is_empty());
    }

    /// A residual below epsilon bounds the value error by epsilon times the
    /// expected number of steps, at most `V* / c_min` with `c_min = 0.5`.
    #[test]
    fn lao_agrees_with_value_iteration(spec in random_ssp(8)) {
        let m = spec.build();
        let config = SolverConfig::default();
        let vi = solve_value_iteration(&m, &config.clone().with_epsilon(1e-9)).unwrap();
        let lao = solve_lao_star(&m, m.start(), &config).unwrap();
        let bound = 2.0 * config.epsilon * (1.0 + vi.start_value() / 0.5);
        prop_assert!((lao.start_value() - vi.start_value()).abs() <= bound,
            "lao {} vi {}", lao.start_value(), vi.start_value());
    }

    #[test]
    fn hmin_is_admissible(spec in random_ssp(8)) {
        let m = spec.build();
        let config = SolverConfig::default();
        let vi = solve_value_iteration(&m, &config.clone().with_epsilon(1e-9)).unwrap();
        let h = compute_hmin(&m, m.start(), &config);
        for (s, hv) in h.sorted() {
            let v = vi.values.get(s).unwrap_or(0.0);
            prop_assert!(hv <= v + config.epsilon, "h({s}) = {hv} > V* = {v}");
        }
    }

    #[test]
    fn hmin_of_reduced_dominates_full(spec in random_ssp(7), p in principle()) {
        let base: Arc<dyn SspModel> = Arc::new(spec.build());
        let reduced = build_reduced_model(Arc::clone(&base), ModelSelector::Uniform(p)).unwrap();
        let config = SolverConfig::default().with_epsilon(1e-9);
        let states = reachable_states(&*base, base.start());
        let full_h = Hmin::new(&*base, &config);
        let red_h = Hmin::new(&reduced, &config);
        full_h.warm(states.iter().copied());
        red_h.warm(states.iter().copied());
        for &s in &states {
            prop_assert!(full_h.value(s) <= red_h.value(s) + 1e-6, "state {s}");
        }
    }
}
