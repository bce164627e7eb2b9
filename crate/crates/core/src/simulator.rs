//! Plan on a reduced model, execute in the base model, replan the same
//! reduced model whenever execution reaches a state the policy does not
//! cover. Experiments compare several reduced models on common seeds.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng as _;
use rayon::prelude::*;

use crate::mdp::{reachable_states, Policy, SspModel, StateId};
use crate::reduction::{
    build_reduced_model, make_01rm_selector, summarize_selector, ModelSelector, OutcomeSelectionPrinciple,
    ReducedModel, SelectorSummary,
};
use crate::risk::{estimate_risk_profile, RiskPredicate, DEFAULT_DEPTH, DEFAULT_SAMPLES};
use crate::rng::{derive_seed, rng};
use crate::solvers::{solve_deterministic, Hmin, LaoStar, Solution, SolverConfig, SolverError};

#[derive(Debug, Clone, PartialEq)]
pub struct TrialStats {
    pub seed: u64,
    pub total_cost: f64,
    pub steps: usize,
    pub replans: usize,
    /// Replans that happened in a risky state.
    pub nse_hits: usize,
    pub reached_goal: bool,
    pub plan_time: Duration,
    pub replan_time: Duration,
    /// Solves where the reduced model had no solution from the current state
    /// and the base model was solved instead, including the initial plan.
    pub fallback_solves: usize,
}

impl TrialStats {
    pub fn planning_time(&self) -> Duration {
        self.plan_time + self.replan_time
    }
}

#[derive(Debug, Clone)]
pub struct TrialConfig {
    pub solver: SolverConfig,
    /// Execution steps before a trial is abandoned.
    pub step_cap: usize,
}

/// Solver state after the initial plan, reusable as the warm start of
/// every trial on the same reduced model.
pub struct InitialPlan<'m> {
    policy: Policy,
    lao: Option<LaoStar<'m, ReducedModel>>,
    plan_time: Duration,
    start_value: f64,
    fallback: bool,
}

impl InitialPlan<'_> {
    pub fn plan_time(&self) -> Duration {
        self.plan_time
    }

    /// Value of the start state in the model that was solved.
    pub fn start_value(&self) -> f64 {
        self.start_value
    }

    /// True when the reduced model had no solution and the base was solved.
    pub fn used_fallback(&self) -> bool {
        self.fallback
    }
}

fn solve_reduced<'m>(
    reduced: &'m ReducedModel,
    lao: &mut Option<LaoStar<'m, ReducedModel>>,
    config: &SolverConfig,
    from: StateId,
) -> Result<Solution, SolverError> {
    let result = if reduced.is_determinizing() {
        solve_deterministic(reduced, from, &*config.heuristic)
    } else {
        lao.get_or_insert_with(|| LaoStar::new(reduced, config.clone())).solve(from)
    };
    match result {
        Err(e @ SolverError::NonConvergence { .. }) => Ok(e.into_best().expect("carries best solution")),
        other => other,
    }
}

/// Solves the reduced model from its start state, or the base model when
/// the reduced model has no solution.
pub fn plan_initial<'m>(reduced: &'m ReducedModel, config: &SolverConfig) -> Result<InitialPlan<'m>, SolverError> {
    let clock = Instant::now();
    let mut lao = None;
    let (solution, fallback) = match solve_reduced(reduced, &mut lao, config, reduced.start()) {
        Ok(sol) => (sol, false),
        Err(_) => {
            lao = None;
            let base = &**reduced.base();
            let sol = LaoStar::new(base, config.clone())
                .solve(base.start())
                .or_else(|e| e.into_best().ok_or(SolverError::DeadEnd(base.start())))?;
            (sol, true)
        }
    };
    Ok(InitialPlan {
        start_value: solution.start_value(),
        policy: solution.policy,
        lao,
        plan_time: clock.elapsed(),
        fallback,
    })
}

/// One trial from the base start state, starting from a shared initial plan.
pub fn execute_trial<'m>(
    base: &dyn SspModel,
    reduced: &'m ReducedModel,
    d: &RiskPredicate,
    config: &TrialConfig,
    initial: &InitialPlan<'m>,
    seed: u64,
) -> TrialStats {
    let mut policy = initial.policy.clone();
    let mut lao = initial.lao.clone();
    let mut fallback: Option<LaoStar<'_, dyn SspModel>> = None;
    let mut stats = TrialStats {
        seed,
        total_cost: 0.0,
        steps: 0,
        replans: 0,
        nse_hits: 0,
        reached_goal: false,
        plan_time: initial.plan_time,
        replan_time: Duration::ZERO,
        fallback_solves: initial.fallback as usize,
    };
    let mut r = rng(seed);
    let mut s = base.start();
    loop {
        if base.is_goal(s) {
            stats.reached_goal = true;
            break;
        }
        if stats.steps >= config.step_cap {
            break;
        }
        let action = match policy.get(s) {
            Some(a) => a,
            None => {
                stats.replans += 1;
                if d.evaluate(s) {
                    stats.nse_hits += 1;
                }
                let clock = Instant::now();
                let solved = match solve_reduced(reduced, &mut lao, &config.solver, s) {
                    Ok(sol) => Some(sol),
                    Err(_) => {
                        stats.fallback_solves += 1;
                        let full = fallback.get_or_insert_with(|| LaoStar::new(base, config.solver.clone()));
                        full.solve(s).or_else(|e| e.into_best().ok_or(())).ok()
                    }
                };
                stats.replan_time += clock.elapsed();
                match solved.and_then(|sol| {
                    policy.merge(&sol.policy);
                    policy.get(s)
                }) {
                    Some(a) => a,
                    None => break,
                }
            }
        };
        stats.total_cost += base.cost(s, action);
        s = base.transition(s, action).sample(r.random::<f64>());
        stats.steps += 1;
    }
    stats
}

/// Plans on `reduced` from scratch and runs one trial.
pub fn run_trial(
    base: &dyn SspModel,
    reduced: &ReducedModel,
    d: &RiskPredicate,
    config: &TrialConfig,
    seed: u64,
) -> Result<TrialStats, SolverError> {
    let initial = plan_initial(reduced, &config.solver)?;
    Ok(execute_trial(base, reduced, d, config, &initial, seed))
}

/// Reduced models understood by [`standard_selector`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Mlod,
    M02,
    Full,
    Rm01,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Mlod, ModelKind::M02, ModelKind::Full, ModelKind::Rm01];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mlod => "mlod",
            ModelKind::M02 => "m02",
            ModelKind::Full => "full",
            ModelKind::Rm01 => "rm01",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown model `{s}` (expected mlod, m02, full or rm01)"))
    }
}

/// Reachability sampling parameters for the 0/1 selector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskSettings {
    pub threshold: f64,
    pub samples: usize,
    pub depth: usize,
    pub seed: u64,
}

impl Default for RiskSettings {
    fn default() -> Self {
        Self {
            threshold: 0.25,
            samples: DEFAULT_SAMPLES,
            depth: DEFAULT_DEPTH,
            seed: 0,
        }
    }
}

/// Builds the selector for `kind`. The 0/1 selector's reachability profile
/// is computed eagerly over the base-reachable states.
pub fn standard_selector(
    kind: ModelKind,
    base: &Arc<dyn SspModel>,
    d: &RiskPredicate,
    risk: &RiskSettings,
) -> ModelSelector {
    match kind {
        ModelKind::Mlod => ModelSelector::Uniform(OutcomeSelectionPrinciple::MLOD),
        ModelKind::M02 => ModelSelector::Uniform(OutcomeSelectionPrinciple::M02),
        ModelKind::Full => ModelSelector::Uniform(OutcomeSelectionPrinciple::FULL),
        ModelKind::Rm01 => {
            let profile = estimate_risk_profile(Arc::clone(base), d.clone(), risk.samples, risk.depth, risk.seed);
            profile.precompute_reachable();
            make_01rm_selector(Arc::new(profile), risk.threshold)
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub trials: usize,
    pub seed: u64,
    pub solver: SolverConfig,
    /// Defaults to ten times the number of reachable states.
    pub step_cap: Option<usize>,
    /// Worker threads for trials; 1 runs sequentially.
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            seed: 0,
            solver: SolverConfig::default(),
            step_cap: None,
            jobs: 1,
        }
    }
}

/// Optimal full-model solve from the start state.
#[derive(Debug, Clone)]
pub struct Baseline {
    pub optimal_cost: f64,
    pub solve_time: Duration,
    pub expanded_states: usize,
    pub reachable_states: usize,
    /// Time spent computing the shared `h_min` heuristic.
    pub heuristic_time: Duration,
}

#[derive(Debug, Clone)]
pub struct ModelReport {
    pub name: String,
    pub trials: Vec<TrialStats>,
    pub selector: Option<SelectorSummary>,
    /// Untimed selector construction (reachability sampling for 0/1).
    pub preprocess_time: Duration,
    pub initial_plan_time: Duration,
    pub error: Option<String>,
}

impl ModelReport {
    fn mean(&self, f: impl Fn(&TrialStats) -> f64) -> f64 {
        if self.trials.is_empty() {
            return f64::NAN;
        }
        self.trials.iter().map(f).sum::<f64>() / self.trials.len() as f64
    }

    pub fn mean_nse(&self) -> f64 {
        self.mean(|t| t.nse_hits as f64)
    }

    pub fn mean_replans(&self) -> f64 {
        self.mean(|t| t.replans as f64)
    }

    pub fn mean_cost(&self) -> f64 {
        self.mean(|t| t.total_cost)
    }

    /// Mean initial planning plus replanning time per trial.
    pub fn mean_planning_time(&self) -> Duration {
        Duration::from_secs_f64(self.mean(|t| t.planning_time().as_secs_f64()).max(0.0))
    }

    pub fn goal_failures(&self) -> usize {
        self.trials.iter().filter(|t| !t.reached_goal).count()
    }

    pub fn cost_increase_pct(&self, baseline: &Baseline) -> f64 {
        percent_cost_increase(self.mean_cost(), baseline.optimal_cost)
    }

    pub fn time_savings_pct(&self, baseline: &Baseline) -> f64 {
        percent_time_savings(baseline.solve_time, self.mean_planning_time())
    }
}

/// `100 (cost - optimal) / optimal`.
pub fn percent_cost_increase(mean_cost: f64, optimal: f64) -> f64 {
    100.0 * (mean_cost - optimal) / optimal
}

/// `100 (t_full - t_model) / t_full`.
pub fn percent_time_savings(full: Duration, model: Duration) -> f64 {
    let full = full.as_secs_f64();
    100.0 * (full - model.as_secs_f64()) / full
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub instance: String,
    pub baseline: Baseline,
    pub models: Vec<ModelReport>,
    pub trials: usize,
    pub seed: u64,
    pub step_cap: usize,
}

impl ExperimentReport {
    pub fn model(&self, name: &str) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.name == name)
    }

    pub fn trial_seeds(&self) -> Vec<u64> {
        trial_seeds(self.seed, self.trials)
    }
}

/// Per-trial seeds, shared by every model of an experiment.
pub fn trial_seeds(seed: u64, trials: usize) -> Vec<u64> {
    (0..trials as u64).map(|i| derive_seed(seed, i)).collect()
}

/// Full-model solve with `h_min`; the heuristic is computed first over every
/// reachable state and frozen, so later solves share it at lookup cost.
pub fn solve_baseline(base: &dyn SspModel, solver: &SolverConfig) -> Result<(Baseline, SolverConfig), SolverError> {
    let clock = Instant::now();
    let reachable = reachable_states(base, base.start());
    let hmin = Hmin::new(base, solver);
    hmin.warm(reachable.iter().copied());
    let config = solver.clone().with_heuristic(Arc::new(hmin.snapshot()));
    let heuristic_time = clock.elapsed();

    let solution = LaoStar::new(base, config.clone()).solve(base.start())?;
    Ok((
        Baseline {
            optimal_cost: solution.start_value(),
            solve_time: solution.solve_time,
            expanded_states: solution.expanded_states,
            reachable_states: reachable.len(),
            heuristic_time,
        },
        config,
    ))
}

/// A named reduced model to evaluate.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub name: String,
    pub selector: ModelSelector,
    pub preprocess_time: Duration,
}

impl ModelSpec {
    pub fn new(name: impl Into<String>, selector: ModelSelector) -> Self {
        Self {
            name: name.into(),
            selector,
            preprocess_time: Duration::ZERO,
        }
    }

    /// Builds a standard selector and records how long that took.
    pub fn standard(kind: ModelKind, base: &Arc<dyn SspModel>, d: &RiskPredicate, risk: &RiskSettings) -> Self {
        let clock = Instant::now();
        let selector = standard_selector(kind, base, d, risk);
        Self {
            name: kind.name().to_string(),
            selector,
            preprocess_time: clock.elapsed(),
        }
    }
}

/// Runs `config.trials` trials for every model on common seeds.
pub fn run_experiment(
    instance: &str,
    base: Arc<dyn SspModel>,
    models: Vec<ModelSpec>,
    d: &RiskPredicate,
    config: &ExperimentConfig,
) -> Result<ExperimentReport, SolverError> {
    assert!(config.trials >= 1, "at least one trial");
    let (baseline, solver) = solve_baseline(&*base, &config.solver)?;
    let step_cap = config.step_cap.unwrap_or(10 * baseline.reachable_states);
    let trial_config = TrialConfig { solver, step_cap };
    let seeds = trial_seeds(config.seed, config.trials);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.max(1))
        .build()
        .expect("thread pool");

    let reports = models
        .into_iter()
        .map(|spec| {
            let mut report = ModelReport {
                name: spec.name.clone(),
                trials: Vec::new(),
                selector: None,
                preprocess_time: spec.preprocess_time,
                initial_plan_time: Duration::ZERO,
                error: None,
            };
            let reduced = match build_reduced_model(Arc::clone(&base), spec.selector) {
                Ok(r) => r,
                Err(e) => {
                    report.error = Some(e.to_string());
                    return report;
                }
            };
            let initial = match plan_initial(&reduced, &trial_config.solver) {
                Ok(p) => p,
                Err(e) => {
                    report.error = Some(e.to_string());
                    return report;
                }
            };
            report.initial_plan_time = initial.plan_time;
            let run = |&seed: &u64| execute_trial(&*base, &reduced, d, &trial_config, &initial, seed);
            report.trials = if config.jobs > 1 {
                pool.install(|| seeds.par_iter().map(run).collect())
            } else {
                seeds.iter().map(run).collect()
            };
            report.selector = Some(summarize_selector(&reduced));
            report
        })
        .collect();

    Ok(ExperimentReport {
        instance: instance.to_string(),
        baseline,
        models: reports,
        trials: config.trials,
        seed: config.seed,
        step_cap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{ActionId, ExplicitSsp};

    /// `s0 -a-> {goal: 0.6, s0: 0.4}`, cost 1; `V* = 1/0.6`.
    fn self_loop(p_goal: f64) -> Arc<dyn SspModel> {
        let mut m = ExplicitSsp::new(2, 1, StateId(0));
        m.add_action(StateId(0), ActionId(0), 1.0, vec![(StateId(1), p_goal), (StateId(0), 1.0 - p_goal)]);
        m.set_goal(StateId(1));
        Arc::new(m)
    }

    fn reduced(base: &Arc<dyn SspModel>, p: OutcomeSelectionPrinciple) -> ReducedModel {
        build_reduced_model(Arc::clone(base), ModelSelector::Uniform(p)).unwrap()
    }

    fn trial_config() -> TrialConfig {
        TrialConfig {
            solver: SolverConfig::default(),
            step_cap: 1000,
        }
    }

    #[test]
    fn full_model_never_replans() {
        let base = self_loop(0.6);
        let m = reduced(&base, OutcomeSelectionPrinciple::FULL);
        let d = RiskPredicate::from_states([StateId(0)]);
        let mut total = 0.0;
        for seed in 0..1000 {
            let t = run_trial(&*base, &m, &d, &trial_config(), seed).unwrap();
            assert_eq!((t.replans, t.nse_hits), (0, 0));
            assert!(t.reached_goal);
            total += t.total_cost;
        }
        assert!((total / 1000.0 - 1.0 / 0.6).abs() < 0.1);
    }

    #[test]
    fn determinized_loop_branch_reaches_goal() {
        // MLOD keeps only the 0.6 self-loop, a dead end; planning falls back to
        // the base model and execution retries until the goal branch fires.
        let base = self_loop(0.4);
        let m = reduced(&base, OutcomeSelectionPrinciple::MLOD);
        let d = RiskPredicate::never();
        let mut total = 0.0;
        for seed in 0..1000 {
            let t = run_trial(&*base, &m, &d, &trial_config(), seed).unwrap();
            assert!(t.reached_goal);
            assert_eq!((t.fallback_solves, t.replans), (1, 0));
            total += t.total_cost;
        }
        assert!((total / 1000.0 - 2.5).abs() < 0.2);
    }

    #[test]
    fn mlod_keeping_goal_branch_never_replans() {
        let base = self_loop(0.6);
        let m = reduced(&base, OutcomeSelectionPrinciple::MLOD);
        let d = RiskPredicate::from_states([StateId(0)]);
        for seed in 0..200 {
            let t = run_trial(&*base, &m, &d, &trial_config(), seed).unwrap();
            assert_eq!(t.replans, 0);
            assert!(t.reached_goal);
        }
    }

    #[test]
    fn deterministic_base_costs_optimal() {
        let mut m = ExplicitSsp::new(3, 1, StateId(0));
        m.add_deterministic(StateId(0), ActionId(0), 2.0, StateId(1));
        m.add_deterministic(StateId(1), ActionId(0), 3.0, StateId(2));
        m.set_goal(StateId(2));
        let base: Arc<dyn SspModel> = Arc::new(m);
        let r = reduced(&base, OutcomeSelectionPrinciple::MLOD);
        let t = run_trial(&*base, &r, &RiskPredicate::never(), &trial_config(), 9).unwrap();
        assert_eq!((t.total_cost, t.replans, t.steps), (5.0, 0, 2));
    }

    #[test]
    fn single_trial_report_matches_trial() {
        let base = self_loop(0.6);
        let d = RiskPredicate::never();
        let config = ExperimentConfig {
            trials: 1,
            seed: 4,
            ..ExperimentConfig::default()
        };
        let spec = ModelSpec::new("full", ModelSelector::Uniform(OutcomeSelectionPrinciple::FULL));
        let report = run_experiment("loop", Arc::clone(&base), vec![spec], &d, &config).unwrap();
        let m = report.model("full").unwrap();
        assert_eq!(m.trials.len(), 1);
        let t = &m.trials[0];
        assert_eq!(t.seed, trial_seeds(4, 1)[0]);
        assert_eq!(m.mean_cost(), t.total_cost);
        assert!((report.baseline.optimal_cost - 1.0 / 0.6).abs() < 2e-3);
    }

    #[test]
    fn model_kind_parses() {
        assert_eq!("RM01".parse::<ModelKind>().unwrap(), ModelKind::Rm01);
        assert!("m03".parse::<ModelKind>().is_err());
    }
}
