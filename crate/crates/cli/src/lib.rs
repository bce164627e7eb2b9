//! Instance loading, commands and report writers behind the `prm` binary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, ValueEnum};

use prm_core::domains::ev::{ev_instance, generate_ev_scenarios, EvScenario};
use prm_core::domains::racetrack::{racetrack_instance, RacetrackConfig};
use prm_core::domains::sailing::{sailing_instance, GoalPosition, SailingConfig};
use prm_core::domains::{builtin_track, Instance, BUILTIN_TRACKS};
use prm_core::mdp::{reachable_states, SspModel};
use prm_core::reduction::build_reduced_model;
use prm_core::simulator::{
    percent_cost_increase, percent_time_savings, run_experiment, standard_selector, ExperimentConfig, ExperimentReport,
    ModelKind, ModelSpec, RiskSettings,
};
use prm_core::solvers::{solve_lao_star, solve_value_iteration, Hmin, Solution, SolverConfig, DEFAULT_EPSILON};

/// Number of scenarios `EV-NN` names index into, and their generator seed.
pub const EV_SUITE_SIZE: usize = 25;
pub const EV_SUITE_SEED: u64 = 0;

/// Instances at or below this many reachable states get the VI cross-check.
pub const ORACLE_STATE_LIMIT: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Domain {
    Racetrack,
    Sailing,
    Ev,
}

/// Domain and instance selection shared by every command.
#[derive(Debug, Clone, Args)]
pub struct InstanceArgs {
    #[arg(long, value_enum)]
    pub domain: Domain,
    /// Racetrack: built-in name (Square-3) or map file. Sailing: size and
    /// goal, e.g. 20C or 40M. EV: scenario JSON file or EV-NN.
    #[arg(long)]
    pub instance: String,
}

/// Experiment parameters.
#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    #[command(flatten)]
    pub target: InstanceArgs,
    /// Comma-separated subset of mlod, m02, full, rm01.
    #[arg(long, value_delimiter = ',', default_value = "mlod,m02,full,rm01")]
    pub models: Vec<ModelKind>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    /// Reachability at or above which the 0/1 model keeps all outcomes.
    #[arg(long, default_value_t = 0.25)]
    pub threshold: f64,
    /// Random walks per state for the reachability estimate.
    #[arg(long, default_value_t = 30)]
    pub samples: usize,
    /// Transitions per random walk.
    #[arg(long, default_value_t = 4)]
    pub depth: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Per-trial step limit; defaults to ten times the reachable states.
    #[arg(long)]
    pub step_cap: Option<usize>,
    /// Directory for trials.csv, summary.csv and summary.txt.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.trials >= 1, "--trials must be at least 1");
        ensure!(self.epsilon > 0.0, "--epsilon must be positive");
        ensure!((0.0..=1.0).contains(&self.threshold), "--threshold must lie in [0, 1]");
        ensure!(self.samples >= 1 && self.depth >= 1, "--samples and --depth must be at least 1");
        ensure!(!self.models.is_empty(), "--models is empty");
        Ok(())
    }

    pub fn risk_settings(&self) -> RiskSettings {
        RiskSettings {
            threshold: self.threshold,
            samples: self.samples,
            depth: self.depth,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub target: InstanceArgs,
    /// Model to solve; reduced models are solved from the base start.
    #[arg(long, default_value = "full")]
    pub model: ModelKind,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.25)]
    pub threshold: f64,
    #[arg(long, default_value_t = 30)]
    pub samples: usize,
    #[arg(long, default_value_t = 4)]
    pub depth: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Cross-check the start value against value iteration.
    #[arg(long)]
    pub oracle: bool,
    /// Write `state action` lines of the greedy policy here.
    #[arg(long)]
    pub policy_out: Option<PathBuf>,
}

/// Parses `20C`, `40m`, `Sailing-80(M)` and similar.
pub fn parse_sailing(spec: &str) -> Result<SailingConfig> {
    let s = spec.trim();
    let s = s.strip_prefix("Sailing-").or_else(|| s.strip_prefix("sailing-")).unwrap_or(s);
    let digits = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
    let size: usize = s[..digits].parse().with_context(|| format!("sailing instance `{spec}`: missing size"))?;
    let goal = s[digits..].trim_matches(|c| c == '(' || c == ')' || c == ':');
    let goal = if goal.is_empty() { GoalPosition::Corner } else { GoalPosition::from_str(goal)? };
    Ok(SailingConfig::new(size, goal))
}

/// Index of an `EV-NN` name into the generated suite.
fn ev_index(spec: &str) -> Option<usize> {
    let rest = spec.strip_prefix("EV-").or_else(|| spec.strip_prefix("ev-"))?;
    rest.parse().ok()
}

pub fn load_instance(args: &InstanceArgs) -> Result<Instance> {
    let spec = args.instance.as_str();
    let instance = match args.domain {
        Domain::Racetrack => {
            if BUILTIN_TRACKS.iter().any(|n| n.eq_ignore_ascii_case(spec)) {
                racetrack_instance(spec, &builtin_track(spec)?, RacetrackConfig::default())?
            } else {
                let text = fs::read_to_string(spec).with_context(|| {
                    format!("`{spec}` is neither a built-in track ({}) nor a readable map file", BUILTIN_TRACKS.join(", "))
                })?;
                let name = Path::new(spec).file_stem().map_or(spec.into(), |s| s.to_string_lossy().into_owned());
                racetrack_instance(&name, &text, RacetrackConfig::default())?
            }
        }
        Domain::Sailing => sailing_instance(parse_sailing(spec)?)?,
        Domain::Ev => {
            if let Some(i) = ev_index(spec) {
                let mut suite = generate_ev_scenarios(EV_SUITE_SIZE.max(i + 1), EV_SUITE_SEED);
                ev_instance(suite.swap_remove(i))?
            } else {
                let text = fs::read_to_string(spec).with_context(|| format!("reading EV scenario `{spec}`"))?;
                ev_instance(EvScenario::from_json(&text)?)?
            }
        }
    };
    Ok(instance)
}

#[derive(Debug, Clone)]
pub struct SolveSummary {
    pub instance: String,
    pub model: ModelKind,
    pub reachable_states: usize,
    pub solution: Solution,
    pub oracle_value: Option<f64>,
}

impl SolveSummary {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let sol = &self.solution;
        let _ = writeln!(out, "instance        {}", self.instance);
        let _ = writeln!(out, "model           {}", self.model);
        let _ = writeln!(out, "reachable       {}", self.reachable_states);
        let _ = writeln!(out, "V(s0)           {:.6}", sol.start_value());
        let _ = writeln!(out, "expanded        {}", sol.expanded_states);
        let _ = writeln!(out, "solve time      {:.3} ms", sol.solve_time.as_secs_f64() * 1e3);
        if let Some(v) = self.oracle_value {
            let _ = writeln!(out, "VI V(s0)        {v:.6}");
            let _ = writeln!(out, "|LAO* - VI|     {:.2e}", (sol.start_value() - v).abs());
        }
        out
    }
}

/// Solves one model of an instance with LAO* under `h_min`.
pub fn cmd_solve(args: &SolveArgs) -> Result<SolveSummary> {
    ensure!(args.epsilon > 0.0, "--epsilon must be positive");
    let inst = load_instance(&args.target)?;
    let base = Arc::clone(&inst.problem);
    let config = SolverConfig::default().with_epsilon(args.epsilon);
    let risk = RiskSettings {
        threshold: args.threshold,
        samples: args.samples,
        depth: args.depth,
        seed: args.seed,
    };
    let reduced = build_reduced_model(Arc::clone(&base), standard_selector(args.model, &base, &inst.risk, &risk))?;
    let reachable = reachable_states(&*base, base.start());
    let hmin = Hmin::new(&reduced, &config);
    hmin.warm(reachable.iter().copied());
    let config = config.with_heuristic(Arc::new(hmin.snapshot()));
    let solution = solve_lao_star(&reduced, reduced.start(), &config)
        .with_context(|| format!("solving {} model of {}", args.model, inst.name))?;

    let oracle_value = if args.oracle {
        ensure!(
            reachable.len() <= ORACLE_STATE_LIMIT,
            "--oracle needs at most {ORACLE_STATE_LIMIT} reachable states, {} has {}",
            inst.name,
            reachable.len()
        );
        let vi = solve_value_iteration(&reduced, &SolverConfig::default().with_epsilon(1e-9))?;
        let gap = (vi.start_value() - solution.start_value()).abs();
        ensure!(
            gap <= 2.0 * args.epsilon,
            "LAO* {} and VI {} differ by {gap:.3e}",
            solution.start_value(),
            vi.start_value()
        );
        Some(vi.start_value())
    } else {
        None
    };
    if let Some(path) = &args.policy_out {
        fs::write(path, solution.policy.dump()).with_context(|| format!("writing policy to {}", path.display()))?;
    }
    Ok(SolveSummary {
        instance: inst.name,
        model: args.model,
        reachable_states: reachable.len(),
        solution,
        oracle_value,
    })
}

/// Runs every requested model on common seeds and writes reports if
/// `config.out` is set.
pub fn cmd_experiment(config: &RunConfig) -> Result<ExperimentReport> {
    config.validate()?;
    if let Some(dir) = &config.out {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    }
    let inst = load_instance(&config.target)?;
    let base = Arc::clone(&inst.problem);
    let risk = config.risk_settings();
    let mut models: Vec<ModelKind> = Vec::new();
    for &m in &config.models {
        if !models.contains(&m) {
            models.push(m);
        }
    }
    let specs = models
        .iter()
        .map(|&k| ModelSpec::standard(k, &base, &inst.risk, &risk))
        .collect();
    let experiment = ExperimentConfig {
        trials: config.trials,
        seed: config.seed,
        solver: SolverConfig::default().with_epsilon(config.epsilon),
        step_cap: config.step_cap,
        jobs: config.jobs,
    };
    let report = run_experiment(&inst.name, base, specs, &inst.risk, &experiment)?;
    if let Some(dir) = &config.out {
        write_reports(&report, dir)?;
    }
    Ok(report)
}

pub const TRIALS_HEADER: &str = "model,trial,seed,cost,steps,replans,nse_hits,reached_goal,plan_ms,replan_ms";
pub const SUMMARY_HEADER: &str = "model,trials,avg_nse,avg_replans,mean_cost,optimal_cost,cost_increase_pct,\
goal_failures,planning_ms,full_solve_ms,time_savings_pct,error";

/// Columns holding wall-clock measurements; everything else is a function
/// of the configuration and seed.
pub const TIMING_COLUMNS: [&str; 5] = ["plan_ms", "replan_ms", "planning_ms", "full_solve_ms", "time_savings_pct"];

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

pub fn trials_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(TRIALS_HEADER);
    out.push('\n');
    for m in &report.models {
        for (i, t) in m.trials.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{:.3},{:.3}",
                m.name,
                i,
                t.seed,
                t.total_cost,
                t.steps,
                t.replans,
                t.nse_hits,
                t.reached_goal,
                ms(t.plan_time),
                ms(t.replan_time)
            );
        }
    }
    out
}

pub fn summary_csv(report: &ExperimentReport) -> String {
    let b = &report.baseline;
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for m in &report.models {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{:.3},{:.3},{:.2},{}",
            m.name,
            m.trials.len(),
            m.mean_nse(),
            m.mean_replans(),
            m.mean_cost(),
            b.optimal_cost,
            percent_cost_increase(m.mean_cost(), b.optimal_cost),
            m.goal_failures(),
            ms(m.mean_planning_time()),
            ms(b.solve_time),
            percent_time_savings(b.solve_time, m.mean_planning_time()),
            m.error.as_deref().unwrap_or("").replace(',', ";")
        );
    }
    out
}

/// Aligned text table: NSE, cost increase and time savings per model.
pub fn summary_table(report: &ExperimentReport) -> String {
    let b = &report.baseline;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{}: {} reachable states, optimal cost {:.3}, full solve {:.1} ms, {} trials, seed {}",
        report.instance,
        b.reachable_states,
        b.optimal_cost,
        ms(b.solve_time),
        report.trials,
        report.seed
    );
    let _ = writeln!(out, "{:<6} {:>9} {:>10} {:>11} {:>11} {:>9}", "model", "avg NSE", "replans", "% cost inc", "% time sav", "failures");
    for m in &report.models {
        if let Some(e) = &m.error {
            let _ = writeln!(out, "{:<6} error: {e}", m.name);
            continue;
        }
        let _ = writeln!(
            out,
            "{:<6} {:>9.2} {:>10.2} {:>11.2} {:>11.2} {:>9}",
            m.name,
            m.mean_nse(),
            m.mean_replans(),
            m.cost_increase_pct(b),
            m.time_savings_pct(b),
            m.goal_failures()
        );
    }
    out
}

pub fn write_reports(report: &ExperimentReport, dir: &Path) -> Result<()> {
    for (file, body) in [
        ("trials.csv", trials_csv(report)),
        ("summary.csv", summary_csv(report)),
        ("summary.txt", summary_table(report)),
    ] {
        let path = dir.join(file);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

/// Drops the named columns from every row of a CSV document.
pub fn strip_columns(csv: &str, drop: &[&str]) -> Result<String> {
    let mut lines = csv.lines();
    let Some(header) = lines.next() else { bail!("empty CSV") };
    let keep: Vec<bool> = header.split(',').map(|c| !drop.contains(&c)).collect();
    let mut out = String::new();
    for line in std::iter::once(header).chain(lines) {
        let cells: Vec<&str> = line.split(',').collect();
        ensure!(cells.len() == keep.len(), "ragged CSV row `{line}`");
        let kept: Vec<&str> = cells.into_iter().zip(&keep).filter(|(_, &k)| k).map(|(c, _)| c).collect();
        out.push_str(&kept.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// Writes a built-in map or an EV scenario so it can be edited and loaded
/// back through `--instance <file>`.
pub fn cmd_export(args: &InstanceArgs) -> Result<String> {
    let spec = args.instance.as_str();
    match args.domain {
        Domain::Racetrack => Ok(builtin_track(spec)?),
        Domain::Ev => {
            let i = ev_index(spec).with_context(|| format!("`{spec}` is not of the form EV-NN"))?;
            let mut suite = generate_ev_scenarios(EV_SUITE_SIZE.max(i + 1), EV_SUITE_SEED);
            Ok(suite.swap_remove(i).to_json() + "\n")
        }
        Domain::Sailing => bail!("sailing instances are fully described by --instance"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sailing_names() {
        let c = parse_sailing("Sailing-40(M)").unwrap();
        assert_eq!((c.size, c.goal), (40, GoalPosition::Middle));
        let c = parse_sailing("20c").unwrap();
        assert_eq!((c.size, c.goal), (20, GoalPosition::Corner));
        assert!(parse_sailing("C20").is_err());
        assert!(parse_sailing("20X").is_err());
    }

    #[test]
    fn ev_names() {
        assert_eq!(ev_index("EV-07"), Some(7));
        assert_eq!(ev_index("EV-x"), None);
        assert_eq!(ev_index("scenario.json"), None);
    }

    #[test]
    fn strip_drops_named_columns() {
        let csv = "a,b,c\n1,2,3\n";
        assert_eq!(strip_columns(csv, &["b"]).unwrap(), "a,c\n1,3\n");
        assert!(strip_columns("a,b\n1\n", &[]).is_err());
    }
}
