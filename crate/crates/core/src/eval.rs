//! Agent evaluation: competence curves, regret traces and ensemble learning
//! efficiency.
//!
//! Every agent cost here is measured by the harness in [`Evaluator::run_task`]
//! rather than claimed by the agent. A failed task costs infinity. Wherever a
//! failure has to enter a finite sum it is replaced by a sentinel regret (see
//! [`Evaluator::sentinel`]), and the raw record keeps the failure flag.

use std::fmt;
use std::io;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::agents::{move_cap, Agent, Decision, History, Plan, StepContext, Task};
use crate::cost::Cost;
use crate::engine::{reference_table, IcTable, ResourceBias, SearchBudget};
use crate::env::{ActionSeq, Environment, StateId, Transition};
use crate::generators::complexity_proxy;
use crate::par::{self, Exec};
use crate::vm::{execute, Regime};

/// Proxy temperature used for ensemble weights `2^(−proxy/τ)`.
pub const PROXY_TEMPERATURE: f64 = 8.0;

/// Scheme-A proposals rejected before falling back to a fixed task.
pub const MAX_PROPOSAL_RESAMPLES: usize = 100;

/// Disclosure attached to every efficiency report.
pub const PROXY_DISCLOSURE: &str =
    "weights use a run-length description-length proxy, not Kolmogorov complexity";

/// How evaluation tasks are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scheme {
    /// The agent proposes its own tasks.
    A,
    /// A greedy adversary picks the task with the largest shadow regret.
    B,
    /// Tasks drawn uniformly from reachable pairs, with the generalization gap
    /// recorded after every task.
    C,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scheme::A => "A",
            Scheme::B => "B",
            Scheme::C => "C",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown scheme `{0}` (expected A, B or C)")]
pub struct UnknownScheme(pub String);

impl FromStr for Scheme {
    type Err = UnknownScheme;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(Scheme::A),
            "B" | "b" => Ok(Scheme::B),
            "C" | "c" => Ok(Scheme::C),
            other => Err(UnknownScheme(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub scheme: Scheme,
    pub horizon: usize,
    pub discount: f64,
    pub seed: u64,
    pub bias: ResourceBias,
}

impl EvalConfig {
    pub fn new(scheme: Scheme, horizon: usize, bias: ResourceBias) -> Self {
        EvalConfig {
            scheme,
            horizon,
            discount: 0.95,
            seed: 0,
            bias,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_discount(mut self, discount: f64) -> Self {
        self.discount = discount;
        self
    }

    fn validate(&self) {
        assert!(self.horizon >= 1, "horizon must be at least 1");
        assert!(
            self.discount > 0.0 && self.discount < 1.0,
            "discount must lie in (0, 1)"
        );
    }
}

/// What happened when the harness ran one task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskOutcome {
    pub task: Task,
    /// Every action executed, probes included.
    pub actions: ActionSeq,
    pub transitions: Vec<Transition>,
    pub end: StateId,
    /// Harness-measured cost; infinite on failure.
    pub cost: Cost,
}

impl TaskOutcome {
    pub fn succeeded(&self) -> bool {
        self.cost.is_finite()
    }
}

/// Shared evaluation context for one environment and bias.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    env: &'a Environment,
    bias: ResourceBias,
    budget: SearchBudget,
    exec: Exec,
    reference: IcTable,
    sentinel: f64,
}

impl<'a> Evaluator<'a> {
    pub fn new(env: &'a Environment, bias: ResourceBias, budget: SearchBudget, exec: Exec) -> Self {
        let reference = reference_table(env, bias, budget, exec);
        let diameter = env.diameter() as f64 + 1.0;
        let bits = budget.max_bits as f64 + 1.0;
        let sentinel = match bias {
            ResourceBias::ActionCount => diameter,
            ResourceBias::ProgramLength { .. } => bits,
            ResourceBias::Combined { alpha, beta, .. } => alpha * bits + beta * diameter,
        };
        Evaluator {
            env,
            bias,
            budget,
            exec,
            reference,
            sentinel,
        }
    }

    pub fn env(&self) -> &Environment {
        self.env
    }

    pub fn bias(&self) -> ResourceBias {
        self.bias
    }

    /// The IC values regret is measured against.
    pub fn reference(&self) -> &IcTable {
        &self.reference
    }

    pub fn ic(&self, task: Task) -> Cost {
        self.reference.cost(task.start, task.target)
    }

    /// Regret charged for a failed task in finite sums.
    pub fn sentinel(&self) -> f64 {
        self.sentinel
    }

    /// All pairs with a finite reference cost, in `(s, t)` order.
    pub fn reachable_tasks(&self) -> Vec<Task> {
        self.env
            .states()
            .flat_map(|s| self.env.states().map(move |t| Task::new(s, t)))
            .filter(|&task| self.ic(task).is_finite())
            .collect()
    }

    /// Reachable pairs with `s ≠ t`, the population a competence curve
    /// averages over.
    pub fn competence_tasks(&self) -> Vec<Task> {
        self.reachable_tasks()
            .into_iter()
            .filter(|t| t.start != t.target)
            .collect()
    }

    /// Drives `agent` through `task`, feeding every executed transition back.
    ///
    /// Probes beyond the move cap, a give-up, a faulting program or a plan
    /// that ends anywhere but the target all count as failure.
    pub fn run_task(&self, agent: &mut dyn Agent, task: Task) -> TaskOutcome {
        let cap = move_cap(self.env.num_states());
        let mut current = task.start;
        let mut actions = Vec::new();
        let mut transitions = Vec::new();
        let mut program_cost = None;
        let mut success = false;

        loop {
            let ctx = StepContext {
                task,
                current,
                moves: actions.len(),
            };
            let (segment, last) = match agent.decide(&ctx) {
                Decision::GiveUp => break,
                Decision::Probe(a) => {
                    if actions.len() >= cap {
                        break;
                    }
                    (vec![a], false)
                }
                Decision::Commit(Plan::Actions(plan)) => (plan, true),
                Decision::Commit(Plan::Program(program)) => {
                    let regime = self.bias.regime().unwrap_or(Regime::Oracle);
                    match execute(&program, self.env, regime, current, self.budget.step_budget).result {
                        Ok(out) => {
                            if actions.is_empty() {
                                program_cost = Some(self.bias.program_cost(program.len_bits(), out.actions.len()));
                            }
                            (out.actions, true)
                        }
                        Err(_) => break,
                    }
                }
            };
            let trace = self.env.trace(current, &segment);
            for &t in &trace {
                agent.observe(t);
            }
            if let Some(t) = trace.last() {
                current = t.to;
            }
            actions.extend(segment);
            transitions.extend(trace);
            if last {
                success = current == task.target;
                break;
            }
        }

        let cost = if success {
            program_cost.unwrap_or_else(|| self.bias.action_sequence_cost(&actions, self.env.dims()))
        } else {
            Cost::INFINITE
        };
        TaskOutcome {
            task,
            actions,
            transitions,
            end: current,
            cost,
        }
    }

    /// Runs `task` on a throwaway copy of `agent`.
    pub fn shadow(&self, agent: &dyn Agent, task: Task) -> TaskOutcome {
        let mut copy = agent.boxed_clone();
        self.run_task(copy.as_mut(), task)
    }

    /// `cost − IC` as it enters finite sums: the sentinel on failure.
    pub fn capped_regret(&self, task: Task, cost: Cost) -> f64 {
        let ic = self.ic(task);
        match cost.checked_gap(ic) {
            Some(gap) if gap.is_finite() => gap.value(),
            Some(_) => self.sentinel,
            None => panic!("agent cost {cost} beats the reference IC {ic} on {task}"),
        }
    }

    /// Competence curve of `agent` with its history frozen.
    pub fn competence_curve(&self, agent: &dyn Agent) -> CompetenceCurve {
        let tasks = self.competence_tasks();
        let samples = par::map(self.exec, &tasks, |&task| (self.ic(task), self.shadow(agent, task).cost));
        CompetenceCurve::from_samples(&samples)
    }

    /// Mean capped shadow regret over all reachable pairs.
    pub fn generalization_gap(&self, agent: &dyn Agent) -> f64 {
        let tasks = self.reachable_tasks();
        if tasks.is_empty() {
            return 0.0;
        }
        let regrets = par::map(self.exec, &tasks, |&task| {
            self.capped_regret(task, self.shadow(agent, task).cost)
        });
        regrets.iter().sum::<f64>() / tasks.len() as f64
    }

    /// The reachable task with the largest shadow regret, ties to the
    /// smallest `(s, t)`.
    pub fn adversary_next_task(&self, agent: &dyn Agent) -> Task {
        let tasks = self.reachable_tasks();
        let regrets = par::map(self.exec, &tasks, |&task| {
            self.capped_regret(task, self.shadow(agent, task).cost)
        });
        let mut best = 0;
        for (i, &r) in regrets.iter().enumerate() {
            if r > regrets[best] {
                best = i;
            }
        }
        tasks[best]
    }

    fn proposed_task(&self, agent: &mut dyn Agent, current: StateId) -> Task {
        for _ in 0..MAX_PROPOSAL_RESAMPLES {
            let task = agent.propose_task(current);
            let valid = self.env.contains(task.start) && self.env.contains(task.target);
            if valid && self.ic(task).is_finite() {
                return task;
            }
        }
        self.reachable_tasks()[0]
    }

    /// Runs `config.horizon` tasks chosen by `config.scheme`.
    pub fn run_regret(&self, agent: &mut dyn Agent, config: &EvalConfig) -> RegretTrace {
        config.validate();
        assert_eq!(config.bias, self.bias, "config bias must match the evaluator");
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let reachable = self.reachable_tasks();
        let mut current = StateId(0);
        let mut cumulative = 0.0;
        let mut history = History::new();
        let mut records = Vec::with_capacity(config.horizon);

        for t in 1..=config.horizon {
            let task = match config.scheme {
                Scheme::A => self.proposed_task(agent, current),
                Scheme::B => self.adversary_next_task(agent),
                Scheme::C => reachable[rng.gen_range(0..reachable.len())],
            };
            let outcome = self.run_task(agent, task);
            for &tr in &outcome.transitions {
                history.record(tr);
            }
            history.task_count += 1;
            current = outcome.end;
            let ic = self.ic(task);
            let delta = outcome.cost.checked_gap(ic).unwrap_or_else(|| {
                panic!("agent cost {} beats the reference IC {ic} on {task}", outcome.cost)
            });
            let capped = self.capped_regret(task, outcome.cost);
            cumulative += capped;
            let gap = (config.scheme == Scheme::C).then(|| self.generalization_gap(agent));
            records.push(RegretRecord {
                t,
                task,
                cost: outcome.cost,
                ic,
                delta,
                capped_delta: capped,
                cumulative,
                gap,
                observed: history.len(),
            });
        }
        RegretTrace {
            scheme: config.scheme,
            transitions: self.env.num_states() * self.env.num_actions(),
            records,
        }
    }
}

/// One task of a regret run.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretRecord {
    pub t: usize,
    pub task: Task,
    pub cost: Cost,
    pub ic: Cost,
    /// `cost − IC`; infinite when the agent failed.
    pub delta: Cost,
    /// `delta` with failures replaced by the sentinel.
    pub capped_delta: f64,
    /// Running sum of `capped_delta`.
    pub cumulative: f64,
    /// Generalization gap after this task (scheme C only).
    pub gap: Option<f64>,
    /// Distinct transitions observed so far, this task included.
    pub observed: usize,
}

impl RegretRecord {
    pub fn failed(&self) -> bool {
        self.delta.is_infinite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub scheme: Scheme,
    /// `n · m` for the environment the trace was run on.
    pub transitions: usize,
    pub records: Vec<RegretRecord>,
}

impl RegretTrace {
    /// First task after which every transition had been observed.
    pub fn coverage_time(&self) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.observed == self.transitions)
            .map(|r| r.t)
    }

    pub fn total(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cumulative)
    }

    /// `−Σ_t γ^t Δ_t` over capped deltas.
    pub fn discounted_summary(&self, discount: f64) -> f64 {
        let mut weight = 1.0;
        let mut sum = 0.0;
        for r in &self.records {
            weight *= discount;
            sum += weight * r.capped_delta;
        }
        -sum
    }

    /// CSV with header `t,s,target,cost,ic,delta,cum`, plus `gap` under
    /// scheme C.
    pub fn write_csv<W: io::Write>(&self, out: W) -> io::Result<()> {
        let with_gap = self.scheme == Scheme::C;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t", "s", "target", "cost", "ic", "delta", "cum"];
        if with_gap {
            header.push("gap");
        }
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![
                r.t.to_string(),
                r.task.start.to_string(),
                r.task.target.to_string(),
                r.cost.to_string(),
                r.ic.to_string(),
                r.delta.to_string(),
                fmt_f64(r.cumulative),
            ];
            if with_gap {
                row.push(r.gap.map(fmt_f64).unwrap_or_default());
            }
            w.write_record(&row)?;
        }
        w.flush()
    }
}

/// Shortest round-trip decimal form; integral values print without a point.
pub fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// A right-continuous step function of difficulty.
///
/// `Γ(k) = 0` below the first breakpoint and `Γ(k) = value_i` on
/// `[k_i, k_{i+1})`, the last step extending to infinity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompetenceCurve {
    breakpoints: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurveError {
    #[error("breakpoints must be strictly increasing, finite and non-negative")]
    BadLevels,
    #[error("curve values must be finite and non-negative")]
    BadValues,
}

impl CompetenceCurve {
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self, CurveError> {
        let levels_ok = breakpoints.iter().all(|&(k, _)| k.is_finite() && k >= 0.0)
            && breakpoints.windows(2).all(|w| w[0].0 < w[1].0);
        if !levels_ok {
            return Err(CurveError::BadLevels);
        }
        if !breakpoints.iter().all(|&(_, v)| v.is_finite() && v >= 0.0) {
            return Err(CurveError::BadValues);
        }
        Ok(CompetenceCurve { breakpoints })
    }

    /// Builds the curve from `(IC, agent cost)` samples.
    ///
    /// Breakpoints are the distinct finite IC values. A sample contributes
    /// `IC²/C`, or zero when the agent failed or `IC = 0`. Samples with
    /// infinite IC are ignored.
    pub fn from_samples(samples: &[(Cost, Cost)]) -> Self {
        let mut finite: Vec<(f64, f64)> = samples
            .iter()
            .filter_map(|&(ic, c)| {
                let ic = ic.as_finite()?;
                let contrib = match c.as_finite() {
                    Some(c) if ic > 0.0 => ic * ic / c,
                    _ => 0.0,
                };
                Some((ic, contrib))
            })
            .collect();
        finite.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut breakpoints = Vec::new();
        let mut sum = 0.0;
        let mut i = 0;
        while i < finite.len() {
            let k = finite[i].0;
            while i < finite.len() && finite[i].0 == k {
                sum += finite[i].1;
                i += 1;
            }
            breakpoints.push((k, sum / i as f64));
        }
        CompetenceCurve { breakpoints }
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn value(&self, k: f64) -> f64 {
        let idx = self.breakpoints.partition_point(|&(level, _)| level <= k);
        if idx == 0 {
            0.0
        } else {
            self.breakpoints[idx - 1].1
        }
    }

    /// `∫₀^∞ 2^(−k) Γ(k) dk`, summed exactly over the steps.
    pub fn scalar(&self) -> f64 {
        scalar_competence(self)
    }

    /// `Σ w_i Γ_i(k)` on the union of breakpoints.
    pub fn weighted_sum(parts: &[(f64, &CompetenceCurve)]) -> CompetenceCurve {
        let mut levels: Vec<f64> = parts
            .iter()
            .flat_map(|(_, c)| c.breakpoints.iter().map(|&(k, _)| k))
            .collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        let breakpoints = levels
            .into_iter()
            .map(|k| (k, parts.iter().map(|(w, c)| w * c.value(k)).sum()))
            .collect();
        CompetenceCurve { breakpoints }
    }

    /// CSV rows `k,gamma`.
    pub fn write_csv<W: io::Write>(&self, out: W) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "gamma"])?;
        for &(k, v) in &self.breakpoints {
            w.write_record([fmt_f64(k), fmt_f64(v)])?;
        }
        w.flush()
    }
}

/// Closed form of `∫₀^∞ 2^(−k) Γ(k) dk` for a step function.
pub fn scalar_competence(curve: &CompetenceCurve) -> f64 {
    let bp = curve.breakpoints();
    let ln2 = std::f64::consts::LN_2;
    bp.iter()
        .enumerate()
        .map(|(i, &(k, v))| {
            let upper = bp.get(i + 1).map_or(0.0, |&(next, _)| (-next).exp2());
            v * ((-k).exp2() - upper) / ln2
        })
        .sum()
}

/// Competence curve of `agent` on `env`.
pub fn competence_curve(agent: &dyn Agent, env: &Environment, bias: ResourceBias, budget: SearchBudget) -> CompetenceCurve {
    Evaluator::new(env, bias, budget, Exec::default()).competence_curve(agent)
}

/// Regret trace of `agent` on `env` under `config`.
pub fn run_regret(agent: &mut dyn Agent, env: &Environment, config: &EvalConfig, budget: SearchBudget) -> RegretTrace {
    Evaluator::new(env, config.bias, budget, Exec::default()).run_regret(agent, config)
}

/// Mean capped regret over every reachable pair, history frozen.
pub fn generalization_gap(agent: &dyn Agent, env: &Environment, bias: ResourceBias, budget: SearchBudget) -> f64 {
    Evaluator::new(env, bias, budget, Exec::default()).generalization_gap(agent)
}

/// Greedy adversarial task against `agent`.
pub fn adversary_next_task(agent: &dyn Agent, env: &Environment, bias: ResourceBias, budget: SearchBudget) -> Task {
    Evaluator::new(env, bias, budget, Exec::default()).adversary_next_task(agent)
}

/// A weighted set of environments.
#[derive(Debug, Clone)]
pub struct Ensemble {
    members: Vec<Member>,
}

#[derive(Debug, Clone)]
pub struct Member {
    pub env: Arc<Environment>,
    pub proxy: u64,
    pub weight: f64,
}

impl Ensemble {
    /// Weights `2^(−proxy/τ)`, normalized to sum to one.
    pub fn from_envs(envs: Vec<Environment>, tau: f64) -> Self {
        assert!(!envs.is_empty(), "an ensemble needs at least one environment");
        assert!(tau > 0.0, "temperature must be positive");
        let proxies: Vec<u64> = envs.iter().map(complexity_proxy).collect();
        let floor = *proxies.iter().min().expect("non-empty");
        let raw: Vec<f64> = proxies
            .iter()
            .map(|&p| (-((p - floor) as f64) / tau).exp2())
            .collect();
        let total: f64 = raw.iter().sum();
        let members = envs
            .into_iter()
            .zip(proxies)
            .zip(raw)
            .map(|((env, proxy), w)| Member {
                env: Arc::new(env),
                proxy,
                weight: w / total,
            })
            .collect();
        Ensemble { members }
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }
}

/// Per-environment part of a learning-efficiency run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemberEfficiency {
    pub env: String,
    pub proxy: u64,
    pub weight: f64,
    /// `−Σ_t γ^t Δ_t`.
    pub summary: f64,
    pub cumulative_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyReport {
    pub value: f64,
    pub members: Vec<MemberEfficiency>,
    pub proxy: &'static str,
}

/// Weighted discounted-regret summary over `ensemble`, with a fresh agent
/// per member.
pub fn learning_efficiency<F>(
    factory: F,
    ensemble: &Ensemble,
    config: &EvalConfig,
    budget: SearchBudget,
    exec: Exec,
) -> EfficiencyReport
where
    F: Fn(&Arc<Environment>) -> Box<dyn Agent> + Sync + Send,
{
    config.validate();
    let members = par::map(exec, ensemble.members(), |m| {
        let mut agent = factory(&m.env);
        // members already run in parallel; keep the inner work sequential
        let inner = if exec.is_parallel() { Exec::Sequential } else { exec };
        let trace = Evaluator::new(&m.env, config.bias, budget, inner).run_regret(agent.as_mut(), config);
        MemberEfficiency {
            env: m.env.name().to_string(),
            proxy: m.proxy,
            weight: m.weight,
            summary: trace.discounted_summary(config.discount),
            cumulative_regret: trace.total(),
        }
    });
    EfficiencyReport {
        value: members.iter().map(|m| m.weight * m.summary).sum(),
        members,
        proxy: PROXY_DISCLOSURE,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{OracleAgent, RandomAgent, TabularLearner};
    use crate::env::ActionId;
    use crate::generators::{cycle_env, gated_corridor, grid_env};

    /// Walks the cycle twice as far as needed by looping once around first.
    #[derive(Clone)]
    struct DoubleCost {
        env: Arc<Environment>,
    }

    impl Agent for DoubleCost {
        fn name(&self) -> &'static str {
            "double"
        }
        fn decide(&mut self, ctx: &StepContext) -> Decision {
            let path = self.env.shortest_path(ctx.current, ctx.task.target).unwrap();
            Decision::Commit(Plan::Actions(path.iter().chain(&path).copied().collect()))
        }
        fn observe(&mut self, _: Transition) {}
        fn propose_task(&mut self, current: StateId) -> Task {
            Task::new(current, current)
        }
        fn boxed_clone(&self) -> Box<dyn Agent> {
            Box::new(self.clone())
        }
    }

    #[derive(Clone)]
    struct Quitter;

    impl Agent for Quitter {
        fn name(&self) -> &'static str {
            "quitter"
        }
        fn decide(&mut self, _: &StepContext) -> Decision {
            Decision::GiveUp
        }
        fn observe(&mut self, _: Transition) {}
        fn propose_task(&mut self, current: StateId) -> Task {
            Task::new(current, current)
        }
        fn boxed_clone(&self) -> Box<dyn Agent> {
            Box::new(self.clone())
        }
    }

    fn oracle(env: &Environment) -> OracleAgent {
        OracleAgent::new(Arc::new(env.clone()), ResourceBias::ActionCount, SearchBudget::default(), 0)
    }

    #[test]
    fn oracle_curve_on_three_cycle() {
        let env = cycle_env(3).unwrap();
        let curve = competence_curve(&oracle(&env), &env, ResourceBias::ActionCount, SearchBudget::default());
        assert_eq!(curve.breakpoints(), &[(1.0, 1.0), (2.0, 1.5)]);
        let ln2 = std::f64::consts::LN_2;
        let expected = (0.5 - 0.25) / ln2 + 1.5 * 0.25 / ln2;
        assert!((curve.scalar() - expected).abs() < 1e-12);
    }

    #[test]
    fn doubled_cost_halves_the_contribution() {
        // on a 1-action environment where every state reaches the absorbing
        // end, walking twice as far still arrives
        let env = Environment::from_fn("chain", 3, 1, |s, _| (s + 1).min(2)).unwrap();
        let agent = DoubleCost { env: Arc::new(env.clone()) };
        let ev = Evaluator::new(&env, ResourceBias::ActionCount, SearchBudget::default(), Exec::Sequential);
        // only pairs into the absorbing state survive doubling; (0,1) fails
        let out = ev.shadow(&agent, Task::new(StateId(1), StateId(2)));
        assert_eq!(out.cost, Cost::from_count(2));
        let curve = ev.competence_curve(&agent);
        // IC=1 pairs: (0,1) fails -> 0, (1,2) -> 1/2; IC=2 pair (0,2) -> 4/4
        assert_eq!(curve.breakpoints(), &[(1.0, 0.25), (2.0, 0.5)]);
    }

    #[test]
    fn failing_agent_has_zero_curve() {
        let env = cycle_env(4).unwrap();
        let curve = competence_curve(&Quitter, &env, ResourceBias::ActionCount, SearchBudget::default());
        assert!(curve.breakpoints().iter().all(|&(_, v)| v == 0.0));
        assert_eq!(curve.scalar(), 0.0);
    }

    #[test]
    fn scalar_closed_forms() {
        let c = 0.8;
        let constant = CompetenceCurve::new(vec![(0.0, c)]).unwrap();
        assert!((constant.scalar() - c / std::f64::consts::LN_2).abs() < 1e-15);
        let step = CompetenceCurve::new(vec![(1.0, 1.0)]).unwrap();
        assert!((step.scalar() - 0.5 / std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(CompetenceCurve::new(vec![]).unwrap().scalar(), 0.0);
        assert_eq!(CompetenceCurve::new(vec![(2.0, 1.0), (1.0, 1.0)]), Err(CurveError::BadLevels));
    }

    #[test]
    fn curve_value_is_right_continuous() {
        let c = CompetenceCurve::new(vec![(1.0, 2.0), (3.0, 5.0)]).unwrap();
        assert_eq!(c.value(0.5), 0.0);
        assert_eq!(c.value(1.0), 2.0);
        assert_eq!(c.value(2.9), 2.0);
        assert_eq!(c.value(3.0), 5.0);
        assert_eq!(c.value(1e9), 5.0);
    }

    #[test]
    fn oracle_has_zero_regret_under_every_scheme() {
        let env = grid_env(3, 2).unwrap();
        for scheme in [Scheme::A, Scheme::B, Scheme::C] {
            let config = EvalConfig::new(scheme, 15, ResourceBias::ActionCount).with_seed(4);
            let trace = run_regret(&mut oracle(&env), &env, &config, SearchBudget::default());
            assert!(trace.records.iter().all(|r| r.delta == Cost::ZERO), "{scheme}");
            assert_eq!(trace.total(), 0.0);
        }
    }

    #[test]
    fn oracle_under_program_length_commits_witnesses() {
        let env = gated_corridor("10").unwrap();
        let bias = ResourceBias::program_length(Regime::Oracle);
        let budget = SearchBudget::new(12, 10_000);
        let mut agent = OracleAgent::new(Arc::new(env.clone()), bias, budget, 0);
        let config = EvalConfig::new(Scheme::C, 10, bias).with_seed(1);
        let trace = run_regret(&mut agent, &env, &config, budget);
        assert!(trace.records.iter().all(|r| r.delta == Cost::ZERO));
    }

    #[test]
    fn adversary_against_oracle_picks_smallest_pair() {
        let env = cycle_env(4).unwrap();
        let task = adversary_next_task(&oracle(&env), &env, ResourceBias::ActionCount, SearchBudget::default());
        assert_eq!(task, Task::new(StateId(0), StateId(0)));
    }

    #[test]
    fn learner_on_cycle_never_pays() {
        // with one action, exploring is the shortest path
        let env = cycle_env(3).unwrap();
        let config = EvalConfig::new(Scheme::B, 20, ResourceBias::ActionCount);
        let trace = run_regret(&mut TabularLearner::new(env.dims(), 0), &env, &config, SearchBudget::default());
        assert_eq!(trace.total(), 0.0);
    }

    #[test]
    fn learner_regret_is_flat_after_coverage() {
        let env = crate::generators::random_env(5, 2, 11).unwrap();
        let config = EvalConfig::new(Scheme::B, 40, ResourceBias::ActionCount);
        let trace = run_regret(&mut TabularLearner::new(env.dims(), 0), &env, &config, SearchBudget::default());
        let mut agent = TabularLearner::new(env.dims(), 0);
        let ev = Evaluator::new(&env, ResourceBias::ActionCount, SearchBudget::default(), Exec::default());
        let again = ev.run_regret(&mut agent, &config);
        assert_eq!(again, trace);
        assert_eq!(ev.generalization_gap(&agent), 0.0);
        assert!(trace.total() > 0.0);
        // each costly task teaches at least one new transition
        let costly = trace.records.iter().filter(|r| r.capped_delta > 0.0).count();
        assert!(costly <= 10);
        if let Some(covered_at) = trace.coverage_time() {
            let tail = &trace.records[covered_at..];
            assert!(tail.iter().all(|r| r.delta == Cost::ZERO));
        }
        let observed: Vec<usize> = trace.records.iter().map(|r| r.observed).collect();
        assert!(observed.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn random_agent_on_corridor_keeps_paying() {
        let env = gated_corridor("101").unwrap();
        let mut agent = RandomAgent::new(env.dims(), 3);
        let config = EvalConfig::new(Scheme::B, 10, ResourceBias::ActionCount);
        let trace = run_regret(&mut agent, &env, &config, SearchBudget::default());
        assert!(trace.records.iter().all(|r| r.capped_delta > 0.0));
        assert!(trace.records.windows(2).all(|w| w[0].cumulative < w[1].cumulative));
    }

    #[test]
    fn gap_shrinks_along_nested_histories() {
        let env = grid_env(3, 3).unwrap();
        let all: Vec<Transition> = env
            .states()
            .flat_map(|s| env.actions().map(move |a| (s, a)))
            .map(|(s, a)| Transition { from: s, action: a, to: env.step(s, a) })
            .collect();
        let ev = Evaluator::new(&env, ResourceBias::ActionCount, SearchBudget::default(), Exec::default());
        let mut agent = TabularLearner::new(env.dims(), 0);
        let mut prev = f64::INFINITY;
        for chunk in all.chunks(6) {
            agent.observe_all(chunk);
            let gap = ev.generalization_gap(&agent);
            assert!(gap <= prev + 1e-12, "{gap} > {prev}");
            prev = gap;
        }
        assert_eq!(prev, 0.0);

        let mut half = TabularLearner::new(env.dims(), 0);
        half.observe_all(&all[..all.len() / 2]);
        assert!(ev.generalization_gap(&half) > 0.0);
    }

    #[test]
    fn adversary_targets_far_pairs_for_naive_learner() {
        let env = grid_env(3, 3).unwrap();
        let ev = Evaluator::new(&env, ResourceBias::ActionCount, SearchBudget::default(), Exec::default());
        let agent = TabularLearner::new(env.dims(), 0);
        let chosen = ev.adversary_next_task(&agent);
        let best = ev
            .reachable_tasks()
            .into_iter()
            .map(|t| ev.capped_regret(t, ev.shadow(&agent, t).cost))
            .fold(0.0, f64::max);
        assert_eq!(ev.capped_regret(chosen, ev.shadow(&agent, chosen).cost), best);
        assert!(best > 0.0);
        assert_eq!(chosen, ev.adversary_next_task(&agent));
    }

    #[test]
    fn scheme_c_records_gap() {
        let env = cycle_env(4).unwrap();
        let mut agent = TabularLearner::new(env.dims(), 0);
        let config = EvalConfig::new(Scheme::C, 8, ResourceBias::ActionCount).with_seed(2);
        let trace = run_regret(&mut agent, &env, &config, SearchBudget::default());
        assert!(trace.records.iter().all(|r| r.gap.is_some()));
        let mut csv = Vec::new();
        trace.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("t,s,target,cost,ic,delta,cum,gap\n"));
    }

    #[test]
    fn harness_counts_probes_in_cost() {
        let env = cycle_env(3).unwrap();
        let ev = Evaluator::new(&env, ResourceBias::ActionCount, SearchBudget::default(), Exec::Sequential);
        let mut agent = TabularLearner::new(env.dims(), 0);
        let out = ev.run_task(&mut agent, Task::new(StateId(0), StateId(2)));
        assert_eq!(out.actions, vec![ActionId(0), ActionId(0)]);
        assert_eq!(out.cost, Cost::from_count(2));
        assert!(agent.is_complete() || agent.known_transitions() == 2);
    }

    #[test]
    fn efficiency_of_a_single_member_is_its_summary() {
        let env = cycle_env(4).unwrap();
        let ensemble = Ensemble::from_envs(vec![env.clone()], PROXY_TEMPERATURE);
        assert_eq!(ensemble.members()[0].weight, 1.0);
        let config = EvalConfig::new(Scheme::B, 6, ResourceBias::ActionCount);
        let report = learning_efficiency(
            |e| Box::new(TabularLearner::new(e.dims(), 0)),
            &ensemble,
            &config,
            SearchBudget::default(),
            Exec::default(),
        );
        let trace = run_regret(&mut TabularLearner::new(env.dims(), 0), &env, &config, SearchBudget::default());
        assert_eq!(report.value, trace.discounted_summary(0.95));
    }

    #[test]
    fn weights_normalize() {
        let envs = (0..4).map(|s| crate::generators::random_env(4, 2, s).unwrap()).collect();
        let e = Ensemble::from_envs(envs, PROXY_TEMPERATURE);
        let total: f64 = e.members().iter().map(|m| m.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(e.members().iter().all(|m| m.weight > 0.0 && m.weight <= 1.0));
    }
}
