//! The agent contract and the reference agents.
//!
//! An agent is driven one decision at a time by the evaluation harness. For a
//! task it either commits to a final plan, probes a single exploratory action,
//! or gives up. Everything the harness executes is observed back by the agent.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engine::{reference_table, IcTable, ResourceBias, SearchBudget};
use crate::env::{ActionId, ActionSeq, Dims, Environment, StateId, Transition};
use crate::vm::Program;

/// Exploratory moves allowed per task, as a multiple of the state count.
pub const MOVE_CAP_FACTOR: usize = 4;

/// Per-task exploration cap for an environment of `states` states.
pub fn move_cap(states: usize) -> usize {
    MOVE_CAP_FACTOR * states
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Task {
    pub start: StateId,
    pub target: StateId,
}

impl Task {
    pub fn new(start: StateId, target: StateId) -> Self {
        Task { start, target }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.start, self.target)
    }
}

/// Observed transitions accumulated over tasks.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct History {
    observed: BTreeSet<Transition>,
    pub task_count: usize,
}

impl History {
    pub fn new() -> Self {
        History::default()
    }

    /// Returns true if the triple was new.
    pub fn record(&mut self, t: Transition) -> bool {
        self.observed.insert(t)
    }

    pub fn observed(&self) -> &BTreeSet<Transition> {
        &self.observed
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed.is_empty()
    }

    /// True once every `(s, a)` has been seen.
    pub fn is_complete(&self, dims: Dims) -> bool {
        self.observed.len() == dims.states * dims.actions
    }
}

/// What the agent hands the harness to execute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Plan {
    Actions(ActionSeq),
    /// A reference-machine program; the harness runs it and uses its output.
    Program(Program),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    /// Execute this plan and end the task.
    Commit(Plan),
    /// Execute one action, then ask again.
    Probe(ActionId),
    GiveUp,
}

/// What the agent sees before each decision.
#[derive(Debug, Clone, Copy)]
pub struct StepContext {
    pub task: Task,
    pub current: StateId,
    /// Actions already executed in this task.
    pub moves: usize,
}

pub trait Agent: Send + Sync {
    fn name(&self) -> &'static str;

    fn decide(&mut self, ctx: &StepContext) -> Decision;

    fn observe(&mut self, transition: Transition);

    fn observe_all(&mut self, transitions: &[Transition]) {
        for &t in transitions {
            self.observe(t);
        }
    }

    /// A self-chosen task for self-directed evaluation.
    fn propose_task(&mut self, current: StateId) -> Task;

    /// An independent copy used for shadow evaluation.
    fn boxed_clone(&self) -> Box<dyn Agent>;
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown agent `{0}` (expected one of: oracle, random, tabular)")]
pub struct UnknownAgent(pub String);

/// Builds a reference agent by CLI name.
pub fn make_agent(
    name: &str,
    env: &Arc<Environment>,
    bias: ResourceBias,
    budget: SearchBudget,
    seed: u64,
) -> Result<Box<dyn Agent>, UnknownAgent> {
    match name {
        "oracle" => Ok(Box::new(OracleAgent::new(env.clone(), bias, budget, seed))),
        "random" => Ok(Box::new(RandomAgent::new(env.dims(), seed))),
        "tabular" => Ok(Box::new(TabularLearner::new(env.dims(), seed))),
        other => Err(UnknownAgent(other.to_string())),
    }
}

/// Visit order, parent links and visited flags of a BFS over the learned model.
type LearnedBfs = (Vec<StateId>, Vec<Option<(StateId, ActionId)>>, Vec<bool>);

/// Knows the transition function and always plays an IC-optimal plan.
#[derive(Clone)]
pub struct OracleAgent {
    env: Arc<Environment>,
    bias: ResourceBias,
    /// Program witnesses, only for program-based biases.
    table: Option<Arc<IcTable>>,
    rng: ChaCha8Rng,
}

impl OracleAgent {
    pub fn new(env: Arc<Environment>, bias: ResourceBias, budget: SearchBudget, seed: u64) -> Self {
        let table = (bias != ResourceBias::ActionCount)
            .then(|| Arc::new(reference_table(&env, bias, budget, Default::default())));
        OracleAgent {
            env,
            bias,
            table,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn bias(&self) -> ResourceBias {
        self.bias
    }
}

impl Agent for OracleAgent {
    fn name(&self) -> &'static str {
        "oracle"
    }

    fn decide(&mut self, ctx: &StepContext) -> Decision {
        let (s, t) = (ctx.current, ctx.task.target);
        match &self.table {
            Some(table) => match table.get(s, t).witness_program() {
                Some(p) => Decision::Commit(Plan::Program(p.clone())),
                None => Decision::GiveUp,
            },
            None => match self.env.shortest_path(s, t) {
                Some(path) => Decision::Commit(Plan::Actions(path)),
                None => Decision::GiveUp,
            },
        }
    }

    fn observe(&mut self, _transition: Transition) {}

    fn propose_task(&mut self, current: StateId) -> Task {
        let reach: Vec<StateId> = self
            .env
            .reachable_set(current)
            .into_iter()
            .filter(|&t| t != current)
            .collect();
        if reach.is_empty() {
            return Task::new(current, current);
        }
        Task::new(current, reach[self.rng.gen_range(0..reach.len())])
    }

    fn boxed_clone(&self) -> Box<dyn Agent> {
        Box::new(self.clone())
    }
}

/// Random walk until the target is hit; proposes uniform targets.
#[derive(Clone)]
pub struct RandomAgent {
    dims: Dims,
    rng: ChaCha8Rng,
}

impl RandomAgent {
    pub fn new(dims: Dims, seed: u64) -> Self {
        RandomAgent {
            dims,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Agent for RandomAgent {
    fn name(&self) -> &'static str {
        "random"
    }

    fn decide(&mut self, ctx: &StepContext) -> Decision {
        if ctx.current == ctx.task.target {
            Decision::Commit(Plan::Actions(Vec::new()))
        } else if ctx.moves >= move_cap(self.dims.states) {
            Decision::GiveUp
        } else {
            Decision::Probe(ActionId(self.rng.gen_range(0..self.dims.actions)))
        }
    }

    fn observe(&mut self, _transition: Transition) {}

    fn propose_task(&mut self, current: StateId) -> Task {
        Task::new(current, StateId(self.rng.gen_range(0..self.dims.states)))
    }

    fn boxed_clone(&self) -> Box<dyn Agent> {
        Box::new(self.clone())
    }
}

/// Learns the transition table from observations and plans by BFS on what it
/// has seen. When the target is not known to be reachable it walks to the
/// nearest state with an untried action and tries it.
#[derive(Clone)]
pub struct TabularLearner {
    dims: Dims,
    model: Vec<Option<StateId>>,
    known: usize,
    rng: ChaCha8Rng,
}

impl TabularLearner {
    pub fn new(dims: Dims, seed: u64) -> Self {
        TabularLearner {
            dims,
            model: vec![None; dims.states * dims.actions],
            known: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn known_transitions(&self) -> usize {
        self.known
    }

    pub fn is_complete(&self) -> bool {
        self.known == self.dims.states * self.dims.actions
    }

    pub fn lookup(&self, s: StateId, a: ActionId) -> Option<StateId> {
        self.model[s.0 * self.dims.actions + a.0]
    }

    fn unknown_action(&self, s: StateId) -> Option<ActionId> {
        (0..self.dims.actions)
            .map(ActionId)
            .find(|&a| self.lookup(s, a).is_none())
    }

    /// BFS over known transitions: distance-ordered visit list and parents.
    fn learned_bfs(&self, from: StateId) -> LearnedBfs {
        let n = self.dims.states;
        let mut seen = vec![false; n];
        let mut parent = vec![None; n];
        let mut order = Vec::new();
        let mut queue = VecDeque::from([from]);
        seen[from.0] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for a in (0..self.dims.actions).map(ActionId) {
                if let Some(v) = self.lookup(u, a) {
                    if !seen[v.0] {
                        seen[v.0] = true;
                        parent[v.0] = Some((u, a));
                        queue.push_back(v);
                    }
                }
            }
        }
        (order, parent, seen)
    }

    /// Shortest known path, or `None` if `to` is not known to be reachable.
    pub fn learned_path(&self, from: StateId, to: StateId) -> Option<ActionSeq> {
        let (_, parent, seen) = self.learned_bfs(from);
        seen[to.0].then(|| unwind(&parent, from, to))
    }

    /// Nearest known-reachable state that still has an untried action.
    fn nearest_frontier(&self, from: StateId) -> Option<(StateId, ActionSeq)> {
        let (order, parent, _) = self.learned_bfs(from);
        order
            .into_iter()
            .find(|&s| self.unknown_action(s).is_some())
            .map(|f| (f, unwind(&parent, from, f)))
    }
}

fn unwind(parent: &[Option<(StateId, ActionId)>], from: StateId, to: StateId) -> ActionSeq {
    let mut path = Vec::new();
    let mut cur = to;
    while cur != from {
        let (p, a) = parent[cur.0].expect("visited state has a parent");
        path.push(a);
        cur = p;
    }
    path.reverse();
    path
}

impl Agent for TabularLearner {
    fn name(&self) -> &'static str {
        "tabular"
    }

    /// Commits a known path only when no untried action could beat it: any
    /// route through an unknown transition first reached at frontier state `u`
    /// has length at least `d(u) + 1`. Otherwise it walks to the nearest
    /// frontier and tries an action there.
    fn decide(&mut self, ctx: &StepContext) -> Decision {
        let known = self.learned_path(ctx.current, ctx.task.target);
        let frontier = self.nearest_frontier(ctx.current);
        let optimistic = frontier.as_ref().map(|(_, path)| path.len() + 1);
        if let Some(path) = known {
            if optimistic.is_none_or(|bound| path.len() <= bound) {
                return Decision::Commit(Plan::Actions(path));
            }
        }
        if ctx.moves >= move_cap(self.dims.states) {
            return Decision::GiveUp;
        }
        match frontier {
            Some((f, path)) if path.is_empty() => {
                Decision::Probe(self.unknown_action(f).expect("frontier has an untried action"))
            }
            Some((_, path)) => Decision::Probe(path[0]),
            // Everything reachable is known and the target is not among it.
            None => Decision::GiveUp,
        }
    }

    fn observe(&mut self, t: Transition) {
        let slot = &mut self.model[t.from.0 * self.dims.actions + t.action.0];
        if slot.is_none() {
            *slot = Some(t.to);
            self.known += 1;
        }
    }

    fn propose_task(&mut self, current: StateId) -> Task {
        let n = self.dims.states;
        if self.is_complete() {
            let pairs: Vec<Task> = (0..n)
                .map(StateId)
                .flat_map(|s| {
                    let (order, _, _) = self.learned_bfs(s);
                    order.into_iter().filter(move |&t| t != s).map(move |t| Task::new(s, t))
                })
                .collect();
            if pairs.is_empty() {
                return Task::new(current, current);
            }
            return pairs[self.rng.gen_range(0..pairs.len())];
        }
        let (_, _, seen) = self.learned_bfs(current);
        let unknown: Vec<StateId> = (0..n).map(StateId).filter(|s| !seen[s.0]).collect();
        if !unknown.is_empty() {
            return Task::new(current, unknown[self.rng.gen_range(0..unknown.len())]);
        }
        let (order, _, _) = self.learned_bfs(current);
        let frontier = order
            .iter()
            .copied()
            .find(|&s| s != current && self.unknown_action(s).is_some())
            .or_else(|| self.unknown_action(current).map(|_| current))
            .unwrap_or(current);
        Task::new(current, frontier)
    }

    fn boxed_clone(&self) -> Box<dyn Agent> {
        Box::new(self.clone())
    }
}
