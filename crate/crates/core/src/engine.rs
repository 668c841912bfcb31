//! Intervention complexity under the supported resource biases.
//!
//! Action-count IC is the BFS distance in the state graph and is always exact.
//! Program-length and combined IC are found by enumerating reference-machine
//! programs in (length, lexicographic) order. That search is bounded by a
//! [`SearchBudget`]; every result carries an [`Exactness`] certificate saying
//! whether the minimum is proven or only an upper bound within the budget.

use std::fmt;

use serde::Serialize;

use crate::cost::Cost;
use crate::env::{ActionSeq, Dims, Environment, StateId};
use crate::par::{self, Exec};
use crate::vm::{execute, Encoding, Enumerator, Fault, Program, Regime, DEFAULT_STEP_BUDGET};

/// Default enumeration bound in bits.
pub const DEFAULT_MAX_BITS: usize = 24;

/// Default allowance for the triangle inequality under program-length bias.
pub const DEFAULT_PROGRAM_SLACK: f64 = 8.0;

/// How a program is charged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ResourceBias {
    /// Length of the output action sequence.
    #[serde(rename = "action")]
    ActionCount,
    /// Program length in bits.
    #[serde(rename = "pl")]
    ProgramLength { regime: Regime },
    /// `alpha · bits + beta · output length`.
    #[serde(rename = "comb")]
    Combined { alpha: f64, beta: f64, regime: Regime },
}

impl ResourceBias {
    pub fn program_length(regime: Regime) -> Self {
        ResourceBias::ProgramLength { regime }
    }

    /// Panics unless both weights are positive and finite.
    pub fn combined(alpha: f64, beta: f64, regime: Regime) -> Self {
        assert!(alpha > 0.0 && alpha.is_finite(), "alpha must be positive");
        assert!(beta > 0.0 && beta.is_finite(), "beta must be positive");
        ResourceBias::Combined { alpha, beta, regime }
    }

    pub fn regime(&self) -> Option<Regime> {
        match *self {
            ResourceBias::ActionCount => None,
            ResourceBias::ProgramLength { regime } | ResourceBias::Combined { regime, .. } => Some(regime),
        }
    }

    /// Cost of a program of `bits` bits whose output has `output_len` actions.
    pub fn program_cost(&self, bits: usize, output_len: usize) -> Cost {
        match *self {
            ResourceBias::ActionCount => Cost::from_count(output_len),
            ResourceBias::ProgramLength { .. } => Cost::from_count(bits),
            ResourceBias::Combined { alpha, beta, .. } => {
                Cost::finite(alpha * bits as f64 + beta * output_len as f64)
            }
        }
    }

    /// Cost of `actions` compiled to `EMIT a₁ … EMIT aₖ HALT`.
    pub fn action_sequence_cost(&self, actions: &[crate::env::ActionId], dims: Dims) -> Cost {
        let bits = Encoding::new(dims).emit_program_bits(actions.len());
        self.program_cost(bits, actions.len())
    }

    /// Cost of the empty intervention (`HALT`, or no actions).
    pub fn empty_cost(&self) -> Cost {
        self.program_cost(2, 0)
    }

    fn objective(&self) -> Option<(f64, f64)> {
        match *self {
            ResourceBias::ActionCount => None,
            ResourceBias::ProgramLength { .. } => Some((1.0, 0.0)),
            ResourceBias::Combined { alpha, beta, .. } => Some((alpha, beta)),
        }
    }
}

impl fmt::Display for ResourceBias {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResourceBias::ActionCount => write!(f, "action"),
            ResourceBias::ProgramLength { regime } => write!(f, "pl-{regime}"),
            ResourceBias::Combined { alpha, beta, regime } => write!(f, "comb-{regime}({alpha},{beta})"),
        }
    }
}

/// Enumeration bounds for program search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SearchBudget {
    pub max_bits: usize,
    pub step_budget: usize,
}

impl SearchBudget {
    pub fn new(max_bits: usize, step_budget: usize) -> Self {
        assert!(max_bits >= 2, "max_bits must be at least 2");
        assert!(step_budget >= 1, "step_budget must be at least 1");
        SearchBudget { max_bits, step_budget }
    }
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget::new(DEFAULT_MAX_BITS, DEFAULT_STEP_BUDGET)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Exactness {
    /// The cost is the true minimum.
    Exact,
    /// The cost is the minimum over programs within the budget; the true value
    /// may be lower (a budgeted program faulted) or lower than ∞ (none found).
    ExactUpToBudget(SearchBudget),
}

impl Exactness {
    pub fn is_exact(&self) -> bool {
        matches!(self, Exactness::Exact)
    }
}

/// Serializes as an action array or a `0b…` program string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum Witness {
    Actions(ActionSeq),
    Program(Program),
}

/// `IC(s, t)` with its witness and certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct IcResult {
    pub cost: Cost,
    pub witness: Option<Witness>,
    pub exactness: Exactness,
}

impl IcResult {
    fn unreachable() -> Self {
        IcResult {
            cost: Cost::INFINITE,
            witness: None,
            exactness: Exactness::Exact,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.exactness.is_exact()
    }

    pub fn witness_program(&self) -> Option<&Program> {
        match &self.witness {
            Some(Witness::Program(p)) => Some(p),
            _ => None,
        }
    }

    pub fn witness_actions(&self) -> Option<&ActionSeq> {
        match &self.witness {
            Some(Witness::Actions(a)) => Some(a),
            _ => None,
        }
    }
}

/// JSON-lines record for one IC query.
#[derive(Debug, Clone, Serialize)]
pub struct IcRecord<'a> {
    pub env: &'a str,
    pub s: StateId,
    pub t: StateId,
    pub bias: ResourceBias,
    pub cost: Cost,
    pub exactness: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<SearchBudget>,
    pub witness: Option<Witness>,
}

impl<'a> IcRecord<'a> {
    pub fn new(env: &'a Environment, s: StateId, t: StateId, bias: ResourceBias, result: &IcResult) -> Self {
        let (exactness, budget) = match result.exactness {
            Exactness::Exact => ("Exact", None),
            Exactness::ExactUpToBudget(b) => ("ExactUpToBudget", Some(b)),
        };
        IcRecord {
            env: env.name(),
            s,
            t,
            bias,
            cost: result.cost,
            exactness,
            budget,
            witness: result.witness.clone(),
        }
    }
}

/// Action-count IC: the BFS distance, with a shortest path as witness.
pub fn ic_action_count(env: &Environment, s: StateId, t: StateId) -> IcResult {
    match env.shortest_path(s, t) {
        Some(path) => IcResult {
            cost: Cost::from_count(path.len()),
            witness: Some(Witness::Actions(path)),
            exactness: Exactness::Exact,
        },
        None => IcResult::unreachable(),
    }
}

/// Action-count IC for every pair; row `s` is one BFS sweep.
pub fn ic_all_pairs_action_count(env: &Environment, exec: Exec) -> IcTable {
    let rows = par::map_range(exec, env.num_states(), |s| {
        let tree = env.bfs(StateId(s));
        env.states()
            .map(|t| match tree.path_to(t) {
                Some(path) => IcResult {
                    cost: Cost::from_count(path.len()),
                    witness: Some(Witness::Actions(path)),
                    exactness: Exactness::Exact,
                },
                None => IcResult::unreachable(),
            })
            .collect::<Vec<_>>()
    });
    IcTable {
        states: env.num_states(),
        entries: rows.into_iter().flatten().collect(),
    }
}

/// Program-length IC: the shortest program whose output drives `s` to `t`.
pub fn ic_program_length(
    env: &Environment,
    s: StateId,
    t: StateId,
    regime: Regime,
    budget: SearchBudget,
) -> IcResult {
    search_pairs(env, regime, (1.0, 0.0), budget, &[(s, t)], Exec::default())
        .pop()
        .expect("one pair in, one result out")
}

/// Combined IC: minimises `alpha · bits + beta · output length`.
#[allow(clippy::too_many_arguments)]
pub fn ic_combined(
    env: &Environment,
    s: StateId,
    t: StateId,
    alpha: f64,
    beta: f64,
    regime: Regime,
    budget: SearchBudget,
) -> IcResult {
    assert!(alpha > 0.0 && beta > 0.0, "combined weights must be positive");
    search_pairs(env, regime, (alpha, beta), budget, &[(s, t)], Exec::default())
        .pop()
        .expect("one pair in, one result out")
}

/// IC under any bias.
pub fn ic(env: &Environment, s: StateId, t: StateId, bias: ResourceBias, budget: SearchBudget) -> IcResult {
    ic_pairs(env, bias, budget, &[(s, t)], Exec::default())
        .pop()
        .expect("one pair in, one result out")
}

/// IC for a batch of pairs, sharing one enumeration.
pub fn ic_pairs(
    env: &Environment,
    bias: ResourceBias,
    budget: SearchBudget,
    pairs: &[(StateId, StateId)],
    exec: Exec,
) -> Vec<IcResult> {
    match (bias.objective(), bias.regime()) {
        (Some(objective), Some(regime)) => search_pairs(env, regime, objective, budget, pairs, exec),
        _ => pairs.iter().map(|&(s, t)| ic_action_count(env, s, t)).collect(),
    }
}

/// IC for every ordered pair.
pub fn ic_table(env: &Environment, bias: ResourceBias, budget: SearchBudget, exec: Exec) -> IcTable {
    if bias == ResourceBias::ActionCount {
        return ic_all_pairs_action_count(env, exec);
    }
    let pairs: Vec<_> = env.states().flat_map(|s| env.states().map(move |t| (s, t))).collect();
    IcTable {
        states: env.num_states(),
        entries: ic_pairs(env, bias, budget, &pairs, exec),
    }
}

/// IC values for all ordered pairs, row-major by source.
#[derive(Debug, Clone)]
pub struct IcTable {
    states: usize,
    entries: Vec<IcResult>,
}

impl IcTable {
    pub fn num_states(&self) -> usize {
        self.states
    }

    pub fn get(&self, s: StateId, t: StateId) -> &IcResult {
        &self.entries[s.0 * self.states + t.0]
    }

    pub fn cost(&self, s: StateId, t: StateId) -> Cost {
        self.get(s, t).cost
    }

    /// Costs as a dense matrix.
    pub fn costs(&self) -> Vec<Vec<Cost>> {
        self.entries
            .chunks(self.states)
            .map(|row| row.iter().map(|r| r.cost).collect())
            .collect()
    }

    pub fn all_exact(&self) -> bool {
        self.entries.iter().all(IcResult::is_exact)
    }
}

/// An IC table in which every reachable pair has a finite, realizable cost.
///
/// Pairs whose budgeted search found nothing, or found something dearer than
/// emitting a shortest path literally, fall back to the `EMIT … HALT` program
/// for a BFS path. Those entries stay marked `ExactUpToBudget`. Under
/// action-count bias this is just [`ic_table`].
pub fn reference_table(env: &Environment, bias: ResourceBias, budget: SearchBudget, exec: Exec) -> IcTable {
    let mut table = ic_table(env, bias, budget, exec);
    if bias == ResourceBias::ActionCount {
        return table;
    }
    let dims = env.dims();
    for s in env.states() {
        let tree = env.bfs(s);
        for t in env.states() {
            let entry = &mut table.entries[s.0 * table.states + t.0];
            if entry.is_exact() {
                continue;
            }
            if let Some(path) = tree.path_to(t) {
                let fallback = bias.action_sequence_cost(&path, dims);
                if fallback < entry.cost {
                    entry.cost = fallback;
                    entry.witness = Some(Witness::Program(Program::emit_sequence(&path, dims)));
                }
            }
        }
    }
    table
}

struct PairSearch {
    s: StateId,
    t: StateId,
    best: Option<(f64, Program)>,
    settled: bool,
    first_fault: Option<usize>,
}

/// Outcome of one program from one start: `Ok((end, output length))`.
type RunSummary = Result<(StateId, usize), Fault>;

/// Shared enumeration for a batch of pairs minimising `alpha·bits + beta·len`.
///
/// Strata are visited in increasing length; within a stratum programs are
/// executed in parallel and folded in lexicographic order, so the witness is
/// the first minimum in enumeration order. A pair is settled once
/// `alpha · L` for the next stratum `L` cannot beat its best cost. Pairs whose
/// target is unreachable are exactly infinite without search.
fn search_pairs(
    env: &Environment,
    regime: Regime,
    (alpha, beta): (f64, f64),
    budget: SearchBudget,
    pairs: &[(StateId, StateId)],
    exec: Exec,
) -> Vec<IcResult> {
    let reach: Vec<Vec<Option<usize>>> = env.distance_matrix(exec);
    let mut state: Vec<PairSearch> = pairs
        .iter()
        .map(|&(s, t)| PairSearch {
            s,
            t,
            best: None,
            settled: reach[s.0][t.0].is_none(),
            first_fault: None,
        })
        .collect();

    let enumerator = Enumerator::new(env.dims(), regime, budget.max_bits);
    for len in 2..=budget.max_bits {
        for p in state.iter_mut().filter(|p| !p.settled) {
            if let Some((best, _)) = &p.best {
                if alpha * len as f64 >= *best {
                    p.settled = true;
                }
            }
        }
        let mut starts: Vec<StateId> = state.iter().filter(|p| !p.settled).map(|p| p.s).collect();
        if starts.is_empty() {
            break;
        }
        starts.sort();
        starts.dedup();

        let programs = enumerator.stratum(len);
        let runs: Vec<Vec<RunSummary>> = par::map(exec, &programs, |prog| match regime {
            // Bare output does not depend on the start state.
            Regime::Bare => {
                let o = execute(prog, env, regime, starts[0], budget.step_budget);
                match o.result {
                    Ok(out) => starts
                        .iter()
                        .map(|&s| Ok((env.run(s, &out.actions), out.actions.len())))
                        .collect(),
                    Err(f) => vec![Err(f); starts.len()],
                }
            }
            Regime::Oracle => starts
                .iter()
                .map(|&s| {
                    execute(prog, env, regime, s, budget.step_budget)
                        .result
                        .map(|out| (out.end, out.actions.len()))
                })
                .collect(),
        });

        for p in state.iter_mut().filter(|p| !p.settled) {
            let col = starts.binary_search(&p.s).expect("start is active");
            for (prog, run) in programs.iter().zip(&runs) {
                match run[col] {
                    Ok((end, out_len)) if end == p.t => {
                        let cost = alpha * len as f64 + beta * out_len as f64;
                        if p.best.as_ref().is_none_or(|(b, _)| cost < *b) {
                            p.best = Some((cost, prog.clone()));
                        }
                    }
                    Err(Fault::StepBudgetExceeded) => {
                        p.first_fault.get_or_insert(len);
                    }
                    _ => {}
                }
            }
        }
    }

    state
        .into_iter()
        .map(|p| {
            if reach[p.s.0][p.t.0].is_none() {
                return IcResult::unreachable();
            }
            let budgeted = Exactness::ExactUpToBudget(budget);
            match p.best {
                None => IcResult {
                    cost: Cost::INFINITE,
                    witness: None,
                    exactness: budgeted,
                },
                Some((cost, prog)) => {
                    let complete = p.settled || alpha * (budget.max_bits + 1) as f64 >= cost;
                    let clean = p.first_fault.is_none_or(|l| alpha * l as f64 >= cost);
                    IcResult {
                        cost: Cost::finite(cost),
                        witness: Some(Witness::Program(prog)),
                        exactness: if complete && clean { Exactness::Exact } else { budgeted },
                    }
                }
            }
        })
        .collect()
}

/// Bare minus oracle program-length IC for one pair.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeCost {
    /// `∞ − finite = ∞`; `∞ − ∞` is reported as 0 with `undefined` set.
    pub value: Cost,
    pub undefined: bool,
    pub bare: IcResult,
    pub oracle: IcResult,
}

impl KnowledgeCost {
    pub fn is_exact(&self) -> bool {
        self.bare.is_exact() && self.oracle.is_exact()
    }
}

pub fn knowledge_cost(env: &Environment, s: StateId, t: StateId, budget: SearchBudget) -> KnowledgeCost {
    let bare = ic_program_length(env, s, t, Regime::Bare, budget);
    let oracle = ic_program_length(env, s, t, Regime::Oracle, budget);
    let gap = bare.cost.checked_gap(oracle.cost);
    KnowledgeCost {
        value: gap.unwrap_or(Cost::ZERO),
        undefined: gap.is_none(),
        bare,
        oracle,
    }
}

/// A strictly increasing map applied to IC to obtain a reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Monotone {
    Identity,
    Log1p,
}

impl Monotone {
    pub fn apply(self, ic: Cost) -> Cost {
        match (self, ic.as_finite()) {
            (_, None) => Cost::INFINITE,
            (Monotone::Identity, Some(v)) => Cost::finite(v),
            (Monotone::Log1p, Some(v)) => Cost::finite(v.ln_1p()),
        }
    }
}

/// `g(IC(s, t))`.
pub fn reward(
    env: &Environment,
    s: StateId,
    t: StateId,
    bias: ResourceBias,
    g: Monotone,
    budget: SearchBudget,
) -> Cost {
    g.apply(ic(env, s, t, bias, budget).cost)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriangleViolation {
    pub s: StateId,
    pub via: StateId,
    pub t: StateId,
    pub direct: Cost,
    pub composed: Cost,
    /// False when the direct cost is only a budgeted upper bound.
    pub conclusive: bool,
}

/// Metric-axiom checks over all ordered pairs and triples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuasimetricReport {
    pub env: String,
    pub bias: ResourceBias,
    pub slack: f64,
    pub triples_checked: usize,
    pub violations: Vec<TriangleViolation>,
    /// Largest `IC(s,t) − IC(s,u) − IC(u,t)` over checked triples.
    pub max_composition_excess: Option<f64>,
    /// Every diagonal entry equals the empty-intervention cost.
    pub identity_holds: bool,
    pub diagonal_cost: Cost,
    pub non_negative: bool,
    /// First pair in lexicographic order with `IC(s,t) ≠ IC(t,s)`.
    pub asymmetry_witness: Option<(StateId, StateId)>,
}

impl QuasimetricReport {
    pub fn is_quasimetric(&self) -> bool {
        self.violations.is_empty() && self.identity_holds && self.non_negative
    }
}

pub fn quasimetric_report(
    env: &Environment,
    bias: ResourceBias,
    slack: f64,
    budget: SearchBudget,
    exec: Exec,
) -> QuasimetricReport {
    let table = ic_table(env, bias, budget, exec);
    quasimetric_report_from_table(env, bias, slack, &table)
}

/// Same checks on a precomputed table.
pub fn quasimetric_report_from_table(
    env: &Environment,
    bias: ResourceBias,
    slack: f64,
    table: &IcTable,
) -> QuasimetricReport {
    let n = env.num_states();
    let c = table.costs();
    let mut triples = 0;
    let mut violations = Vec::new();
    let mut max_excess: Option<f64> = None;
    for s in 0..n {
        for u in 0..n {
            let Some(first) = c[s][u].as_finite() else { continue };
            for (t, (second, &direct)) in c[u].iter().zip(&c[s]).enumerate() {
                let Some(second) = second.as_finite() else { continue };
                triples += 1;
                let composed = first + second;
                let excess = direct.value() - composed;
                if direct.is_finite() {
                    max_excess = Some(max_excess.map_or(excess, |m: f64| m.max(excess)));
                }
                if direct.is_infinite() || excess > slack {
                    violations.push(TriangleViolation {
                        s: StateId(s),
                        via: StateId(u),
                        t: StateId(t),
                        direct,
                        composed: Cost::finite(composed),
                        conclusive: table.get(StateId(s), StateId(t)).is_exact(),
                    });
                }
            }
        }
    }
    let empty = bias.empty_cost();
    let identity_holds = (0..n).all(|s| c[s][s] == empty);
    let asymmetry_witness = (0..n)
        .flat_map(|s| (s + 1..n).map(move |t| (s, t)))
        .find(|&(s, t)| c[s][t] != c[t][s])
        .map(|(s, t)| (StateId(s), StateId(t)));
    QuasimetricReport {
        env: env.name().to_string(),
        bias,
        slack,
        triples_checked: triples,
        violations,
        max_composition_excess: max_excess,
        identity_holds,
        diagonal_cost: empty,
        non_negative: c.iter().flatten().all(|v| *v >= Cost::ZERO),
        asymmetry_witness,
    }
}
