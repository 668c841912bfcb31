//! Acceptance gate: one pass/fail line per criterion, non-zero exit on any
//! failure.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ic_core::agents::{Agent, OracleAgent, RandomAgent, TabularLearner};
use ic_core::cost::Cost;
use ic_core::engine::{
    ic_action_count, ic_all_pairs_action_count, ic_program_length, ic_table, knowledge_cost, quasimetric_report,
    ResourceBias, SearchBudget,
};
use ic_core::env::{ActionId, Environment, StateId};
use ic_core::eval::{CompetenceCurve, EvalConfig, Evaluator, Scheme};
use ic_core::generators::{cycle_env, gated_corridor, grid_env, random_bits, random_env, CorridorStates};
use ic_core::par::Exec;
use ic_core::vm::{execute, Instruction, Program, Regime, DEFAULT_STEP_BUDGET};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn log2_ceil(n: usize) -> usize {
    (usize::BITS - (n.max(2) - 1).leading_zeros()) as usize
}

/// Shortest action string of length at most `max_len` from `s` to `t`, found
/// by trying every string.
fn brute_force_distance(env: &Environment, s: StateId, t: StateId, max_len: usize) -> Option<usize> {
    let m = env.num_actions();
    for len in 0..=max_len {
        let total = m.pow(len as u32);
        for code in 0..total {
            let mut c = code;
            let mut cur = s;
            for _ in 0..len {
                cur = env.step(cur, ActionId(c % m));
                c /= m;
            }
            if cur == t {
                return Some(len);
            }
        }
    }
    None
}

fn small_random_env(seed: u64, max_n: usize, max_m: usize) -> Environment {
    let n = 1 + (seed as usize % max_n);
    let m = 1 + ((seed as usize / max_n) % max_m);
    random_env(n, m, seed).unwrap()
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let mut pairs = 0;
    for seed in 0..50 {
        let env = small_random_env(seed, 6, 3);
        let n = env.num_states();
        for s in env.states() {
            for t in env.states() {
                let bfs = ic_action_count(&env, s, t).cost;
                let brute = brute_force_distance(&env, s, t, n).map_or(Cost::INFINITE, Cost::from_count);
                if bfs != brute {
                    return outcome(false, format!("{}: IC({s},{t}) = {bfs}, brute force {brute}", env.name()));
                }
                pairs += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    outcome(
        elapsed < Duration::from_secs(5),
        format!("{pairs} pairs over 50 envs agree with brute force in {elapsed:.2?} (limit 5s)"),
    )
}

/// Random corridor strings of every length 1..=12 for 20 seeds.
fn corridor_strings() -> Vec<String> {
    (1..=12)
        .flat_map(|len| (0..20).map(move |seed| random_bits(len, seed * 100 + len as u64)))
        .collect()
}

fn criterion_2() -> Outcome {
    let strings = corridor_strings();
    for x in &strings {
        let env = gated_corridor(x).unwrap();
        let cs = CorridorStates { len: x.len() };
        let forward = ic_action_count(&env, cs.start(), cs.goal()).cost;
        let stuck = ic_action_count(&env, cs.fail(), cs.goal()).cost;
        if forward != Cost::from_count(x.len() + 1) || !stuck.is_infinite() {
            return outcome(false, format!("x = {x}: IC(s0,sf) = {forward}, IC(fail,sf) = {stuck}"));
        }
    }
    outcome(true, format!("{} corridors: IC(s0,sf) = |x|+1 and IC(fail,sf) = inf", strings.len()))
}

fn oracle_bound_envs() -> Vec<Environment> {
    (0..20).map(|seed| small_random_env(1000 + seed, 8, 3)).collect()
}

fn criterion_3() -> Outcome {
    let mut pairs = 0;
    let mut at_bound = 0;
    for env in oracle_bound_envs() {
        let bound = 4 + log2_ceil(env.num_states());
        let table = ic_table(
            &env,
            ResourceBias::program_length(Regime::Oracle),
            SearchBudget::new(bound, DEFAULT_STEP_BUDGET),
            Exec::default(),
        );
        let bfs = ic_all_pairs_action_count(&env, Exec::default());
        for s in env.states() {
            for t in env.states() {
                if bfs.cost(s, t).is_infinite() {
                    continue;
                }
                let c = table.cost(s, t);
                if c > Cost::from_count(bound) {
                    return outcome(false, format!("{}: oracle IC({s},{t}) = {c} > {bound}", env.name()));
                }
                if c == Cost::from_count(bound) {
                    at_bound += 1;
                }
                pairs += 1;
            }
        }
    }
    outcome(
        true,
        format!("{pairs} reachable pairs within 4 + ceil(log2 n) bits, {at_bound} exactly at the bound"),
    )
}

/// Output lengths of both regimes' canonical witnesses equal the BFS
/// distance, so the action-count gap between regimes is zero.
fn action_count_gap_is_zero(env: &Environment) -> Result<(), String> {
    let dims = env.dims();
    for s in env.states() {
        let tree = env.bfs(s);
        for t in env.states() {
            let Some(path) = tree.path_to(t) else { continue };
            let bare = Program::emit_sequence(&path, dims);
            let oracle = Program::from_instructions(&[Instruction::GotoTarget(t), Instruction::Halt], dims).unwrap();
            for (program, regime) in [(&bare, Regime::Bare), (&oracle, Regime::Oracle)] {
                let out = execute(program, env, regime, s, DEFAULT_STEP_BUDGET)
                    .result
                    .map_err(|f| format!("{regime} witness faulted: {f}"))?;
                if out.end != t || out.actions.len() != path.len() {
                    return Err(format!("{regime} witness for ({s},{t}) has output length {}", out.actions.len()));
                }
            }
        }
    }
    Ok(())
}

fn criterion_4() -> Outcome {
    let mut instances = 0;
    let mut check = |env: &Environment, budget: SearchBudget, all_pairs: bool| -> Result<(), String> {
        let bare = ic_table(env, ResourceBias::program_length(Regime::Bare), budget, Exec::default());
        let oracle = ic_table(env, ResourceBias::program_length(Regime::Oracle), budget, Exec::default());
        let pairs: Vec<(StateId, StateId)> = if all_pairs {
            env.states().flat_map(|s| env.states().map(move |t| (s, t))).collect()
        } else {
            let cs = CorridorStates { len: env.num_states() - 3 };
            vec![(cs.start(), cs.goal()), (cs.fail(), cs.goal())]
        };
        for (s, t) in pairs {
            let (b, o) = (bare.cost(s, t), oracle.cost(s, t));
            if o > b {
                return Err(format!("{}: oracle {o} > bare {b} at ({s},{t})", env.name()));
            }
            let k = knowledge_cost(env, s, t, budget);
            // a bare cost below the oracle cost would surface as an
            // undefined gap between finite values
            if k.undefined && k.bare.cost.is_finite() {
                return Err(format!("{}: negative knowledge cost at ({s},{t})", env.name()));
            }
            instances += 1;
        }
        action_count_gap_is_zero(env)
    };
    for x in corridor_strings() {
        let budget = SearchBudget::new(18, DEFAULT_STEP_BUDGET);
        let env = gated_corridor(&x).unwrap();
        if let Err(e) = check(&env, budget, x.len() <= 6) {
            return outcome(false, e);
        }
    }
    for env in oracle_bound_envs() {
        let budget = SearchBudget::new(4 + log2_ceil(env.num_states()), DEFAULT_STEP_BUDGET);
        if let Err(e) = check(&env, budget, true) {
            return outcome(false, e);
        }
    }
    outcome(
        true,
        format!("{instances} instances: oracle <= bare, knowledge cost >= 0, action-count regime gap 0"),
    )
}

fn criterion_5() -> Outcome {
    let started = Instant::now();
    let mut notes = Vec::new();
    let mut pass = true;
    for n in [6usize, 8, 10] {
        let budget = SearchBudget::new(2 * n + 8, DEFAULT_STEP_BUDGET);
        let cs = CorridorStates { len: n };
        let bare = |x: &str| ic_program_length(&gated_corridor(x).unwrap(), cs.start(), cs.goal(), Regime::Bare, budget);
        let zeros = bare(&"0".repeat(n));
        let mut random: Vec<Cost> = (0..10).map(|seed| bare(&random_bits(n, 5000 + seed)).cost).collect();
        random.sort();
        // lower median of ten
        let median = random[4];
        // REPEAT (n+1) [EMIT 0] HALT costs 9 + 2 floor(log2 n) bits
        let log_bound = 9.0 + 2.0 * (n as f64).log2();
        let linear_floor = Cost::finite(1.5 * n as f64);
        let budgeted = random.iter().filter(|c| c.is_infinite()).count();
        let ok = median > zeros.cost
            && zeros.cost.value() <= log_bound
            && random.iter().all(|&c| c >= linear_floor);
        pass &= ok;
        notes.push(format!(
            "n={n}: zeros {} (bound {log_bound:.1}), random median {median} min {} ({budgeted}/10 beyond {} bits)",
            zeros.cost, random[0], budget.max_bits
        ));
    }
    let elapsed = started.elapsed();
    pass &= elapsed < Duration::from_secs(120);
    outcome(pass, format!("{} ({elapsed:.1?}, limit 2 min)", notes.join("; ")))
}

fn criterion_6() -> Outcome {
    let mut triples = 0;
    for seed in 0..100 {
        let env = small_random_env(2000 + seed, 8, 3);
        let r = quasimetric_report(&env, ResourceBias::ActionCount, 0.0, SearchBudget::default(), Exec::default());
        if !r.violations.is_empty() || !r.identity_holds || r.diagonal_cost != Cost::ZERO || !r.non_negative {
            return outcome(false, format!("{}: {:?}", env.name(), r.violations.first()));
        }
        triples += r.triples_checked;
    }
    let strings = corridor_strings();
    for x in &strings {
        let env = gated_corridor(x).unwrap();
        let r = quasimetric_report(&env, ResourceBias::ActionCount, 0.0, SearchBudget::default(), Exec::default());
        if r.asymmetry_witness.is_none() || !r.is_quasimetric() {
            return outcome(false, format!("corridor {x}: no asymmetry witness or axioms fail"));
        }
    }
    outcome(
        true,
        format!("{triples} triples, 0 violations; asymmetry witness in all {} corridors", strings.len()),
    )
}

fn agent_test_envs() -> Vec<Environment> {
    let mut envs: Vec<Environment> = (0..6)
        .map(|i| random_env(3 + i % 8, 1 + i % 3, 3000 + i as u64).unwrap())
        .collect();
    envs.push(grid_env(3, 3).unwrap());
    envs.push(gated_corridor("1011").unwrap());
    envs.push(cycle_env(5).unwrap());
    envs.push(grid_env(2, 3).unwrap());
    envs
}

fn criterion_7() -> Outcome {
    let mut tasks = 0;
    for env in agent_test_envs() {
        let shared = Arc::new(env.clone());
        let ev = Evaluator::new(&env, ResourceBias::ActionCount, SearchBudget::default(), Exec::default());
        let oracle = OracleAgent::new(shared.clone(), ResourceBias::ActionCount, SearchBudget::default(), 1);
        for task in ev.reachable_tasks() {
            let cost = ev.shadow(&oracle, task).cost;
            if cost != ev.ic(task) {
                return outcome(false, format!("{}: oracle cost {cost} != IC {} on {task}", env.name(), ev.ic(task)));
            }
        }
        for scheme in [Scheme::A, Scheme::B, Scheme::C] {
            let mut agent = OracleAgent::new(shared.clone(), ResourceBias::ActionCount, SearchBudget::default(), 7);
            let config = EvalConfig::new(scheme, 50, ResourceBias::ActionCount).with_seed(11);
            let trace = ev.run_regret(&mut agent, &config);
            if let Some(r) = trace.records.iter().find(|r| r.delta != Cost::ZERO) {
                return outcome(false, format!("{} scheme {scheme}: delta {} at t={}", env.name(), r.delta, r.t));
            }
            tasks += trace.records.len();
        }
    }
    outcome(true, format!("10 envs: cost = IC on every reachable task; {tasks} scheme A/B/C tasks with delta 0"))
}

fn criterion_8() -> Outcome {
    let mut covered = 0;
    let mut zero_gap = 0;
    let envs = 20;
    for seed in 0..envs {
        let n = 2 + (seed as usize % 9);
        let m = 1 + (seed as usize / 9) % 3;
        let env = random_env(n, m, 4000 + seed).unwrap();
        let ev = Evaluator::new(&env, ResourceBias::ActionCount, SearchBudget::default(), Exec::default());
        let mut agent = TabularLearner::new(env.dims(), seed);
        let config = EvalConfig::new(Scheme::B, 200, ResourceBias::ActionCount).with_seed(seed);
        let trace = ev.run_regret(&mut agent, &config);
        let gap = ev.generalization_gap(&agent);
        if gap == 0.0 {
            zero_gap += 1;
        }
        if let Some(tau) = trace.coverage_time() {
            covered += 1;
            let settled = trace.records[tau - 1].cumulative;
            let after = &trace.records[tau..];
            if let Some(r) = after.iter().find(|r| r.delta != Cost::ZERO || r.cumulative != settled) {
                return outcome(false, format!("{}: delta {} at t={} after coverage at {tau}", env.name(), r.delta, r.t));
            }
            if gap != 0.0 {
                return outcome(false, format!("{}: G_T = {gap} after coverage", env.name()));
            }
        }
    }
    outcome(
        covered > 0,
        format!(
            "coverage reached on {covered}/{envs} envs, after which delta = 0, G_T = 0 and regret is flat; \
             G_T = 0 at T = 200 on {zero_gap}/{envs}"
        ),
    )
}

/// Adaptive Simpson on `[a, b]`.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        eps: f64,
        whole: f64,
        m: f64,
        fm: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * eps {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, eps / 2.0, left, lm, flm, depth - 1)
            + recurse(f, m, fm, b, fb, eps / 2.0, right, rm, frm, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, eps, whole, m, fm, 60)
}

fn criterion_9() -> Outcome {
    let env = cycle_env(3).unwrap();
    let oracle = OracleAgent::new(Arc::new(env.clone()), ResourceBias::ActionCount, SearchBudget::default(), 0);
    let ev = Evaluator::new(&env, ResourceBias::ActionCount, SearchBudget::default(), Exec::default());
    let curve = ev.competence_curve(&oracle);
    if curve.breakpoints() != [(1.0, 1.0), (2.0, 1.5)] {
        return outcome(false, format!("3-cycle oracle curve {:?}", curve.breakpoints()));
    }
    let ln2 = std::f64::consts::LN_2;
    let piecewise = 1.0 * (0.5 - 0.25) / ln2 + 1.5 * 0.25 / ln2;
    if (curve.scalar() - piecewise).abs() > 1e-12 {
        return outcome(false, format!("scalar {} vs piecewise {piecewise}", curve.scalar()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let steps = rng.gen_range(1..8);
        let mut k = 0.0;
        let mut bp = Vec::new();
        for _ in 0..steps {
            k += rng.gen_range(0.1..4.0);
            bp.push(((k * 8.0f64).round() / 8.0, rng.gen_range(0.0..10.0)));
        }
        bp.dedup_by(|a, b| a.0 == b.0);
        let curve = CompetenceCurve::new(bp).unwrap();
        let last = curve.breakpoints().last().unwrap().0;
        let f = |x: f64| (-x).exp2() * curve.value(x);
        // the tail beyond last + 60 weighs less than 2^-60 times the last value
        let numeric = adaptive_simpson(&f, 0.0, last + 60.0, 1e-12);
        worst = worst.max((numeric - curve.scalar()).abs());
    }
    outcome(
        worst <= 1e-9,
        format!("3-cycle oracle curve (1,1.0),(2,1.5), scalar exact; 20 random curves max quadrature gap {worst:.1e}"),
    )
}

fn criterion_10() -> Outcome {
    let mut comparisons = 0;
    for seed in 0..20u64 {
        let env = small_random_env(5000 + seed, 8, 3);
        let shared = Arc::new(env.clone());
        let ev = Evaluator::new(&env, ResourceBias::ActionCount, SearchBudget::default(), Exec::default());
        let oracle = ev.competence_curve(&OracleAgent::new(shared, ResourceBias::ActionCount, SearchBudget::default(), 0));
        let mut agents: Vec<Box<dyn Agent>> = vec![Box::new(RandomAgent::new(env.dims(), seed))];
        for warmup in [0usize, 3, 10, 40] {
            let mut learner = TabularLearner::new(env.dims(), seed);
            if warmup > 0 {
                let config = EvalConfig::new(Scheme::C, warmup, ResourceBias::ActionCount).with_seed(seed);
                ev.run_regret(&mut learner, &config);
            }
            agents.push(Box::new(learner));
        }
        for agent in &agents {
            let curve = ev.competence_curve(agent.as_ref());
            let levels = oracle.breakpoints().iter().chain(curve.breakpoints()).map(|&(k, _)| k);
            for k in levels {
                if curve.value(k) > oracle.value(k) {
                    return outcome(
                        false,
                        format!("{} {}: gamma({k}) = {} > oracle {}", env.name(), agent.name(), curve.value(k), oracle.value(k)),
                    );
                }
                comparisons += 1;
            }
        }
    }
    outcome(true, format!("{comparisons} level comparisons on 20 envs, agent curve <= oracle curve"))
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("BFS exactness against brute force", criterion_1),
        ("gated corridor action-count identity", criterion_2),
        ("oracle program-length bound", criterion_3),
        ("oracle <= bare, knowledge cost >= 0", criterion_4),
        ("corridor cost tracks the string's regularity", criterion_5),
        ("quasimetric suite", criterion_6),
        ("oracle agent optimality and zero regret", criterion_7),
        ("tabular learner convergence", criterion_8),
        ("competence curve and scalar consistency", criterion_9),
        ("oracle curve ceiling", criterion_10),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let result = run();
        let status = if result.pass { "PASS" } else { "FAIL" };
        if !result.pass {
            failures += 1;
        }
        println!(
            "criterion {:>2} {status}: {name}: {} [{:.2?}]",
            i + 1,
            result.detail,
            started.elapsed()
        );
    }
    println!("acceptance: {}/10 criteria passed", 10 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
