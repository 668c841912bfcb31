use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use ic_core::agents::{make_agent, Agent};
use ic_core::engine::{
    ic_table, knowledge_cost, quasimetric_report_from_table, IcRecord, ResourceBias, SearchBudget,
    DEFAULT_PROGRAM_SLACK,
};
use ic_core::env::{Dims, Environment, StateId};
use ic_core::eval::{
    learning_efficiency, CompetenceCurve, Ensemble, EvalConfig, Evaluator, Scheme, PROXY_DISCLOSURE,
    PROXY_TEMPERATURE,
};
use ic_core::generators::{self, complexity_proxy, random_bits};
use ic_core::par::Exec;
use ic_core::vm::{Bits, Program, Regime};

use crate::{
    BiasArgs, BiasKind, CorridorDemoArgs, CurveArgs, CycleEnvArgs, DisasmArgs, EfficiencyArgs, GatedCorridorArgs,
    GridEnvArgs, IcArgs, InfoArgs, QuasimetricArgs, RandomEnvArgs, RegimeArg, RegretArgs, SchemeArg,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Domain(String),
    #[error("{0}")]
    Budget(String),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Parse(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Budget(_) => 4,
        }
    }
}

fn io_err(path: impl AsRef<Path>) -> impl FnOnce(io::Error) -> CliError {
    let path = path.as_ref().display().to_string();
    move |source| CliError::Io { path, source }
}

pub fn configure_jobs(jobs: Option<usize>) -> Result<Exec, CliError> {
    match jobs {
        Some(0) => Err(CliError::Domain("--jobs must be at least 1".into())),
        Some(1) => Ok(Exec::Sequential),
        Some(n) => {
            // a second call only fails if a pool already exists, which is fine
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            Ok(Exec::Parallel)
        }
        None => Ok(Exec::default()),
    }
}

fn load_env(path: &Path) -> Result<Environment, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Environment::parse(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

/// Every `*.env` file in `dir`, in file-name order.
fn load_ensemble_dir(dir: &Path) -> Result<Vec<Environment>, CliError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "env"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Domain(format!("{}: no .env files", dir.display())));
    }
    paths.iter().map(|p| load_env(p)).collect()
}

fn state(env: &Environment, index: usize, flag: &str) -> Result<StateId, CliError> {
    if index < env.num_states() {
        Ok(StateId(index))
    } else {
        Err(CliError::Domain(format!(
            "{flag} {index} is out of range for `{}` with {} states",
            env.name(),
            env.num_states()
        )))
    }
}

fn resolve_bias(args: &BiasArgs) -> Result<(ResourceBias, SearchBudget), CliError> {
    if args.max_bits < 2 {
        return Err(CliError::Domain("--max-bits must be at least 2".into()));
    }
    if args.step_budget < 1 {
        return Err(CliError::Domain("--step-budget must be at least 1".into()));
    }
    let regime = match args.regime {
        RegimeArg::Bare => Regime::Bare,
        RegimeArg::Oracle => Regime::Oracle,
    };
    let bias = match args.bias {
        BiasKind::Action => ResourceBias::ActionCount,
        BiasKind::Pl => ResourceBias::program_length(regime),
        BiasKind::Comb => {
            let ok = |v: f64| v > 0.0 && v.is_finite();
            if !ok(args.alpha) || !ok(args.beta) {
                return Err(CliError::Domain("--alpha and --beta must be positive".into()));
            }
            ResourceBias::combined(args.alpha, args.beta, regime)
        }
    };
    Ok((bias, SearchBudget::new(args.max_bits, args.step_budget)))
}

fn scheme(arg: SchemeArg) -> Scheme {
    match arg {
        SchemeArg::A => Scheme::A,
        SchemeArg::B => Scheme::B,
        SchemeArg::C => Scheme::C,
    }
}

fn check_discount(discount: f64) -> Result<(), CliError> {
    if discount > 0.0 && discount < 1.0 {
        Ok(())
    } else {
        Err(CliError::Domain(format!("--discount {discount} must lie in (0, 1)")))
    }
}

/// Writes to `path`, or to stdout when absent.
fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(io_err(p)),
        None => io::stdout().write_all(bytes).map_err(io_err("<stdout>")),
    }
}

fn json_line<T: Serialize>(value: &T) -> Vec<u8> {
    let mut line = serde_json::to_vec(value).expect("report serializes");
    line.push(b'\n');
    line
}

fn agent_for(
    name: &str,
    env: &Arc<Environment>,
    bias: ResourceBias,
    budget: SearchBudget,
    seed: u64,
) -> Result<Box<dyn Agent>, CliError> {
    make_agent(name, env, bias, budget, seed).map_err(|e| CliError::Domain(e.to_string()))
}

pub fn ic(a: IcArgs, exec: Exec) -> Result<(), CliError> {
    let env = load_env(&a.env)?;
    let (bias, budget) = resolve_bias(&a.bias)?;
    let pairs: Vec<(StateId, StateId)> = match (a.from, a.to) {
        (Some(s), Some(t)) => vec![(state(&env, s, "--from")?, state(&env, t, "--to")?)],
        _ => env.states().flat_map(|s| env.states().map(move |t| (s, t))).collect(),
    };
    let results = ic_core::engine::ic_pairs(&env, bias, budget, &pairs, exec);
    let mut out = Vec::new();
    for (&(s, t), r) in pairs.iter().zip(&results) {
        out.extend(json_line(&IcRecord::new(&env, s, t, bias, r)));
    }
    emit(a.out.as_deref(), &out)?;
    if a.strict {
        if let Some(((s, t), _)) = pairs.iter().zip(&results).find(|(_, r)| !r.is_exact()) {
            return Err(CliError::Budget(format!(
                "IC({s}, {t}) is only exact up to the budget (max_bits {}, step_budget {})",
                budget.max_bits, budget.step_budget
            )));
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct CurveReport<'a> {
    agent: &'a str,
    bias: ResourceBias,
    envs: Vec<CurveMember>,
    curve: Vec<(f64, f64)>,
    scalar: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    proxy: Option<&'static str>,
}

#[derive(Serialize)]
struct CurveMember {
    env: String,
    weight: f64,
    scalar: f64,
}

pub fn curve(a: CurveArgs, exec: Exec) -> Result<(), CliError> {
    let (bias, budget) = resolve_bias(&a.bias)?;
    let (envs, from_dir) = match (&a.env, &a.ensemble_dir) {
        (Some(path), _) => (vec![load_env(path)?], false),
        (None, Some(dir)) => (load_ensemble_dir(dir)?, true),
        (None, None) => unreachable!("clap requires one of --env and --ensemble-dir"),
    };
    let ensemble = Ensemble::from_envs(envs, PROXY_TEMPERATURE);
    let mut members = Vec::new();
    let mut parts = Vec::new();
    for m in ensemble.members() {
        let ev = Evaluator::new(&m.env, bias, budget, exec);
        let mut agent = agent_for(&a.agent, &m.env, bias, budget, a.seed)?;
        if a.warmup > 0 {
            let config = EvalConfig::new(Scheme::C, a.warmup, bias).with_seed(a.seed);
            ev.run_regret(agent.as_mut(), &config);
        }
        let curve = ev.competence_curve(agent.as_ref());
        members.push(CurveMember {
            env: m.env.name().to_string(),
            weight: m.weight,
            scalar: curve.scalar(),
        });
        parts.push((m.weight, curve));
    }
    let refs: Vec<(f64, &CompetenceCurve)> = parts.iter().map(|(w, c)| (*w, c)).collect();
    let combined = CompetenceCurve::weighted_sum(&refs);
    let report = CurveReport {
        agent: &a.agent,
        bias,
        envs: members,
        curve: combined.breakpoints().to_vec(),
        scalar: combined.scalar(),
        proxy: from_dir.then_some(PROXY_DISCLOSURE),
    };
    match &a.out {
        Some(prefix) => {
            let mut csv = Vec::new();
            combined.write_csv(&mut csv).map_err(io_err(prefix))?;
            emit(Some(&with_suffix(prefix, "csv")), &csv)?;
            emit(Some(&with_suffix(prefix, "json")), &json_line(&report))
        }
        None => emit(None, &json_line(&report)),
    }
}

fn with_suffix(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn regret(a: RegretArgs, exec: Exec) -> Result<(), CliError> {
    check_discount(a.discount)?;
    if a.horizon == 0 {
        return Err(CliError::Domain("--horizon must be at least 1".into()));
    }
    let env = Arc::new(load_env(&a.env)?);
    let (bias, budget) = resolve_bias(&a.bias)?;
    let mut agent = agent_for(&a.agent, &env, bias, budget, a.seed)?;
    let config = EvalConfig::new(scheme(a.scheme), a.horizon, bias)
        .with_seed(a.seed)
        .with_discount(a.discount);
    let trace = Evaluator::new(&env, bias, budget, exec).run_regret(agent.as_mut(), &config);
    let mut csv = Vec::new();
    trace.write_csv(&mut csv).map_err(io_err("<csv>"))?;
    emit(a.out.as_deref(), &csv)
}

pub fn efficiency(a: EfficiencyArgs, exec: Exec) -> Result<(), CliError> {
    check_discount(a.discount)?;
    if a.horizon == 0 {
        return Err(CliError::Domain("--horizon must be at least 1".into()));
    }
    let (bias, budget) = resolve_bias(&a.bias)?;
    let envs = match (&a.env, &a.ensemble_dir) {
        (Some(path), _) => vec![load_env(path)?],
        (None, Some(dir)) => load_ensemble_dir(dir)?,
        (None, None) => unreachable!("clap requires one of --env and --ensemble-dir"),
    };
    // fail on an unknown agent before any work starts
    agent_for(&a.agent, &Arc::new(envs[0].clone()), ResourceBias::ActionCount, budget, a.seed)?;
    let ensemble = Ensemble::from_envs(envs, PROXY_TEMPERATURE);
    let config = EvalConfig::new(scheme(a.scheme), a.horizon, bias)
        .with_seed(a.seed)
        .with_discount(a.discount);
    let name = a.agent.clone();
    let report = learning_efficiency(
        |env| make_agent(&name, env, bias, budget, a.seed).expect("agent name checked above"),
        &ensemble,
        &config,
        budget,
        exec,
    );
    emit(a.out.as_deref(), &json_line(&report))
}

pub fn corridor_demo(a: CorridorDemoArgs, exec: Exec) -> Result<(), CliError> {
    if a.n_list.contains(&0) {
        return Err(CliError::Domain("corridor lengths must be at least 1".into()));
    }
    let mut rows: Vec<(usize, &str, String)> = Vec::new();
    for &n in &a.n_list {
        rows.push((n, "zeros", "0".repeat(n)));
        for i in 0..a.seeds {
            let seed = a.seed.wrapping_mul(1_000_003).wrapping_add((n as u64) << 32 | i);
            rows.push((n, "random", random_bits(n, seed)));
        }
    }
    let results = ic_core::par::map(exec, &rows, |(n, _, x)| {
        let env = generators::gated_corridor(x).expect("binary string");
        let cs = generators::CorridorStates { len: *n };
        let max_bits = a.max_bits.unwrap_or(2 * n + 8);
        knowledge_cost(&env, cs.start(), cs.goal(), SearchBudget::new(max_bits, a.step_budget))
    });
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = ["n", "x_kind", "x", "bare_bits", "oracle_bits", "knowledge_cost", "exactness"];
    w.write_record(header).map_err(|e| CliError::Domain(e.to_string()))?;
    for ((n, kind, x), k) in rows.iter().zip(&results) {
        let exactness = if k.is_exact() { "Exact" } else { "ExactUpToBudget" };
        let record = [
            n.to_string(),
            kind.to_string(),
            x.clone(),
            k.bare.cost.to_string(),
            k.oracle.cost.to_string(),
            k.value.to_string(),
            exactness.to_string(),
        ];
        w.write_record(&record).map_err(|e| CliError::Domain(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Domain(e.to_string()))?;
    emit(a.out.as_deref(), &bytes)
}

fn domain(e: impl std::fmt::Display) -> CliError {
    CliError::Domain(e.to_string())
}

pub fn gated_corridor(a: GatedCorridorArgs) -> Result<(), CliError> {
    let env = generators::gated_corridor(&a.x).map_err(domain)?;
    emit(a.out.as_deref(), env.to_text().as_bytes())
}

pub fn random_env(a: RandomEnvArgs) -> Result<(), CliError> {
    let env = generators::random_env(a.n, a.m, a.seed).map_err(domain)?;
    emit(a.out.as_deref(), env.to_text().as_bytes())
}

pub fn cycle_env(a: CycleEnvArgs) -> Result<(), CliError> {
    let env = generators::cycle_env(a.n).map_err(domain)?;
    emit(a.out.as_deref(), env.to_text().as_bytes())
}

pub fn grid_env(a: GridEnvArgs) -> Result<(), CliError> {
    let env = generators::grid_env(a.w, a.h).map_err(domain)?;
    emit(a.out.as_deref(), env.to_text().as_bytes())
}

pub fn disasm(a: DisasmArgs) -> Result<(), CliError> {
    let dims = match &a.env {
        Some(path) => load_env(path)?.dims(),
        None if a.states >= 1 && a.actions >= 1 => Dims {
            states: a.states,
            actions: a.actions,
        },
        None => return Err(CliError::Domain("--states and --actions must be at least 1".into())),
    };
    let bits: Bits = a.program.parse().map_err(|e| CliError::Parse(format!("{e}")))?;
    let program = Program::decode(bits, dims).map_err(|e| CliError::Parse(e.to_string()))?;
    let text = format!("; {} bits\n{}", program.len_bits(), program.disassemble());
    emit(None, text.as_bytes())
}

pub fn quasimetric(a: QuasimetricArgs, exec: Exec) -> Result<(), CliError> {
    let env = load_env(&a.env)?;
    let (bias, budget) = resolve_bias(&a.bias)?;
    let slack = a.slack.unwrap_or(match bias {
        ResourceBias::ActionCount => 0.0,
        _ => DEFAULT_PROGRAM_SLACK,
    });
    if !(slack >= 0.0 && slack.is_finite()) {
        return Err(CliError::Domain("--slack must be a non-negative number".into()));
    }
    let table = ic_table(&env, bias, budget, exec);
    let report = quasimetric_report_from_table(&env, bias, slack, &table);
    emit(a.out.as_deref(), &json_line(&report))
}

#[derive(Serialize)]
struct Info<'a> {
    env: &'a str,
    states: usize,
    actions: usize,
    diameter: usize,
    reachable_pairs: usize,
    strongly_connected: bool,
    proxy_bits: u64,
}

pub fn info(a: InfoArgs) -> Result<(), CliError> {
    let env = load_env(&a.env)?;
    let dist = env.distance_matrix(Exec::Sequential);
    let reachable = dist.iter().flatten().filter(|d| d.is_some()).count();
    let report = Info {
        env: env.name(),
        states: env.num_states(),
        actions: env.num_actions(),
        diameter: env.diameter(),
        reachable_pairs: reachable,
        strongly_connected: reachable == env.num_states() * env.num_states(),
        proxy_bits: complexity_proxy(&env),
    };
    emit(None, &json_line(&report))
}
