//! Finite deterministic environments and their state graphs.
//!
//! States and actions are dense indices; the transition function is a flat
//! `n × m` table, row-major by state. The text format is line based:
//!
//! ```text
//! env c3
//! states 3
//! actions 1
//! t 0 0 1
//! t 1 0 2
//! t 2 0 0
//! ```
//!
//! `#` starts a comment anywhere on a line. Transition lines may come in any
//! order but every `(state, action)` pair must appear exactly once.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::par::{self, Exec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct StateId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct ActionId(pub usize);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An ordered list of actions; may be empty.
pub type ActionSeq = Vec<ActionId>;

/// One observed step `(s, a, s')`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Transition {
    pub from: StateId,
    pub action: ActionId,
    pub to: StateId,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("line {line}: malformed line: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("missing transition for state {state}, action {action}")]
    MissingTransition { state: usize, action: usize },
    #[error("line {line}: duplicate transition for state {state}, action {action}")]
    DuplicateTransition { line: usize, state: usize, action: usize },
    #[error("line {line}: {what} index {index} out of range (must be < {bound})")]
    IndexOutOfRange {
        line: usize,
        what: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("invalid environment: {0}")]
    Invalid(String),
}

/// A finite deterministic transition system `(S, A, T)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Environment {
    name: String,
    states: usize,
    actions: usize,
    table: Vec<usize>,
}

impl Environment {
    /// Builds an environment from a row-major transition table.
    pub fn new(
        name: impl Into<String>,
        states: usize,
        actions: usize,
        table: Vec<usize>,
    ) -> Result<Self, EnvError> {
        let name = name.into();
        validate_name(&name).map_err(EnvError::Invalid)?;
        if states == 0 || actions == 0 {
            return Err(EnvError::Invalid(format!(
                "need at least one state and one action, got {states} states and {actions} actions"
            )));
        }
        if table.len() != states * actions {
            return Err(EnvError::Invalid(format!(
                "table has {} entries, expected {}",
                table.len(),
                states * actions
            )));
        }
        if let Some(&bad) = table.iter().find(|&&t| t >= states) {
            return Err(EnvError::Invalid(format!("target state {bad} out of range")));
        }
        Ok(Environment {
            name,
            states,
            actions,
            table,
        })
    }

    /// Builds an environment from a transition closure.
    pub fn from_fn(
        name: impl Into<String>,
        states: usize,
        actions: usize,
        f: impl Fn(usize, usize) -> usize,
    ) -> Result<Self, EnvError> {
        let table = (0..states)
            .flat_map(|s| (0..actions).map(move |a| (s, a)))
            .map(|(s, a)| f(s, a))
            .collect();
        Environment::new(name, states, actions, table)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_states(&self) -> usize {
        self.states
    }

    pub fn num_actions(&self) -> usize {
        self.actions
    }

    pub fn dims(&self) -> Dims {
        Dims {
            states: self.states,
            actions: self.actions,
        }
    }

    /// Row-major transition table.
    pub fn table(&self) -> &[usize] {
        &self.table
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        (0..self.states).map(StateId)
    }

    pub fn actions(&self) -> impl Iterator<Item = ActionId> {
        (0..self.actions).map(ActionId)
    }

    #[inline]
    pub fn step(&self, s: StateId, a: ActionId) -> StateId {
        StateId(self.table[s.0 * self.actions + a.0])
    }

    /// Final state after applying `actions` from `start`.
    pub fn run(&self, start: StateId, actions: &[ActionId]) -> StateId {
        actions.iter().fold(start, |s, &a| self.step(s, a))
    }

    /// The transitions visited when applying `actions` from `start`.
    pub fn trace(&self, start: StateId, actions: &[ActionId]) -> Vec<Transition> {
        let mut s = start;
        actions
            .iter()
            .map(|&a| {
                let to = self.step(s, a);
                let t = Transition { from: s, action: a, to };
                s = to;
                t
            })
            .collect()
    }

    pub fn contains(&self, s: StateId) -> bool {
        s.0 < self.states
    }

    /// BFS from `start`: distance and parent link for every state.
    ///
    /// Actions are expanded in ascending order, so the recovered paths are
    /// deterministic.
    pub fn bfs(&self, start: StateId) -> BfsTree {
        let mut dist = vec![None; self.states];
        let mut parent = vec![None; self.states];
        let mut queue = VecDeque::with_capacity(self.states);
        dist[start.0] = Some(0);
        queue.push_back(start.0);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or(0);
            for a in 0..self.actions {
                let v = self.table[u * self.actions + a];
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    parent[v] = Some((u, a));
                    queue.push_back(v);
                }
            }
        }
        BfsTree {
            start,
            dist,
            parent,
        }
    }

    /// States with a finite action path from `s`; always contains `s`.
    pub fn reachable_set(&self, s: StateId) -> BTreeSet<StateId> {
        self.bfs(s)
            .dist
            .iter()
            .enumerate()
            .filter(|(_, d)| d.is_some())
            .map(|(i, _)| StateId(i))
            .collect()
    }

    /// A shortest action sequence from `s` to `t`, if `t` is reachable.
    pub fn shortest_path(&self, s: StateId, t: StateId) -> Option<ActionSeq> {
        self.bfs(s).path_to(t)
    }

    /// All-pairs BFS distances, row `s` holding distances from `s`.
    pub fn distance_matrix(&self, exec: Exec) -> Vec<Vec<Option<usize>>> {
        par::map_range(exec, self.states, |s| self.bfs(StateId(s)).dist)
    }

    /// Largest finite BFS distance over all reachable pairs.
    pub fn diameter(&self) -> usize {
        self.distance_matrix(Exec::default())
            .iter()
            .flat_map(|row| row.iter().flatten().copied())
            .max()
            .unwrap_or(0)
    }

    /// Canonical text form: header then transitions sorted by `(s, a)`.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "env {}\nstates {}\nactions {}\n",
            self.name, self.states, self.actions
        );
        for s in 0..self.states {
            for a in 0..self.actions {
                out.push_str(&format!("t {s} {a} {}\n", self.table[s * self.actions + a]));
            }
        }
        out
    }

    /// Parses the line format described in the module docs.
    pub fn parse(text: &str) -> Result<Environment, EnvError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, raw)| (i + 1, raw.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        let mut header = |keyword: &str| -> Result<(usize, String), EnvError> {
            let (line, content) = lines.next().ok_or_else(|| EnvError::MalformedLine {
                line: text.lines().count() + 1,
                reason: format!("unexpected end of input, expected `{keyword}`"),
            })?;
            let mut parts = content.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some(k), Some(v), None) if k == keyword => Ok((line, v.to_string())),
                _ => Err(EnvError::MalformedLine {
                    line,
                    reason: format!("expected `{keyword} <value>`, found `{content}`"),
                }),
            }
        };

        let (_, name) = header("env")?;
        let (n_line, n_text) = header("states")?;
        let (m_line, m_text) = header("actions")?;
        let n = parse_count(n_line, &n_text, "state count")?;
        let m = parse_count(m_line, &m_text, "action count")?;

        let mut table: Vec<Option<usize>> = vec![None; n * m];
        for (line, content) in lines {
            let fields: Vec<&str> = content.split_whitespace().collect();
            if fields.len() != 4 || fields[0] != "t" {
                return Err(EnvError::MalformedLine {
                    line,
                    reason: format!("expected `t <s> <a> <s'>`, found `{content}`"),
                });
            }
            let s = parse_index(line, fields[1])?;
            let a = parse_index(line, fields[2])?;
            let t = parse_index(line, fields[3])?;
            check_range(line, "state", s, n)?;
            check_range(line, "action", a, m)?;
            check_range(line, "target state", t, n)?;
            let slot = &mut table[s * m + a];
            if slot.is_some() {
                return Err(EnvError::DuplicateTransition {
                    line,
                    state: s,
                    action: a,
                });
            }
            *slot = Some(t);
        }

        let table = table
            .iter()
            .enumerate()
            .map(|(i, t)| {
                t.ok_or(EnvError::MissingTransition {
                    state: i / m,
                    action: i % m,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Environment::new(name, n, m, table)
    }
}

/// State and action counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Dims {
    pub states: usize,
    pub actions: usize,
}

/// Result of a single-source BFS.
#[derive(Debug, Clone)]
pub struct BfsTree {
    start: StateId,
    dist: Vec<Option<usize>>,
    parent: Vec<Option<(usize, usize)>>,
}

impl BfsTree {
    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn distance(&self, t: StateId) -> Option<usize> {
        self.dist[t.0]
    }

    pub fn distances(&self) -> &[Option<usize>] {
        &self.dist
    }

    pub fn path_to(&self, t: StateId) -> Option<ActionSeq> {
        self.dist[t.0]?;
        let mut path = Vec::new();
        let mut cur = t.0;
        while cur != self.start.0 {
            let (p, a) = self.parent[cur].expect("reached state has a parent");
            path.push(ActionId(a));
            cur = p;
        }
        path.reverse();
        Some(path)
    }
}

fn validate_name(name: &str) -> Result<(), String> {
    if name.is_empty() || name.chars().any(|c| c.is_whitespace() || c == '#') {
        Err(format!("environment name `{name}` must be a non-empty token without whitespace or `#`"))
    } else {
        Ok(())
    }
}

fn parse_count(line: usize, text: &str, what: &str) -> Result<usize, EnvError> {
    match text.parse::<usize>() {
        Ok(0) | Err(_) => Err(EnvError::MalformedLine {
            line,
            reason: format!("{what} must be a positive integer, found `{text}`"),
        }),
        Ok(v) => Ok(v),
    }
}

fn parse_index(line: usize, text: &str) -> Result<usize, EnvError> {
    text.parse::<usize>().map_err(|_| EnvError::MalformedLine {
        line,
        reason: format!("`{text}` is not a non-negative integer"),
    })
}

fn check_range(line: usize, what: &'static str, index: usize, bound: usize) -> Result<(), EnvError> {
    if index < bound {
        Ok(())
    } else {
        Err(EnvError::IndexOutOfRange {
            line,
            what,
            index,
            bound,
        })
    }
}
