//! Intervention complexity for finite deterministic environments.
//!
//! The crate measures how hard it is to drive an environment from one state to
//! another under a chosen resource bias, and evaluates agents against that
//! minimum through competence curves and regret.
//!
//! * [`env`]: environments, transition tables and BFS.
//! * [`vm`]: the reference machine, its bit encoding and program enumeration.
//! * [`engine`]: IC queries, knowledge cost and the quasimetric check.
//! * [`generators`]: gated corridors, random, cycle and grid environments.
//! * [`agents`]: the agent contract and the oracle, random and tabular agents.
//! * [`eval`]: competence curves, regret schemes and learning efficiency.

pub mod agents;
pub mod cost;
pub mod engine;
pub mod env;
pub mod eval;
pub mod generators;
pub mod par;
pub mod vm;

pub use agents::{make_agent, Agent, Task};
pub use cost::Cost;
pub use engine::{ic, ic_table, IcResult, IcTable, ResourceBias, SearchBudget};
pub use env::{ActionId, Environment, StateId, Transition};
pub use eval::{CompetenceCurve, EvalConfig, Evaluator, Scheme};
pub use par::Exec;
pub use vm::{Program, Regime};
