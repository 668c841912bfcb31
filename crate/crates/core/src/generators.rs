//! Benchmark environments and a description-length proxy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::env::{Environment, StateId};
use crate::vm::Bits;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("corridor string must be non-empty")]
    EmptyString,
    #[error("corridor string may contain only 0 and 1, found `{0}`")]
    InvalidBit(char),
    #[error("{0} must be at least 1")]
    ZeroSize(&'static str),
}

/// Named states of a gated corridor over a string of length `len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorridorStates {
    pub len: usize,
}

impl CorridorStates {
    pub fn start(&self) -> StateId {
        StateId(0)
    }

    /// `s_i`, the state after `i` correct actions.
    pub fn step(&self, i: usize) -> StateId {
        assert!(i <= self.len);
        StateId(i)
    }

    pub fn goal(&self) -> StateId {
        StateId(self.len + 1)
    }

    pub fn fail(&self) -> StateId {
        StateId(self.len + 2)
    }
}

/// The gated corridor for `x`.
///
/// States `s_0..s_n` are `0..=n`, `s_f` is `n + 1` and `s_fail` is `n + 2`.
/// From `s_i` action `x[i]` advances and the other action drops into the
/// absorbing `s_fail`; `s_n` moves to `s_f` under both actions; `s_f` absorbs.
pub fn gated_corridor(x: &str) -> Result<Environment, GenError> {
    if x.is_empty() {
        return Err(GenError::EmptyString);
    }
    let bits = x
        .chars()
        .map(|c| match c {
            '0' => Ok(0usize),
            '1' => Ok(1usize),
            other => Err(GenError::InvalidBit(other)),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let n = bits.len();
    let cs = CorridorStates { len: n };
    let (goal, fail) = (cs.goal().0, cs.fail().0);
    let env = Environment::from_fn(format!("corridor_{x}"), n + 3, 2, |s, a| {
        if s < n {
            if a == bits[s] {
                s + 1
            } else {
                fail
            }
        } else if s == n {
            goal
        } else {
            s
        }
    })
    .expect("corridor table is well formed");
    Ok(env)
}

/// A uniformly random binary string of length `len`, deterministic in `seed`.
pub fn random_bits(len: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| if rng.gen::<bool>() { '1' } else { '0' })
        .collect()
}

/// Each `(s, a)` maps to an independent uniform state.
pub fn random_env(n: usize, m: usize, seed: u64) -> Result<Environment, GenError> {
    check_size(n, "state count")?;
    check_size(m, "action count")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table = (0..n * m).map(|_| rng.gen_range(0..n)).collect();
    Ok(Environment::new(format!("random_{n}x{m}_s{seed}"), n, m, table).expect("in-range table"))
}

/// One action that moves `s_i` to `s_{(i+1) mod n}`.
pub fn cycle_env(n: usize) -> Result<Environment, GenError> {
    check_size(n, "cycle length")?;
    Ok(Environment::from_fn(format!("cycle_{n}"), n, 1, |s, _| (s + 1) % n).expect("in-range table"))
}

/// Grid actions, in index order.
pub const NORTH: usize = 0;
pub const EAST: usize = 1;
pub const SOUTH: usize = 2;
pub const WEST: usize = 3;

/// `w × h` grid; state `y·w + x`, actions N/E/S/W clamped at the edges.
pub fn grid_env(w: usize, h: usize) -> Result<Environment, GenError> {
    check_size(w, "grid width")?;
    check_size(h, "grid height")?;
    Ok(Environment::from_fn(format!("grid_{w}x{h}"), w * h, 4, |s, a| {
        let (x, y) = (s % w, s / w);
        let (x, y) = match a {
            NORTH => (x, y.saturating_sub(1)),
            EAST => ((x + 1).min(w - 1), y),
            SOUTH => (x, (y + 1).min(h - 1)),
            _ => (x.saturating_sub(1), y),
        };
        y * w + x
    })
    .expect("in-range table"))
}

/// Grid state for cell `(x, y)`.
pub fn grid_cell(w: usize, x: usize, y: usize) -> StateId {
    StateId(y * w + x)
}

fn check_size(v: usize, what: &'static str) -> Result<(), GenError> {
    if v == 0 {
        Err(GenError::ZeroSize(what))
    } else {
        Ok(())
    }
}

/// Description-length surrogate for an environment, in bits.
///
/// The transition table is run-length coded under four fixed views: literal
/// targets or offsets `(t − s) mod n`, each read row-major or column-major.
/// The proxy is the shortest of the four plus a 2-bit view selector and a
/// `γ(n) γ(m)` header. Each run costs `⌈log₂ max(n,2)⌉` bits for its value and
/// `γ(run length)` bits for its length. This is a computable upper-bound style
/// surrogate, not Kolmogorov complexity.
pub fn complexity_proxy(env: &Environment) -> u64 {
    let (n, m) = (env.num_states(), env.num_actions());
    let value_bits = (usize::BITS - (n.max(2) - 1).leading_zeros()) as u64;
    let mut header = Bits::new();
    header.push_gamma(n as u64);
    header.push_gamma(m as u64);

    let entry = |s: usize, a: usize, offset: bool| {
        let t = env.table()[s * m + a];
        if offset {
            (t + n - s) % n
        } else {
            t
        }
    };
    let row_major = |offset: bool| -> Vec<usize> {
        (0..n)
            .flat_map(|s| (0..m).map(move |a| (s, a)))
            .map(|(s, a)| entry(s, a, offset))
            .collect()
    };
    let col_major = |offset: bool| -> Vec<usize> {
        (0..m)
            .flat_map(|a| (0..n).map(move |s| (s, a)))
            .map(|(s, a)| entry(s, a, offset))
            .collect()
    };
    let best = [row_major(false), row_major(true), col_major(false), col_major(true)]
        .iter()
        .map(|seq| run_length_bits(seq, value_bits))
        .min()
        .expect("four views");
    header.len() as u64 + 2 + best
}

fn run_length_bits(seq: &[usize], value_bits: u64) -> u64 {
    let mut total = 0;
    let mut i = 0;
    while i < seq.len() {
        let mut j = i + 1;
        while j < seq.len() && seq[j] == seq[i] {
            j += 1;
        }
        let run = (j - i) as u64;
        total += value_bits + 2 * (63 - run.leading_zeros() as u64) + 1;
        i = j;
    }
    total
}
