//! The reference machine: bit-coded programs that output action sequences.
//!
//! Instruction encoding, with `A = ⌈log₂ max(m, 2)⌉` and
//! `N = ⌈log₂ max(n, 2)⌉` for an environment with `n` states and `m` actions:
//!
//! | bits                        | instruction                     |
//! |-----------------------------|---------------------------------|
//! | `00`                        | `HALT`                          |
//! | `01` + A bits               | `EMIT a`                        |
//! | `10` + γ(count−1) + γ(len)  | `REPEAT count × len`            |
//! | `11` + N bits               | `GOTO t` (oracle regime only)   |
//!
//! γ is the Elias gamma code. A program is a sequence of instructions that
//! ends at a top-level `HALT` and consumes every bit. `REPEAT` covers the
//! next `len` instructions in flat order; nested bodies must close inside
//! their enclosing body, and no body may contain `HALT`. These rules make the
//! set of valid programs prefix-free, so enumerating by (length, lexicographic
//! bits) lists each program once.

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::env::{ActionId, ActionSeq, Dims, Environment, StateId};

/// Step budget used when none is given.
pub const DEFAULT_STEP_BUDGET: usize = 10_000;

/// Whether a program may consult the transition function while running.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Bare,
    Oracle,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Bare => "bare",
            Regime::Oracle => "oracle",
        })
    }
}

/// A finite bit string.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Bits(Vec<bool>);

impl Bits {
    pub fn new() -> Self {
        Bits(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    /// Appends the low `width` bits of `value`, most significant first.
    pub fn push_uint(&mut self, value: u64, width: u32) {
        for i in (0..width).rev() {
            self.0.push((value >> i) & 1 == 1);
        }
    }

    /// Appends the Elias gamma code of `value` (which must be ≥ 1).
    pub fn push_gamma(&mut self, value: u64) {
        assert!(value >= 1, "Elias gamma is undefined for 0");
        let width = 64 - value.leading_zeros();
        for _ in 1..width {
            self.0.push(false);
        }
        self.push_uint(value, width);
    }

    pub fn extend(&mut self, other: &Bits) {
        self.0.extend_from_slice(&other.0);
    }

    /// The `i`-th bit string of length `len` in lexicographic order.
    pub fn from_index(index: u64, len: usize) -> Bits {
        let mut b = Bits::new();
        b.push_uint(index, len as u32);
        b
    }
}

impl From<Vec<bool>> for Bits {
    fn from(v: Vec<bool>) -> Self {
        Bits(v)
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("0b")?;
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid bit string: {0}")]
pub struct BitsParseError(String);

impl FromStr for Bits {
    type Err = BitsParseError;

    /// Accepts an optional `0b` prefix; spaces and underscores are ignored.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let body = s.trim().strip_prefix("0b").unwrap_or(s.trim());
        body.chars()
            .filter(|c| *c != '_' && !c.is_whitespace())
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(BitsParseError(format!("unexpected character `{other}`"))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Bits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Instruction {
    Halt,
    Emit(ActionId),
    /// Run the next `body_len` instructions `count` times.
    Repeat { count: u64, body_len: usize },
    /// Append a shortest action sequence to the target (oracle regime only).
    GotoTarget(StateId),
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::Halt => write!(f, "HALT"),
            Instruction::Emit(a) => write!(f, "EMIT {a}"),
            Instruction::Repeat { count, body_len } => write!(f, "REPEAT {count} x {body_len}"),
            Instruction::GotoTarget(t) => write!(f, "GOTO {t}"),
        }
    }
}

/// Field widths for a given environment shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Encoding {
    dims: Dims,
    action_bits: u32,
    state_bits: u32,
}

impl Encoding {
    pub fn new(dims: Dims) -> Self {
        assert!(dims.states >= 1 && dims.actions >= 1);
        Encoding {
            dims,
            action_bits: ceil_log2(dims.actions.max(2)),
            state_bits: ceil_log2(dims.states.max(2)),
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// `A`, the width of an `EMIT` operand.
    pub fn action_bits(&self) -> u32 {
        self.action_bits
    }

    /// `N`, the width of a `GOTO` operand.
    pub fn state_bits(&self) -> u32 {
        self.state_bits
    }

    /// Bit length of the `EMIT a₁ … EMIT aₖ HALT` program for `k` actions.
    pub fn emit_program_bits(&self, k: usize) -> usize {
        2 + k * (2 + self.action_bits as usize)
    }

    pub fn encode_instruction(&self, instr: &Instruction, out: &mut Bits) {
        match *instr {
            Instruction::Halt => out.push_uint(0b00, 2),
            Instruction::Emit(a) => {
                out.push_uint(0b01, 2);
                out.push_uint(a.0 as u64, self.action_bits);
            }
            Instruction::Repeat { count, body_len } => {
                out.push_uint(0b10, 2);
                out.push_gamma(count - 1);
                out.push_gamma(body_len as u64);
            }
            Instruction::GotoTarget(t) => {
                out.push_uint(0b11, 2);
                out.push_uint(t.0 as u64, self.state_bits);
            }
        }
    }

    pub fn encode(&self, instrs: &[Instruction]) -> Bits {
        let mut out = Bits::new();
        for i in instrs {
            self.encode_instruction(i, &mut out);
        }
        out
    }
}

fn ceil_log2(x: usize) -> u32 {
    debug_assert!(x >= 1);
    usize::BITS - (x - 1).leading_zeros()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("decode error at bit {position}: {reason}")]
pub struct DecodeError {
    pub position: usize,
    pub reason: DecodeFault,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeFault {
    #[error("truncated {0}")]
    Truncated(&'static str),
    #[error("trailing bits after HALT")]
    TrailingBits,
    #[error("repeat count below 2")]
    CountTooSmall,
    #[error("empty repeat body")]
    EmptyBody,
    #[error("action {0} out of range")]
    ActionOutOfRange(usize),
    #[error("target state {0} out of range")]
    TargetOutOfRange(usize),
    #[error("HALT inside an open repeat body")]
    HaltInsideBody,
    #[error("repeat body overruns its enclosing body")]
    BodyOverrun,
    #[error("gamma code too long")]
    GammaOverflow,
}

struct Reader<'a> {
    bits: &'a [bool],
    pos: usize,
}

impl Reader<'_> {
    fn fail(&self, reason: DecodeFault) -> DecodeError {
        DecodeError {
            position: self.pos,
            reason,
        }
    }

    fn uint(&mut self, width: u32, what: &'static str) -> Result<u64, DecodeError> {
        let width = width as usize;
        if self.pos + width > self.bits.len() {
            return Err(self.fail(DecodeFault::Truncated(what)));
        }
        let v = self.bits[self.pos..self.pos + width]
            .iter()
            .fold(0u64, |acc, &b| (acc << 1) | b as u64);
        self.pos += width;
        Ok(v)
    }

    fn gamma(&mut self, what: &'static str) -> Result<u64, DecodeError> {
        let mut zeros = 0u32;
        loop {
            match self.bits.get(self.pos) {
                None => return Err(self.fail(DecodeFault::Truncated(what))),
                Some(true) => break,
                Some(false) => {
                    zeros += 1;
                    self.pos += 1;
                    if zeros > 62 {
                        return Err(self.fail(DecodeFault::GammaOverflow));
                    }
                }
            }
        }
        self.uint(zeros + 1, what)
    }
}

/// Decodes a bit string into its flat instruction list.
pub fn decode(bits: &[bool], dims: Dims) -> Result<Vec<Instruction>, DecodeError> {
    let enc = Encoding::new(dims);
    let mut r = Reader { bits, pos: 0 };
    let mut open: Vec<usize> = Vec::new();
    let mut instrs = Vec::new();
    loop {
        let at = r.pos;
        let op = r.uint(2, "opcode")?;
        let instr = match op {
            0b00 => {
                if !open.is_empty() {
                    return Err(DecodeError {
                        position: at,
                        reason: DecodeFault::HaltInsideBody,
                    });
                }
                instrs.push(Instruction::Halt);
                if r.pos != bits.len() {
                    return Err(r.fail(DecodeFault::TrailingBits));
                }
                return Ok(instrs);
            }
            0b01 => {
                let a = r.uint(enc.action_bits, "EMIT operand")? as usize;
                if a >= dims.actions {
                    return Err(DecodeError {
                        position: at,
                        reason: DecodeFault::ActionOutOfRange(a),
                    });
                }
                Instruction::Emit(ActionId(a))
            }
            0b10 => {
                let count = r.gamma("REPEAT count")? + 1;
                let body_len = r.gamma("REPEAT body length")?;
                if count < 2 {
                    return Err(r.fail(DecodeFault::CountTooSmall));
                }
                if body_len == 0 {
                    return Err(r.fail(DecodeFault::EmptyBody));
                }
                Instruction::Repeat {
                    count,
                    body_len: body_len as usize,
                }
            }
            _ => {
                let t = r.uint(enc.state_bits, "GOTO operand")? as usize;
                if t >= dims.states {
                    return Err(DecodeError {
                        position: at,
                        reason: DecodeFault::TargetOutOfRange(t),
                    });
                }
                Instruction::GotoTarget(StateId(t))
            }
        };
        close_item(&mut open, &instr).map_err(|reason| DecodeError { position: at, reason })?;
        instrs.push(instr);
    }
}

/// Accounts for one more non-HALT instruction in every open body.
fn close_item(open: &mut Vec<usize>, instr: &Instruction) -> Result<(), DecodeFault> {
    for c in open.iter_mut() {
        *c -= 1;
    }
    if let Instruction::Repeat { body_len, .. } = *instr {
        if let Some(&room) = open.last() {
            if body_len > room {
                return Err(DecodeFault::BodyOverrun);
            }
        }
        open.push(body_len);
    }
    while open.last() == Some(&0) {
        open.pop();
    }
    Ok(())
}

/// A valid program together with its decoded instructions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    bits: Bits,
    instrs: Vec<Instruction>,
}

impl Program {
    pub fn decode(bits: Bits, dims: Dims) -> Result<Program, DecodeError> {
        let instrs = decode(bits.as_slice(), dims)?;
        Ok(Program { bits, instrs })
    }

    /// Encodes `instrs` and checks the result decodes back to them.
    pub fn from_instructions(instrs: &[Instruction], dims: Dims) -> Result<Program, DecodeError> {
        let bits = Encoding::new(dims).encode(instrs);
        Program::decode(bits, dims)
    }

    /// `EMIT a₁ … EMIT aₖ HALT`.
    pub fn emit_sequence(actions: &[ActionId], dims: Dims) -> Program {
        let mut instrs: Vec<Instruction> = actions.iter().map(|&a| Instruction::Emit(a)).collect();
        instrs.push(Instruction::Halt);
        Program::from_instructions(&instrs, dims).expect("in-range actions always encode")
    }

    pub fn bits(&self) -> &Bits {
        &self.bits
    }

    pub fn len_bits(&self) -> usize {
        self.bits.len()
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instrs
    }

    pub fn uses_oracle(&self) -> bool {
        self.instrs
            .iter()
            .any(|i| matches!(i, Instruction::GotoTarget(_)))
    }

    /// One instruction per line, indented by repeat nesting.
    pub fn disassemble(&self) -> String {
        let mut out = String::new();
        let mut open: Vec<usize> = Vec::new();
        for instr in &self.instrs {
            out.push_str(&"  ".repeat(open.len()));
            out.push_str(&instr.to_string());
            out.push('\n');
            if *instr != Instruction::Halt {
                let _ = close_item(&mut open, instr);
            }
        }
        out
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.bits.fmt(f)
    }
}

impl Serialize for Program {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(&self.bits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum Fault {
    #[error("GOTO executed without oracle access")]
    OracleInBare,
    #[error("step budget exceeded")]
    StepBudgetExceeded,
    #[error("GOTO target {0} unreachable from the current state")]
    UnreachableTarget(StateId),
}

/// Output of a halted program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecOutput {
    pub actions: ActionSeq,
    /// State reached by applying `actions` from the start state.
    pub end: StateId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecOutcome {
    pub result: Result<ExecOutput, Fault>,
    pub steps_used: usize,
}

struct Machine<'a> {
    env: &'a Environment,
    regime: Regime,
    budget: usize,
    steps: usize,
    state: StateId,
    out: ActionSeq,
}

impl Machine<'_> {
    fn tick(&mut self) -> Result<(), Fault> {
        if self.steps == self.budget {
            return Err(Fault::StepBudgetExceeded);
        }
        self.steps += 1;
        Ok(())
    }

    fn emit(&mut self, a: ActionId) -> Result<(), Fault> {
        self.tick()?;
        self.out.push(a);
        self.state = self.env.step(self.state, a);
        Ok(())
    }

    fn run(&mut self, instrs: &[Instruction]) -> Result<(), Fault> {
        let mut i = 0;
        while i < instrs.len() {
            self.tick()?;
            match instrs[i] {
                Instruction::Halt => return Ok(()),
                Instruction::Emit(a) => self.emit(a)?,
                Instruction::Repeat { count, body_len } => {
                    let body = &instrs[i + 1..i + 1 + body_len];
                    for _ in 0..count {
                        self.run(body)?;
                    }
                    i += body_len;
                }
                Instruction::GotoTarget(t) => {
                    if self.regime == Regime::Bare {
                        return Err(Fault::OracleInBare);
                    }
                    let path = self
                        .env
                        .shortest_path(self.state, t)
                        .ok_or(Fault::UnreachableTarget(t))?;
                    for a in path {
                        self.emit(a)?;
                    }
                }
            }
            i += 1;
        }
        Ok(())
    }
}

/// Runs `program` from `start`, charging one step per instruction dispatch
/// and one per emitted action.
pub fn execute(
    program: &Program,
    env: &Environment,
    regime: Regime,
    start: StateId,
    step_budget: usize,
) -> ExecOutcome {
    let mut m = Machine {
        env,
        regime,
        budget: step_budget,
        steps: 0,
        state: start,
        out: Vec::new(),
    };
    let result = m.run(program.instructions()).map(|()| ExecOutput {
        actions: std::mem::take(&mut m.out),
        end: m.state,
    });
    ExecOutcome {
        result,
        steps_used: m.steps,
    }
}

#[derive(Debug, Clone)]
struct Token {
    bits: Bits,
    instr: Instruction,
}

/// Generates valid programs stratum by stratum in (length, lexicographic)
/// order.
#[derive(Debug, Clone)]
pub struct Enumerator {
    dims: Dims,
    regime: Regime,
    max_bits: usize,
    tokens: Vec<Token>,
    /// `fitting[b]`: indices of tokens at most `b` bits long, in lexicographic order.
    fitting: Vec<Vec<usize>>,
    min_instr_bits: usize,
}

impl Enumerator {
    pub fn new(dims: Dims, regime: Regime, max_bits: usize) -> Self {
        let enc = Encoding::new(dims);
        let max_tok = max_bits.saturating_sub(2);
        let mut tokens = Vec::new();
        for a in 0..dims.actions {
            tokens.push(Instruction::Emit(ActionId(a)));
        }
        if regime == Regime::Oracle {
            for t in 0..dims.states {
                tokens.push(Instruction::GotoTarget(StateId(t)));
            }
        }
        // REPEAT headers: 2 + γ(count−1) + γ(len), each γ of odd width ≥ 1.
        let mut g1 = 1;
        while 2 + g1 + 1 < max_tok {
            let mut g2 = 1;
            while 2 + g1 + g2 < max_tok {
                let header = 2 + g1 + g2;
                let max_body = (max_tok - header) / 3;
                let (j1, j2) = ((g1 - 1) / 2, (g2 - 1) / 2);
                for c1 in 1u64 << j1..1u64 << (j1 + 1) {
                    for len in (1usize << j2..1usize << (j2 + 1)).take_while(|&l| l <= max_body) {
                        tokens.push(Instruction::Repeat {
                            count: c1 + 1,
                            body_len: len,
                        });
                    }
                }
                g2 += 2;
            }
            g1 += 2;
        }
        let mut tokens: Vec<Token> = tokens
            .into_iter()
            .map(|instr| {
                let mut bits = Bits::new();
                enc.encode_instruction(&instr, &mut bits);
                Token { bits, instr }
            })
            .filter(|t| t.bits.len() <= max_tok)
            .collect();
        tokens.sort_by(|a, b| a.bits.cmp(&b.bits));
        let mut min_instr_bits = (2 + enc.action_bits as usize).min(4);
        if regime == Regime::Oracle {
            min_instr_bits = min_instr_bits.min(2 + enc.state_bits as usize);
        }
        let fitting = (0..=max_tok)
            .map(|b| (0..tokens.len()).filter(|&i| tokens[i].bits.len() <= b).collect())
            .collect();
        Enumerator {
            dims,
            regime,
            max_bits,
            tokens,
            fitting,
            min_instr_bits,
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn max_bits(&self) -> usize {
        self.max_bits
    }

    /// All valid programs of exactly `len` bits, lexicographically ordered.
    pub fn stratum(&self, len: usize) -> Vec<Program> {
        let mut out = Vec::new();
        if len < 2 || len > self.max_bits {
            return out;
        }
        let mut instrs = Vec::new();
        let mut bits = Bits::new();
        self.extend(len, &[], &mut instrs, &mut bits, &mut out);
        out
    }

    fn extend(
        &self,
        remaining: usize,
        open: &[usize],
        instrs: &mut Vec<Instruction>,
        bits: &mut Bits,
        out: &mut Vec<Program>,
    ) {
        if remaining == 2 {
            if open.is_empty() {
                let mut b = bits.clone();
                b.push_uint(0, 2);
                let mut ins = instrs.clone();
                ins.push(Instruction::Halt);
                out.push(Program { bits: b, instrs: ins });
            }
            return;
        }
        for &ti in &self.fitting[remaining - 2] {
            let tok = &self.tokens[ti];
            let after = remaining - tok.bits.len();
            let mut next_open = open.to_vec();
            if close_item(&mut next_open, &tok.instr).is_err() {
                continue;
            }
            let pending = next_open.first().copied().unwrap_or(0);
            if after < 2 + pending * self.min_instr_bits {
                continue;
            }
            let mark = bits.len();
            bits.extend(&tok.bits);
            instrs.push(tok.instr);
            self.extend(after, &next_open, instrs, bits, out);
            instrs.pop();
            bits.0.truncate(mark);
        }
    }

    /// The full stream for lengths `2..=max_bits`.
    pub fn iter(&self) -> impl Iterator<Item = Program> + '_ {
        (2..=self.max_bits).flat_map(move |len| self.stratum(len))
    }
}

/// Valid programs of length `2..=max_bits` in (length, lexicographic) order.
/// The bare regime omits programs containing `GOTO`.
pub fn enumerate_programs(dims: Dims, max_bits: usize, regime: Regime) -> impl Iterator<Item = Program> {
    let e = Enumerator::new(dims, regime, max_bits);
    (2..=max_bits).flat_map(move |len| e.stratum(len))
}
